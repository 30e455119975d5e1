#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mselab/numerics/rng.hpp"
#include "mselab/synthlang/concepts.hpp"

namespace mse::synth {

// Deterministic word-order rules. All of them are position bijections, which
// keeps realization injective per language.
enum class OrderRule { identity, reverse, rotate_one, swap_adjacent, rotate_two };

struct SuffixRule {
    enum class Kind { none, content_all, alternating, final_word };
    Kind kind = Kind::none;
    std::string sfx1, sfx2;
};

// A synthetic language: a bijective lexicon over the concept inventory plus
// deterministic reordering and suffix morphology. Content words are
// consonant-initial and function words vowel-initial, so suffixed content
// forms can never collide with function words.
struct LanguageSpec {
    std::string lang_id;
    std::vector<std::string> lexicon;  // concept id -> surface word
    OrderRule order = OrderRule::identity;
    SuffixRule suffix;
};

// Builds one language per id. The pivot keeps identity order and bare stems;
// the others cycle through reorder/suffix patterns with per-language
// phonologies so their token distributions genuinely differ.
std::vector<LanguageSpec> make_language_family(std::uint64_t seed,
                                               const std::vector<std::string>& lang_ids,
                                               const ConceptInventory& inv,
                                               std::size_t pivot_index);

// Order -> lexicon -> suffixes -> space join. Throws on unknown concept ids.
std::string realize(const ConceptSentence& cs, const LanguageSpec& lang);

// Emulated translation noise: each content concept is synonym-swapped with
// probability p before realization.
ConceptSentence noisy_variant(const ConceptSentence& cs, const ConceptInventory& inv, double p,
                              num::RngState& rng);

}  // namespace mse::synth
