#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mselab/synthlang/concepts.hpp"
#include "mselab/synthlang/language.hpp"

namespace mse::synth {

// One paraphrase triplet at the concept level.
struct ParaItem {
    ConceptSentence anchor, positive;
    std::optional<ConceptSentence> hard_negative;
};

struct MultiParallelCorpus {
    std::vector<ParaItem> items;
};

// A positive max_group restricts anchors to a topical subdomain.
MultiParallelCorpus build_corpus(const ConceptInventory& inv, int n_items,
                                 double hard_negative_fraction, num::RngState rng,
                                 int max_group = 0);

// Surface realization of a triplet in one language.
struct RealizedItem {
    std::string anchor, positive, hard;  // hard empty when absent
};

// items[i][l] is item i realized in family language l. Non-pivot realizations
// carry translation noise; the pivot's stay clean.
struct RealizedCorpus {
    std::vector<std::string> langs;
    std::vector<std::vector<RealizedItem>> items;
};

RealizedCorpus realize_corpus(const MultiParallelCorpus& corpus,
                              const std::vector<LanguageSpec>& family, std::size_t pivot_index,
                              const ConceptInventory& inv, double noise_p, num::RngState rng);

std::vector<std::string> build_mlm_corpus(const ConceptInventory& inv, const LanguageSpec& lang,
                                          bool is_pivot, int n_sentences, double noise_p,
                                          num::RngState rng);

// ----------------------------- STS -----------------------------

struct StsPair {
    std::string lang_a, lang_b;
    std::string text_a, text_b;
    double gold;  // content-group Jaccard, exact by construction
    std::vector<int> groups_a, groups_b;  // oracle payload, not serialized
};

struct StsBenchmark {
    std::vector<StsPair> pairs;
};

// Pairs at each corruption level for every language (mono) and every ordered
// language pair (cross). Corruption replaces round(level * k) of the anchor's
// k content groups with fresh ones; retained concepts may synonym-swap, so
// gold-1.0 pairs still differ textually.
StsBenchmark build_sts(const ConceptInventory& inv, const std::vector<LanguageSpec>& family,
                       const std::vector<double>& levels, int n_mono_per_lang,
                       int n_cross_per_direction, std::uint64_t seed);

// ----------------------------- MCQA -----------------------------

struct McqaItem {
    std::string lang_passage, lang_qa;
    std::string passage;  // realized sentences joined with spaces
    std::string question;
    std::array<std::string, 4> answers;
    int correct = 0;
    std::vector<int> passage_groups;
    std::array<std::vector<int>, 4> qa_groups;  // question+answer content groups
};

struct McqaBenchmark {
    std::vector<McqaItem> items;
};

// Passages of 3-5 group-disjoint sentences; question and the correct answer
// paraphrase one passage sentence, distractors paraphrase sentences from
// other items' passages (group-disjoint from this passage).
McqaBenchmark build_mcqa(const ConceptInventory& inv, const std::vector<LanguageSpec>& family,
                         int n_mono, int n_cross, std::uint64_t seed);

}  // namespace mse::synth
