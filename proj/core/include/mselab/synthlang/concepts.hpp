#pragma once

#include <optional>
#include <set>
#include <vector>

#include "mselab/numerics/rng.hpp"

namespace mse::synth {

// Concept id space: content concepts come first, organized as synonym groups
// of equal size (group g owns ids [g*group_size, (g+1)*group_size)); function
// concepts follow.
struct ConceptInventory {
    int n_groups = 150;
    int group_size = 2;
    int n_function = 14;

    int n_content() const { return n_groups * group_size; }
    int n_total() const { return n_content() + n_function; }
    bool is_content(int id) const { return id >= 0 && id < n_content(); }
    bool is_function(int id) const { return id >= n_content() && id < n_total(); }
    int group_of(int id) const { return id / group_size; }
    int member_of(int group, int k) const { return group * group_size + k; }
};

// Language-neutral meaning: a sequence of concept ids, at least two of them
// content concepts. Content groups never repeat within a sentence.
struct ConceptSentence {
    std::vector<int> concepts;

    std::vector<int> content_ids(const ConceptInventory& inv) const;
    std::set<int> content_groups(const ConceptInventory& inv) const;
};

// Jaccard over raw content concept ids (synonym swaps count as differences).
double content_jaccard_ids(const ConceptSentence& a, const ConceptSentence& b,
                           const ConceptInventory& inv);

// Jaccard over synonym-group ids: the meaning-level overlap used for gold
// labels and oracles (synonyms denote the same meaning).
double content_jaccard_groups(const ConceptSentence& a, const ConceptSentence& b,
                              const ConceptInventory& inv);

// Deterministic corpus of sentences with lengths uniform in [3, 12].
// Throws if the inventory has fewer than 50 content concepts or synonym
// groups smaller than 2. A positive max_group restricts content sampling to
// groups [0, max_group) — a topical subdomain.
std::vector<ConceptSentence> gen_concept_corpus(const ConceptInventory& inv, int n_sentences,
                                                num::RngState rng, int max_group = 0);

ConceptSentence gen_concept_sentence(const ConceptInventory& inv, num::RngState& rng,
                                     int max_group = 0);

struct ParaphraseStats {
    long fallbacks = 0;  // resampling exhausted, capped-swap variant returned
};

// Synonym-swaps each content concept with prob 0.5 and drops/inserts one
// function concept with prob 0.3, resampling (max 20) until the id-level
// content Jaccard stays >= 0.6.
ConceptSentence gen_paraphrase(const ConceptSentence& cs, const ConceptInventory& inv,
                               num::RngState& rng, ParaphraseStats* stats = nullptr,
                               double p_swap = 0.5, double p_func = 0.3);

// Replaces exactly one content concept with a member of a different group.
ConceptSentence gen_hard_negative(const ConceptSentence& cs, const ConceptInventory& inv,
                                  num::RngState& rng);

}  // namespace mse::synth
