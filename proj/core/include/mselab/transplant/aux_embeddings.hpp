#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "mselab/tokenizer/bpe.hpp"

namespace mse::focus {

// Deterministic static token vectors used to score token similarity during
// embedding transplant. Built from a positive-PMI co-occurrence matrix
// factorized by truncated SVD; fastText-free by design.
struct AuxEmbeddings {
    int dim = 0;
    std::unordered_map<std::string, std::vector<float>> vectors;
    // Tokens that never co-occurred and were assigned the zero vector.
    std::vector<std::string> zero_tokens;

    const std::vector<float>* find(const std::string& token) const {
        auto it = vectors.find(token);
        return it == vectors.end() ? nullptr : &it->second;
    }
};

// Trains aux vectors over the corpus tokenized with BOTH tokenizers; token
// strings shared by the two vocabularies act as the bridge between them.
// Identical corpus gives identical vectors; the sign of each singular vector
// is fixed by forcing its largest-magnitude entry nonnegative.
AuxEmbeddings train_aux_embeddings(const std::vector<std::string>& corpus,
                                   const tok::BpeModel& source_tok,
                                   const tok::BpeModel& target_tok, int dim, int window = 5);

}  // namespace mse::focus
