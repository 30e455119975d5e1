#pragma once

#include <cstddef>
#include <vector>

#include "mselab/numerics/rng.hpp"

namespace mse::train {

struct MaskedBatch {
    std::vector<std::vector<int>> corrupted;
    std::vector<std::vector<int>> positions;  // masked positions per sequence
    std::vector<std::vector<int>> originals;  // original ids at those positions

    std::size_t total_masked() const {
        std::size_t n = 0;
        for (const auto& p : positions) n += p.size();
        return n;
    }
};

// BERT-style dynamic masking: each non-special position is selected with
// probability mask_prob; of the selected, 80% become [MASK], 10% a random
// non-special token, 10% stay unchanged. Batches that draw zero masked
// positions are resampled.
MaskedBatch mask_batch(const std::vector<std::vector<int>>& ids, double mask_prob,
                       num::RngState& rng, int vocab_size);

}  // namespace mse::train
