#include "mselab/training/masking.hpp"

#include <stdexcept>

#include "mselab/tokenizer/bpe.hpp"

namespace mse::train {

MaskedBatch mask_batch(const std::vector<std::vector<int>>& ids, double mask_prob,
                       num::RngState& rng, int vocab_size) {
    if (mask_prob <= 0.0) throw std::invalid_argument("mask_batch: nothing to train");
    if (mask_prob > 1.0) throw std::invalid_argument("mask_batch: mask_prob must be in (0,1]");
    if (vocab_size <= tok::kNumSpecials)
        throw std::invalid_argument("mask_batch: vocabulary has no maskable tokens");

    const int n_regular = vocab_size - tok::kNumSpecials;
    for (int attempt = 0; attempt < 10000; ++attempt) {
        MaskedBatch out;
        out.corrupted = ids;
        out.positions.resize(ids.size());
        out.originals.resize(ids.size());
        std::size_t total = 0;
        for (std::size_t s = 0; s < ids.size(); ++s) {
            for (std::size_t p = 0; p < ids[s].size(); ++p) {
                const int id = ids[s][p];
                if (id < tok::kNumSpecials) continue;  // [PAD]/[UNK]/[CLS]/[SEP]/[MASK]
                if (!rng.bernoulli(mask_prob)) continue;
                out.positions[s].push_back(static_cast<int>(p));
                out.originals[s].push_back(id);
                const double roll = rng.uniform();
                if (roll < 0.8) {
                    out.corrupted[s][p] = tok::kMask;
                } else if (roll < 0.9) {
                    out.corrupted[s][p] =
                        tok::kNumSpecials +
                        static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(n_regular)));
                }  // else: keep the original token
                ++total;
            }
        }
        if (total > 0) return out;
    }
    throw std::runtime_error("mask_batch: no maskable positions in batch");
}

}  // namespace mse::train
