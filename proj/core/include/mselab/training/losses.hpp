#pragma once

#include <stdexcept>
#include <vector>

#include "mselab/encoder/model.hpp"
#include "mselab/numerics/ops.hpp"
#include "mselab/training/masking.hpp"

namespace mse::train {

// Mean cross-entropy over every masked position of the batch.
template <typename T>
num::Tensor<T> mlm_loss(const enc::EncoderModel<T>& model, const MaskedBatch& batch) {
    std::vector<num::Tensor<T>> logit_parts;
    std::vector<int> targets;
    for (std::size_t s = 0; s < batch.corrupted.size(); ++s) {
        if (batch.positions[s].empty()) continue;
        logit_parts.push_back(model.mlm_logits(batch.corrupted[s], batch.positions[s]));
        for (int id : batch.originals[s]) targets.push_back(id);
    }
    if (logit_parts.empty()) throw std::invalid_argument("mlm_loss: batch has no masked positions");
    num::Tensor<T> logits =
        logit_parts.size() == 1 ? logit_parts[0] : num::concat_rows(logit_parts);
    return num::cross_entropy_rows(logits, targets);
}

// Multiple negatives ranking loss. Candidates for anchor i are all positives
// plus all hard negatives; the target is the anchor's own positive. Scores
// are scale * cosine.
template <typename T>
num::Tensor<T> mnrl_loss(const num::Tensor<T>& anchors, const num::Tensor<T>& positives,
                         const num::Tensor<T>* hard_negatives, T scale) {
    const std::size_t n = anchors.rows();
    if (positives.rows() != n) throw std::invalid_argument("mnrl: anchor/positive count mismatch");
    const bool has_hard = hard_negatives != nullptr && hard_negatives->rows() > 0;
    if (n < 2 && !has_hard) throw std::invalid_argument("mnrl: no negatives");

    num::Tensor<T> cand =
        has_hard ? num::concat_rows<T>({positives, *hard_negatives}) : positives;
    num::Tensor<T> a = num::l2_normalize_rows(anchors);
    num::Tensor<T> c = num::l2_normalize_rows(cand);
    num::Tensor<T> logits = num::scale(num::matmul_nt(a, c), scale);
    std::vector<int> targets(n);
    for (std::size_t i = 0; i < n; ++i) targets[i] = static_cast<int>(i);
    return num::cross_entropy_rows(logits, targets);
}

}  // namespace mse::train
