#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "mselab/numerics/tensor.hpp"
#include "mselab/tokenizer/bpe.hpp"
#include "mselab/transplant/aux_embeddings.hpp"

namespace mse::focus {

// Exact-string vocabulary overlap: target token -> source token id. The
// anchor set for embedding transplant.
struct OverlapMap {
    std::unordered_map<std::string, int> pairs;
};

// Includes special tokens. Throws "no anchors" on an empty intersection.
OverlapMap compute_overlap(const tok::Vocab& source_vocab, const tok::Vocab& target_vocab);

struct FocusResult {
    num::Tensor<float> embeddings;  // (target V, d)
    // Non-overlap tokens that had a zero aux vector and fell back to the mean
    // of the overlap embeddings.
    std::vector<std::string> fallback_tokens;
};

// Overlap tokens copy their source embedding row exactly; every other token
// becomes a sparsemax-weighted convex combination of overlap rows, with
// weights from cosine similarity in the aux space.
FocusResult focus_init(const num::Tensor<float>& source_embeddings, const OverlapMap& overlap,
                       const AuxEmbeddings& aux, const tok::Vocab& target_vocab);

}  // namespace mse::focus

#include "mselab/encoder/model.hpp"

namespace mse::focus {

// Full transplant: clones the source encoder body, swaps in a FOCUS-initialized
// embedding matrix for the target vocabulary, copies overlap rows of the MLM
// bias and zeroes the rest. The result carries phase "transplanted".
enc::EncoderModel<float> transplant_encoder(const enc::EncoderModel<float>& source,
                                            const tok::BpeModel& source_tok,
                                            const tok::BpeModel& target_tok,
                                            const std::vector<std::string>& target_corpus,
                                            int aux_dim, int aux_window,
                                            const std::string& lang_id);

}  // namespace mse::focus
