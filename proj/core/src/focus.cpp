#include "mselab/transplant/focus.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mselab/numerics/kernels.hpp"

namespace mse::focus {

OverlapMap compute_overlap(const tok::Vocab& source_vocab, const tok::Vocab& target_vocab) {
    OverlapMap overlap;
    for (int tid = 0; tid < target_vocab.size(); ++tid) {
        const std::string& token = target_vocab.token_of[static_cast<std::size_t>(tid)];
        const int sid = source_vocab.lookup(token);
        if (sid >= 0) overlap.pairs.emplace(token, sid);
    }
    if (overlap.pairs.empty()) throw std::runtime_error("focus: no anchors");
    return overlap;
}

FocusResult focus_init(const num::Tensor<float>& source_embeddings, const OverlapMap& overlap,
                       const AuxEmbeddings& aux, const tok::Vocab& target_vocab) {
    const std::size_t d = source_embeddings.cols();
    const std::size_t target_v = static_cast<std::size_t>(target_vocab.size());

    // Deterministic anchor order: target vocab id order.
    std::vector<std::pair<std::string, int>> anchors;
    for (int tid = 0; tid < target_vocab.size(); ++tid) {
        const std::string& token = target_vocab.token_of[static_cast<std::size_t>(tid)];
        auto it = overlap.pairs.find(token);
        if (it != overlap.pairs.end()) anchors.emplace_back(token, it->second);
    }
    if (anchors.empty()) throw std::runtime_error("focus: no anchors");

    // Aux vectors and norms for the anchors; zero-aux anchors score 0 against
    // everything but remain copy targets.
    std::vector<const std::vector<float>*> anchor_aux(anchors.size(), nullptr);
    std::vector<double> anchor_norm(anchors.size(), 0.0);
    for (std::size_t a = 0; a < anchors.size(); ++a) {
        const auto* v = aux.find(anchors[a].first);
        if (!v) throw std::runtime_error("focus: missing aux vector for token '" +
                                         anchors[a].first + "'");
        anchor_aux[a] = v;
        double s = 0.0;
        for (float x : *v) s += static_cast<double>(x) * static_cast<double>(x);
        anchor_norm[a] = std::sqrt(s);
    }

    // Mean of the overlap embeddings, the fallback row for zero-aux tokens.
    std::vector<double> anchor_mean(d, 0.0);
    for (const auto& [_, sid] : anchors)
        for (std::size_t j = 0; j < d; ++j)
            anchor_mean[j] += static_cast<double>(source_embeddings.at(static_cast<std::size_t>(sid), j));
    for (double& x : anchor_mean) x /= static_cast<double>(anchors.size());

    FocusResult res;
    res.embeddings = num::Tensor<float>::zeros({target_v, d});

    std::vector<double> scores(anchors.size());
    for (int tid = 0; tid < target_vocab.size(); ++tid) {
        const std::string& token = target_vocab.token_of[static_cast<std::size_t>(tid)];
        auto it = overlap.pairs.find(token);
        if (it != overlap.pairs.end()) {
            // Copy rule: bit-identical row from the source matrix.
            const auto sid = static_cast<std::size_t>(it->second);
            for (std::size_t j = 0; j < d; ++j)
                res.embeddings.at(static_cast<std::size_t>(tid), j) = source_embeddings.at(sid, j);
            continue;
        }
        const auto* tv = aux.find(token);
        if (!tv) throw std::runtime_error("focus: missing aux vector for token '" + token + "'");
        double tn = 0.0;
        for (float x : *tv) tn += static_cast<double>(x) * static_cast<double>(x);
        tn = std::sqrt(tn);
        if (tn == 0.0) {
            for (std::size_t j = 0; j < d; ++j)
                res.embeddings.at(static_cast<std::size_t>(tid), j) =
                    static_cast<float>(anchor_mean[j]);
            res.fallback_tokens.push_back(token);
            continue;
        }
        for (std::size_t a = 0; a < anchors.size(); ++a) {
            if (anchor_norm[a] == 0.0) {
                scores[a] = 0.0;
                continue;
            }
            double dot = 0.0;
            const auto& av = *anchor_aux[a];
            for (std::size_t j = 0; j < av.size(); ++j)
                dot += static_cast<double>((*tv)[j]) * static_cast<double>(av[j]);
            scores[a] = dot / (tn * anchor_norm[a]);
        }
        const std::vector<double> w = num::sparsemax(scores);
        for (std::size_t a = 0; a < anchors.size(); ++a) {
            if (w[a] == 0.0) continue;
            const auto sid = static_cast<std::size_t>(anchors[a].second);
            for (std::size_t j = 0; j < d; ++j)
                res.embeddings.at(static_cast<std::size_t>(tid), j) +=
                    static_cast<float>(w[a] * static_cast<double>(source_embeddings.at(sid, j)));
        }
    }
    return res;
}

enc::EncoderModel<float> transplant_encoder(const enc::EncoderModel<float>& source,
                                            const tok::BpeModel& source_tok,
                                            const tok::BpeModel& target_tok,
                                            const std::vector<std::string>& target_corpus,
                                            int aux_dim, int aux_window,
                                            const std::string& lang_id) {
    const AuxEmbeddings aux =
        train_aux_embeddings(target_corpus, source_tok, target_tok, aux_dim, aux_window);
    const OverlapMap overlap = compute_overlap(source_tok.vocab, target_tok.vocab);
    FocusResult init = focus_init(source.token_embeddings, overlap, aux, target_tok.vocab);

    enc::EncoderModel<float> model = source.clone();
    model.config.vocab_size = target_tok.vocab.size();
    model.token_embeddings = std::move(init.embeddings);

    auto bias = num::Tensor<float>::zeros({static_cast<std::size_t>(target_tok.vocab.size())});
    for (const auto& [token, sid] : overlap.pairs) {
        const int tid = target_tok.vocab.lookup(token);
        bias.v()[static_cast<std::size_t>(tid)] =
            source.mlm_bias.v()[static_cast<std::size_t>(sid)];
    }
    model.mlm_bias = std::move(bias);
    model.phase = "transplanted";
    model.lang = lang_id;
    return model;
}

}  // namespace mse::focus
