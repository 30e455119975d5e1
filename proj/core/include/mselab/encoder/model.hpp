#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mselab/encoder/config.hpp"
#include "mselab/numerics/ops.hpp"
#include "mselab/numerics/rng.hpp"
#include "mselab/numerics/tensor.hpp"
#include "mselab/tokenizer/bpe.hpp"

namespace mse::enc {

using mse::num::Tensor;

template <typename T>
struct EncoderLayer {
    Tensor<T> wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor<T> ln1_g, ln1_b;
    Tensor<T> w1, b1, w2, b2;
    Tensor<T> ln2_g, ln2_b;
};

// Bottleneck adapter wired in parallel with the FFN sublayer: it reads the
// sublayer input and its (scaled) output is added to the FFN output before
// the residual norm. A zero up-projection makes it an exact identity.
template <typename T>
struct AdapterLayer {
    Tensor<T> w_down, b_down, w_up, b_up;
};

template <typename T>
struct AdapterStack {
    int bottleneck = 0;
    T scale = T(4);
    std::vector<AdapterLayer<T>> layers;
};

template <typename T>
struct EncoderModel {
    EncoderConfig config;
    Tensor<T> token_embeddings;     // (V, d)
    Tensor<T> position_embeddings;  // (max_len, d)
    Tensor<T> emb_ln_g, emb_ln_b;
    std::vector<EncoderLayer<T>> layers;
    Tensor<T> mlm_bias;  // (V)
    std::optional<AdapterStack<T>> adapter;
    bool frozen_base = false;
    std::string phase = "init";
    std::string lang;

    static EncoderModel random_init(const EncoderConfig& cfg, mse::num::RngState& rng) {
        cfg.validate();
        EncoderModel m;
        m.config = cfg;
        const auto V = static_cast<std::size_t>(cfg.vocab_size);
        const auto d = static_cast<std::size_t>(cfg.d_model);
        const auto ff = static_cast<std::size_t>(cfg.d_ff);
        const T std02 = T(0.02);
        m.token_embeddings = Tensor<T>::randn({V, d}, rng, std02);
        m.position_embeddings = Tensor<T>::randn({static_cast<std::size_t>(cfg.max_len), d}, rng, std02);
        m.emb_ln_g = Tensor<T>::full({d}, T(1));
        m.emb_ln_b = Tensor<T>::zeros({d});
        for (int l = 0; l < cfg.n_layers; ++l) {
            EncoderLayer<T> L;
            L.wq = Tensor<T>::randn({d, d}, rng, std02);
            L.bq = Tensor<T>::zeros({d});
            L.wk = Tensor<T>::randn({d, d}, rng, std02);
            L.bk = Tensor<T>::zeros({d});
            L.wv = Tensor<T>::randn({d, d}, rng, std02);
            L.bv = Tensor<T>::zeros({d});
            L.wo = Tensor<T>::randn({d, d}, rng, std02);
            L.bo = Tensor<T>::zeros({d});
            L.ln1_g = Tensor<T>::full({d}, T(1));
            L.ln1_b = Tensor<T>::zeros({d});
            L.w1 = Tensor<T>::randn({d, ff}, rng, std02);
            L.b1 = Tensor<T>::zeros({ff});
            L.w2 = Tensor<T>::randn({ff, d}, rng, std02);
            L.b2 = Tensor<T>::zeros({d});
            L.ln2_g = Tensor<T>::full({d}, T(1));
            L.ln2_b = Tensor<T>::zeros({d});
            m.layers.push_back(std::move(L));
        }
        m.mlm_bias = Tensor<T>::zeros({V});
        return m;
    }

    // Adds one parallel adapter per layer. Down projection gets a small random
    // init; the whole up projection starts at zero so the adapted model is an
    // exact identity of the base until trained. Freezes the base.
    void attach_adapter(int bottleneck, T scale_s, mse::num::RngState& rng) {
        if (adapter) throw std::logic_error("attach_adapter: adapter already present");
        if (bottleneck <= 0 || bottleneck >= config.d_model)
            throw std::invalid_argument("attach_adapter: bottleneck must be in (0, d_model)");
        AdapterStack<T> st;
        st.bottleneck = bottleneck;
        st.scale = scale_s;
        const auto d = static_cast<std::size_t>(config.d_model);
        const auto r = static_cast<std::size_t>(bottleneck);
        for (int l = 0; l < config.n_layers; ++l) {
            AdapterLayer<T> a;
            a.w_down = Tensor<T>::randn({d, r}, rng, T(0.02));
            a.b_down = Tensor<T>::zeros({r});
            a.w_up = Tensor<T>::zeros({r, d});
            a.b_up = Tensor<T>::zeros({d});
            st.layers.push_back(std::move(a));
        }
        adapter = std::move(st);
        frozen_base = true;
    }

    std::vector<Tensor<T>*> base_parameters() {
        std::vector<Tensor<T>*> out = {&token_embeddings, &position_embeddings, &emb_ln_g,
                                       &emb_ln_b};
        for (auto& L : layers) {
            for (Tensor<T>* t : {&L.wq, &L.bq, &L.wk, &L.bk, &L.wv, &L.bv, &L.wo, &L.bo,
                                 &L.ln1_g, &L.ln1_b, &L.w1, &L.b1, &L.w2, &L.b2, &L.ln2_g,
                                 &L.ln2_b})
                out.push_back(t);
        }
        out.push_back(&mlm_bias);
        return out;
    }

    std::vector<Tensor<T>*> adapter_parameters() {
        std::vector<Tensor<T>*> out;
        if (!adapter) return out;
        for (auto& a : adapter->layers)
            for (Tensor<T>* t : {&a.w_down, &a.b_down, &a.w_up, &a.b_up}) out.push_back(t);
        return out;
    }

    std::vector<Tensor<T>*> parameters() {
        auto out = base_parameters();
        for (Tensor<T>* t : adapter_parameters()) out.push_back(t);
        return out;
    }

    std::vector<Tensor<T>*> trainable_parameters() {
        return frozen_base ? adapter_parameters() : parameters();
    }

    std::vector<std::pair<std::string, Tensor<T>*>> named_parameters() {
        std::vector<std::pair<std::string, Tensor<T>*>> out;
        out.emplace_back("token_embeddings", &token_embeddings);
        out.emplace_back("position_embeddings", &position_embeddings);
        out.emplace_back("emb_ln_gamma", &emb_ln_g);
        out.emplace_back("emb_ln_beta", &emb_ln_b);
        for (std::size_t l = 0; l < layers.size(); ++l) {
            auto& L = layers[l];
            const std::string p = "layers." + std::to_string(l) + ".";
            out.emplace_back(p + "attn.wq", &L.wq);
            out.emplace_back(p + "attn.bq", &L.bq);
            out.emplace_back(p + "attn.wk", &L.wk);
            out.emplace_back(p + "attn.bk", &L.bk);
            out.emplace_back(p + "attn.wv", &L.wv);
            out.emplace_back(p + "attn.bv", &L.bv);
            out.emplace_back(p + "attn.wo", &L.wo);
            out.emplace_back(p + "attn.bo", &L.bo);
            out.emplace_back(p + "ln1_gamma", &L.ln1_g);
            out.emplace_back(p + "ln1_beta", &L.ln1_b);
            out.emplace_back(p + "ffn.w1", &L.w1);
            out.emplace_back(p + "ffn.b1", &L.b1);
            out.emplace_back(p + "ffn.w2", &L.w2);
            out.emplace_back(p + "ffn.b2", &L.b2);
            out.emplace_back(p + "ln2_gamma", &L.ln2_g);
            out.emplace_back(p + "ln2_beta", &L.ln2_b);
        }
        out.emplace_back("mlm_bias", &mlm_bias);
        if (adapter) {
            for (std::size_t l = 0; l < adapter->layers.size(); ++l) {
                auto& a = adapter->layers[l];
                const std::string p = "adapter." + std::to_string(l) + ".";
                out.emplace_back(p + "w_down", &a.w_down);
                out.emplace_back(p + "b_down", &a.b_down);
                out.emplace_back(p + "w_up", &a.w_up);
                out.emplace_back(p + "b_up", &a.b_up);
            }
        }
        return out;
    }

    // Marks trainable tensors for gradient tracking; everything else is left
    // untouched by both backward and the optimizer.
    void set_training_mode(bool train) {
        for (Tensor<T>* t : parameters()) t->requires_grad = false;
        if (train)
            for (Tensor<T>* t : trainable_parameters()) t->set_requires_grad(true);
    }

    // Encoder stack over the non-[PAD] positions of `ids`. Padding is dropped
    // up front (original position indices are kept for the position table),
    // so appended [PAD] tokens cannot change any kept activation.
    Tensor<T> encode_hidden(const std::vector<int>& ids, bool use_adapter,
                            std::vector<int>* kept_positions = nullptr) const {
        if (static_cast<int>(ids.size()) > config.max_len)
            throw std::invalid_argument("encode_hidden: sequence longer than max_len");
        std::vector<int> kept_ids, kept_pos;
        for (std::size_t p = 0; p < ids.size(); ++p) {
            if (ids[p] == tok::kPad) continue;
            if (ids[p] < 0 || ids[p] >= config.vocab_size)
                throw std::out_of_range("encode_hidden: token id out of range");
            kept_ids.push_back(ids[p]);
            kept_pos.push_back(static_cast<int>(p));
        }
        if (kept_ids.empty()) throw std::invalid_argument("encode_hidden: all-[PAD] input");
        if (kept_positions) *kept_positions = kept_pos;

        using namespace mse::num;
        const auto heads = static_cast<std::size_t>(config.n_heads);
        Tensor<T> h = embed_sum(token_embeddings, position_embeddings, kept_ids, kept_pos);
        h = layer_norm_rows(h, emb_ln_g, emb_ln_b);
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const auto& L = layers[l];
            Tensor<T> q = add_rowvec(matmul(h, L.wq), L.bq);
            Tensor<T> k = add_rowvec(matmul(h, L.wk), L.bk);
            Tensor<T> v = add_rowvec(matmul(h, L.wv), L.bv);
            Tensor<T> att = add_rowvec(matmul(attention(q, k, v, heads), L.wo), L.bo);
            Tensor<T> h1 = layer_norm_rows(add(h, att), L.ln1_g, L.ln1_b);
            Tensor<T> ff =
                add_rowvec(matmul(gelu(add_rowvec(matmul(h1, L.w1), L.b1)), L.w2), L.b2);
            if (adapter && use_adapter) {
                const auto& a = adapter->layers[l];
                Tensor<T> mid = relu(add_rowvec(matmul(h1, a.w_down), a.b_down));
                Tensor<T> par = add_rowvec(matmul(mid, a.w_up), a.b_up);
                ff = add(ff, scale(par, adapter->scale));
            }
            h = layer_norm_rows(add(h1, ff), L.ln2_g, L.ln2_b);
        }
        return h;
    }

    // Unit-norm sentence vector: mean of final hidden states over non-[PAD]
    // positions, L2-normalized. With use_adapter=false any attached adapter
    // contributes exactly zero.
    Tensor<T> forward_embed(const std::vector<int>& ids, bool use_adapter) const {
        Tensor<T> h = encode_hidden(ids, use_adapter);
        return mse::num::l2_normalize_rows(mse::num::mean_rows(h));
    }

    // Logits at the masked positions against the tied token embedding matrix:
    // hidden . E^T + mlm_bias.
    Tensor<T> mlm_logits(const std::vector<int>& ids, const std::vector<int>& masked_positions,
                         bool use_adapter = false) const {
        if (masked_positions.empty())
            throw std::invalid_argument("mlm_logits: empty masked_positions");
        std::vector<int> kept_pos;
        Tensor<T> h = encode_hidden(ids, use_adapter, &kept_pos);
        std::vector<int> row_of(ids.size(), -1);
        for (std::size_t r = 0; r < kept_pos.size(); ++r)
            row_of[static_cast<std::size_t>(kept_pos[r])] = static_cast<int>(r);
        std::vector<int> rows;
        rows.reserve(masked_positions.size());
        for (int p : masked_positions) {
            if (p < 0 || p >= static_cast<int>(ids.size()) || row_of[static_cast<std::size_t>(p)] < 0)
                throw std::out_of_range("mlm_logits: masked position outside sequence");
            rows.push_back(row_of[static_cast<std::size_t>(p)]);
        }
        using namespace mse::num;
        return add_rowvec(matmul_nt(select_rows(h, rows), token_embeddings), mlm_bias);
    }

    std::size_t parameter_count() {
        std::size_t n = 0;
        for (Tensor<T>* t : parameters()) n += t->numel();
        return n;
    }

    // Deep copy: fresh buffers, no shared state with the source.
    EncoderModel clone() const {
        EncoderModel out = *this;
        auto& self = const_cast<EncoderModel&>(*this);
        auto src = self.named_parameters();
        auto dst = out.named_parameters();
        for (std::size_t i = 0; i < src.size(); ++i) {
            Tensor<T> fresh = Tensor<T>::zeros(src[i].second->shape);
            *fresh.data = *src[i].second->data;
            fresh.requires_grad = false;
            *dst[i].second = fresh;
        }
        return out;
    }
};

// Float-model persistence (binary weight file + JSON sidecar).
void save_model(const EncoderModel<float>& model, const std::string& path);
EncoderModel<float> load_model(const std::string& path);

}  // namespace mse::enc
