#include "mselab/training/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mselab/numerics/adam.hpp"
#include "mselab/training/losses.hpp"

namespace mse::train {

void TrainConfig::validate() const {
    if (batch_size < 2)
        throw std::invalid_argument("train config: batch_size must be >= 2 (in-batch negatives)");
    if (lr <= 0 || adapter_lr <= 0 || epochs <= 0 || max_len < 2 || mlm_max_len < 2 ||
        mnrl_scale <= 0 || mask_prob <= 0 || clip_norm <= 0)
        throw std::invalid_argument("train config: all fields must be positive");
}

Regime parse_regime(const std::string& s) {
    if (s == "single_m") return Regime::single_m;
    if (s == "single_c") return Regime::single_c;
    if (s == "single_mc") return Regime::single_mc;
    if (s == "multi_m") return Regime::multi_m;
    if (s == "multi_mc") return Regime::multi_mc;
    throw std::invalid_argument("unknown regime: " + s);
}

std::string regime_name(Regime r) {
    switch (r) {
        case Regime::single_m: return "single_m";
        case Regime::single_c: return "single_c";
        case Regime::single_mc: return "single_mc";
        case Regime::multi_m: return "multi_m";
        case Regime::multi_mc: return "multi_mc";
    }
    return "?";
}

BaseVariant parse_base_variant(const std::string& s) {
    if (s == "mlm_only") return BaseVariant::mlm_only;
    if (s == "mlm_plus_contrastive") return BaseVariant::mlm_plus_contrastive;
    throw std::invalid_argument("unknown base variant: " + s);
}

std::string base_variant_name(BaseVariant v) {
    return v == BaseVariant::mlm_only ? "mlm_only" : "mlm_plus_contrastive";
}

AlignStrategy parse_align_strategy(const std::string& s) {
    if (s == "bilingual_to_pivot") return AlignStrategy::bilingual_to_pivot;
    if (s == "all_pairs") return AlignStrategy::all_pairs;
    if (s == "all_pairs_incl_pivot") return AlignStrategy::all_pairs_incl_pivot;
    throw std::invalid_argument("unknown alignment strategy: " + s);
}

std::string align_strategy_name(AlignStrategy s) {
    switch (s) {
        case AlignStrategy::bilingual_to_pivot: return "bilingual_to_pivot";
        case AlignStrategy::all_pairs: return "all_pairs";
        case AlignStrategy::all_pairs_incl_pivot: return "all_pairs_incl_pivot";
    }
    return "?";
}

namespace {

using enc::EncoderModel;
using num::RngState;
using num::Tensor;

std::vector<std::size_t> shuffled(std::vector<std::size_t> v, RngState& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = rng.uniform_below(i);
        std::swap(v[i - 1], v[j]);
    }
    return v;
}

// Per-language encoded cache of the realized corpus.
struct EncodedCorpus {
    // [lang][item] -> ids; hard empty if absent.
    std::vector<std::vector<std::vector<int>>> anchor, positive, hard;

    static EncodedCorpus build(const synth::RealizedCorpus& corpus, const tok::BpeModel& tokenizer,
                               int max_len, const std::vector<std::size_t>& langs) {
        EncodedCorpus out;
        const std::size_t n_langs = corpus.langs.size();
        out.anchor.resize(n_langs);
        out.positive.resize(n_langs);
        out.hard.resize(n_langs);
        for (std::size_t l : langs) {
            out.anchor[l].resize(corpus.items.size());
            out.positive[l].resize(corpus.items.size());
            out.hard[l].resize(corpus.items.size());
            for (std::size_t i = 0; i < corpus.items.size(); ++i) {
                const synth::RealizedItem& item = corpus.items[i][l];
                out.anchor[l][i] = tok::encode(tokenizer, item.anchor, max_len);
                out.positive[l][i] = tok::encode(tokenizer, item.positive, max_len);
                if (!item.hard.empty()) out.hard[l][i] = tok::encode(tokenizer, item.hard, max_len);
            }
        }
        return out;
    }
};

// One contrastive batch at the id level.
struct ContrastiveBatch {
    std::vector<const std::vector<int>*> anchors;
    std::vector<const std::vector<int>*> positives;
    std::vector<const std::vector<int>*> hards;
    std::vector<std::size_t> anchor_langs, positive_langs;  // conformance checks
};

Tensor<float> embed_batch(const EncoderModel<float>& model,
                          const std::vector<const std::vector<int>*>& seqs, bool use_adapter) {
    std::vector<Tensor<float>> rows;
    rows.reserve(seqs.size());
    for (const auto* ids : seqs) rows.push_back(model.forward_embed(*ids, use_adapter));
    return rows.size() == 1 ? rows[0] : num::concat_rows(rows);
}

Tensor<float> contrastive_loss(const EncoderModel<float>& model, const ContrastiveBatch& batch,
                               float scale) {
    Tensor<float> a = embed_batch(model, batch.anchors, false);
    Tensor<float> p = embed_batch(model, batch.positives, false);
    if (batch.hards.empty()) return mnrl_loss<float>(a, p, nullptr, scale);
    Tensor<float> h = embed_batch(model, batch.hards, false);
    return mnrl_loss<float>(a, p, &h, scale);
}

double heldout_mnrl(const EncoderModel<float>& model, const ContrastiveBatch& batch, float scale) {
    num::NoGradGuard guard;
    return static_cast<double>(contrastive_loss(model, batch, scale).scalar());
}

// Builds one batch per the regime's sampling quote. For monolingual_batches
// one language is drawn per batch; for crosslingual_pairs each sentence draws
// its language independently.
ContrastiveBatch make_single_batch(const EncodedCorpus& enc_corpus,
                                   const std::vector<std::size_t>& items,
                                   const std::vector<std::size_t>& langs, SingleMode mode,
                                   RngState& rng) {
    ContrastiveBatch batch;
    const std::size_t batch_lang = langs[rng.uniform_below(langs.size())];
    for (std::size_t item : items) {
        std::size_t la = batch_lang, lp = batch_lang, lh = batch_lang;
        if (mode == SingleMode::crosslingual_pairs) {
            la = langs[rng.uniform_below(langs.size())];
            lp = langs[rng.uniform_below(langs.size())];
            lh = langs[rng.uniform_below(langs.size())];
        }
        batch.anchors.push_back(&enc_corpus.anchor[la][item]);
        batch.positives.push_back(&enc_corpus.positive[lp][item]);
        batch.anchor_langs.push_back(la);
        batch.positive_langs.push_back(lp);
        if (!enc_corpus.hard[lh][item].empty()) batch.hards.push_back(&enc_corpus.hard[lh][item]);
    }
    if (mode == SingleMode::monolingual_batches) {
        for (std::size_t l : batch.anchor_langs)
            if (l != batch_lang) throw std::logic_error("single_m batch mixed languages");
        for (std::size_t l : batch.positive_langs)
            if (l != batch_lang) throw std::logic_error("single_m batch mixed languages");
    }
    return batch;
}

ContrastiveBatch make_mono_batch(const EncodedCorpus& enc_corpus,
                                 const std::vector<std::size_t>& items, std::size_t lang) {
    ContrastiveBatch batch;
    for (std::size_t item : items) {
        batch.anchors.push_back(&enc_corpus.anchor[lang][item]);
        batch.positives.push_back(&enc_corpus.positive[lang][item]);
        batch.anchor_langs.push_back(lang);
        batch.positive_langs.push_back(lang);
        if (!enc_corpus.hard[lang][item].empty())
            batch.hards.push_back(&enc_corpus.hard[lang][item]);
    }
    return batch;
}

// Deterministic held-out batch mirroring the regime's batch construction:
// languages cycle by item order, and in cross mode the two sides cycle out of
// phase so every pair is cross-lingual.
ContrastiveBatch make_heldout_batch(const EncodedCorpus& enc_corpus,
                                    const std::vector<std::size_t>& items,
                                    const std::vector<std::size_t>& langs, SingleMode mode) {
    ContrastiveBatch batch;
    for (std::size_t k = 0; k < items.size(); ++k) {
        const std::size_t item = items[k];
        const std::size_t la = langs[k % langs.size()];
        const std::size_t lp = mode == SingleMode::crosslingual_pairs && langs.size() > 1
                                   ? langs[(k + 1) % langs.size()]
                                   : la;
        batch.anchors.push_back(&enc_corpus.anchor[la][item]);
        batch.positives.push_back(&enc_corpus.positive[lp][item]);
        batch.anchor_langs.push_back(la);
        batch.positive_langs.push_back(lp);
    }
    return batch;
}

struct Optimizer {
    std::vector<Tensor<float>*> params;
    num::AdamState<float> state;

    Optimizer(std::vector<Tensor<float>*> p, float lr) : params(std::move(p)) {
        state.lr = lr;
        state.init(params);
    }
    void zero_grad() {
        for (auto* p : params) p->zero_grad();
    }
    void step(double clip) {
        num::clip_global_norm(params, clip);
        num::adam_step(params, state);
    }
};

PhaseResult contrastive_phase(EncoderModel<float>& model, const EncodedCorpus& enc_corpus,
                              const std::vector<std::size_t>& langs, SingleMode mode,
                              bool mono_fixed_lang, std::size_t fixed_lang,
                              const TrainConfig& cfg, RngState rng,
                              const std::vector<std::size_t>& train_items,
                              const std::vector<std::size_t>& heldout_items) {
    cfg.validate();
    model.set_training_mode(true);
    Optimizer opt(model.trainable_parameters(), cfg.lr);

    const std::vector<std::size_t> heldout_langs =
        mono_fixed_lang ? std::vector<std::size_t>{fixed_lang} : langs;
    ContrastiveBatch heldout;
    if (!heldout_items.empty())
        heldout = make_heldout_batch(enc_corpus, heldout_items, heldout_langs, mode);

    PhaseResult res;
    if (!heldout_items.empty()) res.initial_heldout = heldout_mnrl(model, heldout, cfg.mnrl_scale);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const std::vector<std::size_t> order = shuffled(train_items, rng);
        for (std::size_t off = 0; off + 2 <= order.size();
             off += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t take =
                std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), order.size() - off);
            if (take < 2) break;
            std::vector<std::size_t> items(order.begin() + static_cast<std::ptrdiff_t>(off),
                                           order.begin() + static_cast<std::ptrdiff_t>(off + take));
            ContrastiveBatch batch =
                mono_fixed_lang ? make_mono_batch(enc_corpus, items, fixed_lang)
                                : make_single_batch(enc_corpus, items, langs, mode, rng);
            opt.zero_grad();
            Tensor<float> loss = contrastive_loss(model, batch, cfg.mnrl_scale);
            num::backward(loss);
            opt.step(cfg.clip_norm);
            res.steps += 1;
        }
    }

    if (!heldout_items.empty()) res.final_heldout = heldout_mnrl(model, heldout, cfg.mnrl_scale);
    model.set_training_mode(false);
    return res;
}

}  // namespace

// Greedy sentence packing: whole encoded sentences are joined with [SEP]
// until the next one would overflow max_len. Packing trains every position
// row and keeps long inputs in-distribution.
std::vector<std::vector<int>> pack_sequences(const tok::BpeModel& tokenizer,
                                             const std::vector<std::string>& lines, int max_len) {
    std::vector<std::vector<int>> packed;
    std::vector<int> cur;
    for (const auto& line : lines) {
        const std::vector<int> ids = tok::encode(tokenizer, line, max_len);
        // Strip [CLS] ... [SEP] wrapper; keep the payload.
        std::vector<int> payload(ids.begin() + 1, ids.end() - 1);
        const std::size_t extra = payload.size() + 1;  // + separating [SEP]
        // Appending must leave room for the wrapping [CLS] and final [SEP].
        if (!cur.empty() && cur.size() + extra + 2 > static_cast<std::size_t>(max_len)) {
            cur.push_back(tok::kSep);
            std::vector<int> seq = {tok::kCls};
            seq.insert(seq.end(), cur.begin(), cur.end());
            packed.push_back(std::move(seq));
            cur.clear();
        }
        if (!cur.empty()) cur.push_back(tok::kSep);
        cur.insert(cur.end(), payload.begin(), payload.end());
    }
    if (!cur.empty()) {
        cur.push_back(tok::kSep);
        std::vector<int> seq = {tok::kCls};
        seq.insert(seq.end(), cur.begin(), cur.end());
        packed.push_back(std::move(seq));
    }
    return packed;
}

PhaseResult run_mlm(EncoderModel<float>& model, const tok::BpeModel& tokenizer,
                    const std::vector<std::string>& lines, const TrainConfig& cfg, int steps,
                    RngState rng, const std::vector<std::string>& heldout_lines) {
    cfg.validate();
    if (lines.empty()) throw std::invalid_argument("run_mlm: empty corpus");

    const std::vector<std::vector<int>> encoded =
        pack_sequences(tokenizer, lines, std::min(cfg.mlm_max_len, model.config.max_len));

    // Fixed held-out masked batch (same mask before and after).
    MaskedBatch heldout;
    bool have_heldout = false;
    if (!heldout_lines.empty()) {
        std::vector<std::vector<int>> hids = pack_sequences(
            tokenizer, heldout_lines, std::min(cfg.mlm_max_len, model.config.max_len));
        if (hids.size() > 64) hids.resize(64);
        RngState hrng = rng.derive("mlm-heldout-mask");
        heldout = mask_batch(hids, cfg.mask_prob, hrng, model.config.vocab_size);
        have_heldout = true;
    }
    auto heldout_loss = [&]() {
        num::NoGradGuard guard;
        return static_cast<double>(mlm_loss<float>(model, heldout).scalar());
    };

    model.set_training_mode(true);
    Optimizer opt(model.trainable_parameters(), cfg.lr);
    PhaseResult res;
    if (have_heldout) res.initial_heldout = heldout_loss();

    std::vector<std::vector<int>> batch_ids(static_cast<std::size_t>(cfg.batch_size));
    for (int step = 0; step < steps; ++step) {
        for (auto& ids : batch_ids) ids = encoded[rng.uniform_below(encoded.size())];
        MaskedBatch masked = mask_batch(batch_ids, cfg.mask_prob, rng, model.config.vocab_size);
        opt.zero_grad();
        Tensor<float> loss = mlm_loss<float>(model, masked);
        num::backward(loss);
        opt.step(cfg.clip_norm);
        res.steps += 1;
    }

    if (have_heldout) res.final_heldout = heldout_loss();
    model.set_training_mode(false);
    return res;
}

PhaseResult run_contrastive_single(EncoderModel<float>& model, const tok::BpeModel& tokenizer,
                                   const synth::RealizedCorpus& corpus, SingleMode mode,
                                   const TrainConfig& cfg, RngState rng,
                                   const std::vector<std::size_t>& train_items,
                                   const std::vector<std::size_t>& heldout_items) {
    std::vector<std::size_t> langs(corpus.langs.size());
    for (std::size_t i = 0; i < langs.size(); ++i) langs[i] = i;
    const EncodedCorpus enc_corpus = EncodedCorpus::build(corpus, tokenizer, cfg.max_len, langs);
    return contrastive_phase(model, enc_corpus, langs, mode, false, 0, cfg, rng, train_items,
                             heldout_items);
}

PhaseResult run_contrastive_mono(EncoderModel<float>& model, const tok::BpeModel& tokenizer,
                                 const synth::RealizedCorpus& corpus, std::size_t lang_index,
                                 const TrainConfig& cfg, num::RngState rng,
                                 const std::vector<std::size_t>& train_items,
                                 const std::vector<std::size_t>& heldout_items) {
    if (lang_index >= corpus.langs.size())
        throw std::invalid_argument("run_contrastive_mono: language index out of range");
    const EncodedCorpus enc_corpus =
        EncodedCorpus::build(corpus, tokenizer, cfg.max_len, {lang_index});
    return contrastive_phase(model, enc_corpus, {lang_index}, SingleMode::monolingual_batches,
                             true, lang_index, cfg, rng, train_items, heldout_items);
}

PhaseResult run_cla_pair(EncoderModel<float>& model_a, const tok::BpeModel& tok_a,
                         EncoderModel<float>& model_b, const tok::BpeModel& tok_b,
                         const synth::RealizedCorpus& corpus, std::size_t lang_a,
                         std::size_t lang_b, const TrainConfig& cfg, num::RngState rng,
                         const std::vector<std::size_t>& train_items,
                         const std::vector<std::size_t>& heldout_items) {
    cfg.validate();
    const bool train_a = model_a.adapter.has_value();
    const bool train_b = model_b.adapter.has_value();
    if (!train_a && !train_b)
        throw std::invalid_argument("train_cla: neither side has an adapter");
    if ((train_a && !model_a.frozen_base) || (train_b && !model_b.frozen_base))
        throw std::invalid_argument("train_cla: adapter-bearing model must have a frozen base");

    // Encode both sides once.
    const EncodedCorpus enc_a = EncodedCorpus::build(corpus, tok_a, cfg.max_len, {lang_a});
    const EncodedCorpus enc_b = EncodedCorpus::build(corpus, tok_b, cfg.max_len, {lang_b});

    auto gather = [&](const EncodedCorpus& ec, std::size_t lang,
                      const std::vector<std::size_t>& items, bool anchors_side) {
        std::vector<const std::vector<int>*> out;
        for (std::size_t item : items)
            out.push_back(anchors_side ? &ec.anchor[lang][item] : &ec.positive[lang][item]);
        return out;
    };
    auto gather_hard = [&](const EncodedCorpus& ec, std::size_t lang,
                           const std::vector<std::size_t>& items) {
        std::vector<const std::vector<int>*> out;
        for (std::size_t item : items)
            if (!ec.hard[lang][item].empty()) out.push_back(&ec.hard[lang][item]);
        return out;
    };

    auto bidirectional_loss = [&](const std::vector<std::size_t>& items) {
        // Side A provides anchor realizations, side B the positives; hard
        // negatives join the candidate pool of whichever side is "candidates".
        auto a_seqs = gather(enc_a, lang_a, items, true);
        auto b_seqs = gather(enc_b, lang_b, items, false);
        Tensor<float> a_emb, b_emb;
        if (train_a) {
            a_emb = embed_batch(model_a, a_seqs, true);
        } else {
            num::NoGradGuard guard;
            a_emb = embed_batch(model_a, a_seqs, false);
        }
        if (train_b) {
            b_emb = embed_batch(model_b, b_seqs, true);
        } else {
            num::NoGradGuard guard;
            b_emb = embed_batch(model_b, b_seqs, false);
        }
        auto hard_b_seqs = gather_hard(enc_b, lang_b, items);
        auto hard_a_seqs = gather_hard(enc_a, lang_a, items);
        Tensor<float> loss_ab, loss_ba;
        if (!hard_b_seqs.empty()) {
            Tensor<float> hb;
            if (train_b) {
                hb = embed_batch(model_b, hard_b_seqs, true);
            } else {
                num::NoGradGuard guard;
                hb = embed_batch(model_b, hard_b_seqs, false);
            }
            loss_ab = mnrl_loss<float>(a_emb, b_emb, &hb, cfg.mnrl_scale);
        } else {
            loss_ab = mnrl_loss<float>(a_emb, b_emb, nullptr, cfg.mnrl_scale);
        }
        if (!hard_a_seqs.empty()) {
            Tensor<float> ha;
            if (train_a) {
                ha = embed_batch(model_a, hard_a_seqs, true);
            } else {
                num::NoGradGuard guard;
                ha = embed_batch(model_a, hard_a_seqs, false);
            }
            loss_ba = mnrl_loss<float>(b_emb, a_emb, &ha, cfg.mnrl_scale);
        } else {
            loss_ba = mnrl_loss<float>(b_emb, a_emb, nullptr, cfg.mnrl_scale);
        }
        return num::scale(num::add(loss_ab, loss_ba), 0.5f);
    };

    if (train_a) model_a.set_training_mode(true);
    if (train_b) model_b.set_training_mode(true);
    std::vector<Tensor<float>*> params;
    if (train_a)
        for (auto* p : model_a.trainable_parameters()) params.push_back(p);
    if (train_b)
        for (auto* p : model_b.trainable_parameters()) params.push_back(p);
    Optimizer opt(params, cfg.adapter_lr);

    auto heldout_loss = [&]() {
        num::NoGradGuard guard;
        return static_cast<double>(bidirectional_loss(heldout_items).scalar());
    };

    PhaseResult res;
    if (!heldout_items.empty()) res.initial_heldout = heldout_loss();

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const std::vector<std::size_t> order = shuffled(train_items, rng);
        for (std::size_t off = 0; off + 2 <= order.size();
             off += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t take =
                std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), order.size() - off);
            if (take < 2) break;
            std::vector<std::size_t> items(order.begin() + static_cast<std::ptrdiff_t>(off),
                                           order.begin() + static_cast<std::ptrdiff_t>(off + take));
            opt.zero_grad();
            Tensor<float> loss = bidirectional_loss(items);
            num::backward(loss);
            opt.step(cfg.clip_norm);
            res.steps += 1;
        }
    }

    if (!heldout_items.empty()) res.final_heldout = heldout_loss();
    if (train_a) model_a.set_training_mode(false);
    if (train_b) model_b.set_training_mode(false);
    return res;
}

enc::EncoderModel<float> pretrain_base(const enc::EncoderConfig& enc_cfg,
                                       const tok::BpeModel& tokenizer,
                                       const std::vector<std::string>& mixed_lines,
                                       const synth::RealizedCorpus& pairs, BaseVariant variant,
                                       const TrainConfig& mlm_cfg, int mlm_steps,
                                       const TrainConfig& contrastive_cfg, num::RngState rng) {
    if (mixed_lines.empty()) throw std::invalid_argument("pretrain_base: empty corpus");
    RngState init_rng = rng.derive("base-init");
    EncoderModel<float> model = EncoderModel<float>::random_init(enc_cfg, init_rng);
    run_mlm(model, tokenizer, mixed_lines, mlm_cfg, mlm_steps, rng.derive("base-mlm"), {});
    if (variant == BaseVariant::mlm_plus_contrastive && contrastive_cfg.epochs > 0) {
        std::vector<std::size_t> items(pairs.items.size());
        for (std::size_t i = 0; i < items.size(); ++i) items[i] = i;
        RngState crng = rng.derive("base-contrastive");
        run_contrastive_single(model, tokenizer, pairs, SingleMode::crosslingual_pairs,
                               contrastive_cfg, crng, items, {});
    }
    model.phase = "pretrained";
    return model;
}

AlignmentPlan plan_alignment(const std::vector<std::string>& langs, const std::string& pivot,
                             AlignStrategy strategy) {
    bool has_pivot = false;
    for (const auto& l : langs) has_pivot = has_pivot || (l == pivot);
    if (!has_pivot) throw std::invalid_argument("plan_alignment: pivot not in language list");

    AlignmentPlan plan;
    switch (strategy) {
        case AlignStrategy::bilingual_to_pivot:
            for (const auto& l : langs) {
                if (l == pivot) continue;
                plan.jobs.emplace_back(pivot, l);
                plan.adapter_langs.push_back(l);
            }
            break;
        case AlignStrategy::all_pairs:
        case AlignStrategy::all_pairs_incl_pivot:
            for (std::size_t i = 0; i < langs.size(); ++i)
                for (std::size_t j = i + 1; j < langs.size(); ++j)
                    plan.jobs.emplace_back(langs[i], langs[j]);
            for (const auto& l : langs)
                if (l != pivot || strategy == AlignStrategy::all_pairs_incl_pivot)
                    plan.adapter_langs.push_back(l);
            break;
    }
    return plan;
}

}  // namespace mse::train
