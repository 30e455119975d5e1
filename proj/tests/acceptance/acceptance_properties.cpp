// Acceptance: exact property suites. One PASS/FAIL line per criterion.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mselab/encoder/model.hpp"
#include "mselab/eval/harness.hpp"
#include "mselab/eval/spearman.hpp"
#include "mselab/numerics/adam.hpp"
#include "mselab/numerics/grad_check.hpp"
#include "mselab/numerics/kernels.hpp"
#include "mselab/synthlang/benchmark_gen.hpp"
#include "mselab/tokenizer/bpe.hpp"
#include "mselab/training/losses.hpp"
#include "mselab/training/trainer.hpp"
#include "mselab/transplant/focus.hpp"

using namespace mse;

namespace {

int g_failures = 0;

void report(int criterion, const std::string& what, bool ok, const std::string& detail) {
    std::printf("[%s] criterion %d: %s (%s)\n", ok ? "PASS" : "FAIL", criterion, what.c_str(),
                detail.c_str());
    if (!ok) ++g_failures;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3e", v);
    return buf;
}

// ---------------------------------------------------------------- criterion 1
void criterion_gradients() {
    enc::EncoderConfig cfg;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.d_model = 16;
    cfg.d_ff = 32;
    cfg.max_len = 24;
    cfg.vocab_size = 24;
    cfg.adapter_bottleneck = 8;
    num::RngState rng(2024);
    auto model = enc::EncoderModel<double>::random_init(cfg, rng);
    for (auto* p : model.parameters()) p->set_requires_grad(true);

    train::MaskedBatch batch;
    batch.corrupted = {{tok::kCls, tok::kMask, 9, tok::kMask, 15, tok::kSep},
                       {tok::kCls, 6, tok::kMask, tok::kSep}};
    batch.positions = {{1, 3}, {2}};
    batch.originals = {{7, 12}, {9}};
    const double mlm_err = num::grad_check(
        [&]() { return train::mlm_loss<double>(model, batch); }, model.parameters(), 1e-5);

    const std::vector<std::vector<int>> anchors = {{tok::kCls, 6, 8, 20, tok::kSep},
                                                   {tok::kCls, 10, 12, tok::kSep}};
    const std::vector<std::vector<int>> positives = {{tok::kCls, 6, 9, tok::kSep},
                                                     {tok::kCls, 10, 13, 21, tok::kSep}};
    const double mnrl_err = num::grad_check(
        [&]() {
            std::vector<num::Tensor<double>> a, p;
            for (const auto& ids : anchors) a.push_back(model.forward_embed(ids, false));
            for (const auto& ids : positives) p.push_back(model.forward_embed(ids, false));
            return train::mnrl_loss<double>(num::concat_rows(a), num::concat_rows(p), nullptr,
                                            20.0);
        },
        model.parameters(), 1e-5);

    report(1, "MLM and MNRL gradients match central differences at < 1e-4",
           mlm_err < 1e-4 && mnrl_err < 1e-4,
           "mlm " + fmt(mlm_err) + ", mnrl " + fmt(mnrl_err));
}

// ---------------------------------------------------------------- criterion 2
std::vector<double> simplex_projection_bruteforce(const std::vector<double>& z) {
    const std::size_t n = z.size();
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return z[a] > z[b]; });
    for (std::size_t k = 1; k <= n; ++k) {
        double sum = 0.0;
        for (std::size_t i = 0; i < k; ++i) sum += z[idx[i]];
        const double tau = (sum - 1.0) / static_cast<double>(k);
        std::vector<double> p(n, 0.0);
        bool feasible = true;
        for (std::size_t i = 0; i < k; ++i) {
            p[idx[i]] = z[idx[i]] - tau;
            if (p[idx[i]] < -1e-15) feasible = false;
        }
        if (!feasible) continue;
        bool kkt = true;  // complementary slackness: zeros need z_i <= tau
        for (std::size_t i = 0; i < n; ++i)
            if (p[i] == 0.0 && z[i] > tau + 1e-15) kkt = false;
        if (kkt) return p;
    }
    return {};
}

void criterion_sparsemax() {
    num::RngState rng(7);
    double worst = 0.0, worst_shift = 0.0;
    for (int t = 0; t < 1000; ++t) {
        const std::size_t n = 1 + rng.uniform_below(16);
        std::vector<double> z(n);
        for (double& v : z) v = rng.normal() * 2.5;
        const auto got = num::sparsemax(z);
        const auto want = simplex_projection_bruteforce(z);
        for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
        const double c = rng.normal() * 20.0;
        std::vector<double> shifted(z);
        for (double& v : shifted) v += c;
        const auto got2 = num::sparsemax(shifted);
        for (std::size_t i = 0; i < n; ++i)
            worst_shift = std::max(worst_shift, std::abs(got[i] - got2[i]));
    }
    report(2, "sparsemax equals brute-force simplex projection; shift invariant",
           worst < 1e-9 && worst_shift < 1e-9,
           "max dev " + fmt(worst) + ", shift dev " + fmt(worst_shift));
}

// ---------------------------------------------------------------- criterion 3
double spearman_bruteforce(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    auto ranks = [&](const std::vector<double>& v) {
        std::vector<double> r(n);
        for (std::size_t i = 0; i < n; ++i) {
            double less = 0, equal = 0;
            for (std::size_t j = 0; j < n; ++j) {
                if (v[j] < v[i]) ++less;
                if (v[j] == v[i]) ++equal;
            }
            r[i] = less + (equal + 1.0) / 2.0;
        }
        return r;
    };
    const auto rx = ranks(x), ry = ranks(y);
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

void criterion_spearman() {
    num::RngState rng(13);
    double worst = 0.0;
    int used = 0;
    while (used < 1000) {
        const std::size_t n = 3 + rng.uniform_below(60);
        std::vector<double> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = static_cast<double>(rng.uniform_below(10));  // ties likely
            y[i] = static_cast<double>(rng.uniform_below(10));
        }
        const bool cx = std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; });
        const bool cy = std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; });
        if (cx || cy) continue;
        worst = std::max(worst, std::abs(eval::spearman(x, y) - spearman_bruteforce(x, y)));
        ++used;
    }
    report(3, "spearman equals brute-force rank correlation with ties", worst < 1e-12,
           "max dev " + fmt(worst) + " over 1000 instances");
}

// ---------------------------------------------------------------- criterion 4
void criterion_focus() {
    // Small but real transplant: two languages over one concept inventory.
    synth::ConceptInventory inv;
    inv.n_groups = 60;
    inv.group_size = 2;
    inv.n_function = 10;
    auto family = synth::make_language_family(31, {"src", "tgt"}, inv, 0);
    num::RngState rng(33);
    auto src_lines = synth::build_mlm_corpus(inv, family[0], true, 400, 0.0, rng.derive("src"));
    auto tgt_lines = synth::build_mlm_corpus(inv, family[1], false, 400, 0.0, rng.derive("tgt"));
    std::vector<std::string> mixed = src_lines;
    for (auto& l : tgt_lines) mixed.push_back(l);

    auto src_tok = tok::train_bpe(mixed, 512);
    auto tgt_tok = tok::train_bpe(tgt_lines, 256);
    auto aux = focus::train_aux_embeddings(tgt_lines, src_tok, tgt_tok, 16, 5);
    auto overlap = focus::compute_overlap(src_tok.vocab, tgt_tok.vocab);
    num::RngState erng(35);
    auto src_emb = num::Tensor<float>::randn(
        {static_cast<std::size_t>(src_tok.vocab.size()), 32}, erng, 1.0f);
    auto res = focus::focus_init(src_emb, overlap, aux, tgt_tok.vocab);

    // Copy exactness, bit level.
    bool copies_ok = true;
    for (const auto& [token, sid] : overlap.pairs) {
        const auto tid = static_cast<std::size_t>(tgt_tok.vocab.lookup(token));
        for (std::size_t j = 0; j < 32; ++j)
            copies_ok = copies_ok && res.embeddings.at(tid, j) ==
                                         src_emb.at(static_cast<std::size_t>(sid), j);
    }

    // Independent route: recompute the sparsemax weights per non-overlap token
    // and verify nonnegativity, sum 1, and the convex-combination row.
    double max_src_norm = 0.0;
    for (std::size_t r = 0; r < src_emb.rows(); ++r) {
        double s = 0;
        for (std::size_t j = 0; j < 32; ++j)
            s += static_cast<double>(src_emb.at(r, j)) * src_emb.at(r, j);
        max_src_norm = std::max(max_src_norm, std::sqrt(s));
    }
    std::vector<std::pair<std::string, int>> anchors;
    for (int tid = 0; tid < tgt_tok.vocab.size(); ++tid) {
        const auto& t = tgt_tok.vocab.token_of[static_cast<std::size_t>(tid)];
        auto it = overlap.pairs.find(t);
        if (it != overlap.pairs.end()) anchors.emplace_back(t, it->second);
    }
    bool weights_ok = true, hull_ok = true, row_ok = true;
    std::set<std::string> fallbacks(res.fallback_tokens.begin(), res.fallback_tokens.end());
    for (int tid = 0; tid < tgt_tok.vocab.size(); ++tid) {
        const auto& token = tgt_tok.vocab.token_of[static_cast<std::size_t>(tid)];
        if (overlap.pairs.count(token) || fallbacks.count(token)) continue;
        const auto* tv = aux.find(token);
        std::vector<double> scores(anchors.size(), 0.0);
        double tn = 0;
        for (float x : *tv) tn += static_cast<double>(x) * x;
        tn = std::sqrt(tn);
        for (std::size_t a = 0; a < anchors.size(); ++a) {
            const auto* av = aux.find(anchors[a].first);
            double an = 0, dot = 0;
            for (std::size_t j = 0; j < av->size(); ++j) {
                an += static_cast<double>((*av)[j]) * (*av)[j];
                dot += static_cast<double>((*tv)[j]) * (*av)[j];
            }
            an = std::sqrt(an);
            scores[a] = (an == 0 || tn == 0) ? 0.0 : dot / (tn * an);
        }
        const auto w = num::sparsemax(scores);
        double sum = 0;
        for (double v : w) {
            weights_ok = weights_ok && v >= 0.0;
            sum += v;
        }
        weights_ok = weights_ok && std::abs(sum - 1.0) < 1e-6;
        // Reconstruct the row.
        std::vector<double> want(32, 0.0);
        for (std::size_t a = 0; a < anchors.size(); ++a) {
            if (w[a] == 0) continue;
            for (std::size_t j = 0; j < 32; ++j)
                want[j] += w[a] * src_emb.at(static_cast<std::size_t>(anchors[a].second), j);
        }
        double row_norm = 0;
        for (std::size_t j = 0; j < 32; ++j) {
            row_ok = row_ok &&
                     std::abs(want[j] - res.embeddings.at(static_cast<std::size_t>(tid), j)) < 1e-4;
            row_norm += static_cast<double>(res.embeddings.at(static_cast<std::size_t>(tid), j)) *
                        res.embeddings.at(static_cast<std::size_t>(tid), j);
        }
        hull_ok = hull_ok && std::sqrt(row_norm) <= max_src_norm + 1e-4;
    }
    report(4, "FOCUS: overlap rows copied bit-exactly; others convex combinations",
           copies_ok && weights_ok && hull_ok && row_ok,
           std::string("copies ") + (copies_ok ? "ok" : "BAD") + ", weights " +
               (weights_ok ? "ok" : "BAD") + ", hull " + (hull_ok ? "ok" : "BAD") + ", rows " +
               (row_ok ? "ok" : "BAD"));
}

// ---------------------------------------------------------------- criterion 5
void criterion_modularity() {
    synth::ConceptInventory inv;
    inv.n_groups = 60;
    inv.group_size = 2;
    inv.n_function = 10;
    auto family = synth::make_language_family(41, {"pv", "xx"}, inv, 0);
    auto concepts = synth::build_corpus(inv, 96, 0.5, num::RngState(43));
    auto corpus = synth::realize_corpus(concepts, family, 0, inv, 0.1, num::RngState(45));
    std::vector<std::string> lines;
    for (const auto& item : corpus.items)
        for (const auto& r : item) lines.push_back(r.anchor);
    auto tokenizer = tok::train_bpe(lines, 256);

    enc::EncoderConfig cfg;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.d_model = 32;
    cfg.d_ff = 64;
    cfg.max_len = 48;
    cfg.vocab_size = tokenizer.vocab.size();
    cfg.adapter_bottleneck = 16;
    num::RngState rng(47);
    auto pivot = enc::EncoderModel<float>::random_init(cfg, rng);
    auto target = enc::EncoderModel<float>::random_init(cfg, rng);

    // (c) zero-initialized adapter is an exact identity.
    num::RngState arng(49);
    target.attach_adapter(16, 4.0f, arng);
    const std::vector<int> probe = tok::encode(tokenizer, lines[0], 48);
    const auto with = target.forward_embed(probe, true);
    const auto without = target.forward_embed(probe, false);
    const bool identity_ok = *with.data == *without.data;

    // Mono eval before CLA.
    auto sts = synth::build_sts(inv, family, {0.0, 0.5, 1.0}, 30, 10, 51);
    auto embedders = [&]() {
        std::map<std::string, eval::EmbedFn> m;
        m["pv"] = [&](const std::string& t, bool a) {
            num::NoGradGuard g;
            return *pivot.forward_embed(tok::encode(tokenizer, t, 48), a).data;
        };
        m["xx"] = [&](const std::string& t, bool a) {
            num::NoGradGuard g;
            return *target.forward_embed(tok::encode(tokenizer, t, 48), a).data;
        };
        return m;
    }();
    const auto mono_before = eval::eval_sts(embedders, sts, eval::EvalMode::mono);

    // (a) CLA training leaves every non-adapter tensor bit-identical.
    std::vector<std::vector<float>> base_before;
    for (auto* p : target.base_parameters()) base_before.push_back(*p->data);
    std::vector<std::vector<float>> pivot_before;
    for (auto* p : pivot.parameters()) pivot_before.push_back(*p->data);

    train::TrainConfig tc;
    tc.batch_size = 8;
    tc.lr = 1e-3f;
    tc.adapter_lr = 2e-3f;
    tc.epochs = 1;
    tc.max_len = 48;
    tc.mlm_max_len = 48;
    std::vector<std::size_t> items;
    for (std::size_t i = 0; i < 80; ++i) items.push_back(i);
    train::run_cla_pair(pivot, tokenizer, target, tokenizer, corpus, 0, 1, tc, num::RngState(53),
                        items, {});

    bool frozen_ok = true;
    auto base_after = target.base_parameters();
    for (std::size_t i = 0; i < base_after.size(); ++i)
        frozen_ok = frozen_ok && *base_after[i]->data == base_before[i];
    auto pivot_after = pivot.parameters();
    for (std::size_t i = 0; i < pivot_after.size(); ++i)
        frozen_ok = frozen_ok && *pivot_after[i]->data == pivot_before[i];

    bool adapter_moved = false;
    for (auto& l : target.adapter->layers)
        for (float v : l.w_up.v()) adapter_moved = adapter_moved || v != 0.0f;

    // (b) mono-mode eval bit-identical before vs after CLA.
    const auto mono_after = eval::eval_sts(embedders, sts, eval::EvalMode::mono);
    bool eval_ok = mono_before.scores.size() == mono_after.scores.size();
    for (std::size_t i = 0; eval_ok && i < mono_before.scores.size(); ++i)
        eval_ok = mono_before.scores[i].key == mono_after.scores[i].key &&
                  mono_before.scores[i].value == mono_after.scores[i].value;

    report(5, "modularity: frozen base bit-identical, mono eval unchanged, zero adapter = identity",
           identity_ok && frozen_ok && adapter_moved && eval_ok,
           std::string("identity ") + (identity_ok ? "ok" : "BAD") + ", freeze " +
               (frozen_ok ? "ok" : "BAD") + ", adapter trained " +
               (adapter_moved ? "ok" : "BAD") + ", mono eval " + (eval_ok ? "ok" : "BAD"));
}

// ---------------------------------------------------------------- criterion 7
void criterion_oracle() {
    synth::ConceptInventory inv;
    inv.n_groups = 150;
    inv.group_size = 2;
    inv.n_function = 12;
    auto family = synth::make_language_family(61, {"l0", "l1", "l2"}, inv, 0);
    auto sts = synth::build_sts(inv, family, {0.0, 0.25, 0.5, 0.75, 1.0}, 60, 20, 63);
    auto mcqa = synth::build_mcqa(inv, family, 150, 150, 65);

    // One-hot-over-content-groups embedder keyed by text.
    std::map<std::string, std::vector<float>> table;
    auto vec_of = [&](const std::vector<int>& groups) {
        std::vector<float> v(static_cast<std::size_t>(inv.n_groups), 0.0f);
        for (int g : groups) v[static_cast<std::size_t>(g)] = 1.0f;
        return v;
    };
    for (const auto& p : sts.pairs) {
        table[p.text_a] = vec_of(p.groups_a);
        table[p.text_b] = vec_of(p.groups_b);
    }
    std::map<std::string, eval::EmbedFn> embedders;
    for (const auto& l : {"l0", "l1", "l2"})
        embedders[l] = [&table](const std::string& t, bool) { return table.at(t); };

    bool sts_ok = true;
    double worst = 100.0;
    for (auto mode : {eval::EvalMode::mono, eval::EvalMode::cross}) {
        const auto res = eval::eval_sts(embedders, sts, mode);
        sts_ok = sts_ok && !res.scores.empty();
        for (const auto& s : res.scores) {
            worst = std::min(worst, s.value);
            sts_ok = sts_ok && std::abs(s.value - 100.0) < 1e-9;
        }
    }

    // MCQA oracle: group-Jaccard solver on every item.
    long correct = 0;
    for (const auto& item : mcqa.items) {
        std::set<int> pg(item.passage_groups.begin(), item.passage_groups.end());
        int best = -1;
        double best_j = -1;
        for (int a = 0; a < 4; ++a) {
            const auto& qa = item.qa_groups[static_cast<std::size_t>(a)];
            std::set<int> qg(qa.begin(), qa.end());
            std::size_t inter = 0;
            for (int g : qg) inter += pg.count(g);
            const double j =
                static_cast<double>(inter) / static_cast<double>(qg.size() + pg.size() - inter);
            if (j > best_j) {
                best_j = j;
                best = a;
            }
        }
        if (best == item.correct) ++correct;
    }
    const bool mcqa_ok = correct == static_cast<long>(mcqa.items.size());

    report(7, "concept-overlap oracle: Spearman 100 on STS, accuracy 1.0 on MCQA",
           sts_ok && mcqa_ok,
           "min sts " + fmt(worst) + ", mcqa " + std::to_string(correct) + "/" +
               std::to_string(mcqa.items.size()));
}

}  // namespace

int main() {
    std::printf("acceptance: exact property suites\n");
    criterion_gradients();
    criterion_sparsemax();
    criterion_spearman();
    criterion_focus();
    criterion_modularity();
    criterion_oracle();
    if (g_failures == 0) {
        std::printf("all property criteria passed\n");
        return 0;
    }
    std::printf("%d property criteria FAILED\n", g_failures);
    return 1;
}
