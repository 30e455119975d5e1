#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>

#include "mselab/eval/harness.hpp"
#include "mselab/eval/spearman.hpp"
#include "mselab/numerics/rng.hpp"
#include "mselab/synthlang/benchmark_gen.hpp"

using namespace mse;
using namespace mse::eval;

namespace {

// O(n^2) rank-correlation oracle with mean ranks for ties.
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

synth::ConceptInventory small_inv() {
    synth::ConceptInventory inv;
    inv.n_groups = 60;
    inv.group_size = 2;
    inv.n_function = 10;
    return inv;
}

// One-hot-over-content-groups embedder keyed by exact text.
std::map<std::string, EmbedFn> oracle_embedders(const synth::StsBenchmark& bench,
                                                const std::vector<std::string>& langs,
                                                int n_groups) {
    auto table = std::make_shared<std::map<std::string, std::vector<float>>>();
    auto vec_of = [&](const std::vector<int>& groups) {
        std::vector<float> v(static_cast<std::size_t>(n_groups), 0.0f);
        for (int g : groups) v[static_cast<std::size_t>(g)] = 1.0f;
        return v;
    };
    for (const auto& p : bench.pairs) {
        (*table)[p.text_a] = vec_of(p.groups_a);
        (*table)[p.text_b] = vec_of(p.groups_b);
    }
    std::map<std::string, EmbedFn> embedders;
    for (const auto& l : langs)
        embedders[l] = [table](const std::string& text, bool) { return table->at(text); };
    return embedders;
}

}  // namespace

TEST_CASE("spearman hand values") {
    CHECK(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{3, 2, 1}) ==
          doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{1, 3, 2}) ==
          doctest::Approx(0.5).epsilon(1e-12));
    CHECK(spearman(std::vector<double>{1, 1, 2}, std::vector<double>{1, 1, 2}) ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_WITH_AS(spearman(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}),
                         doctest::Contains("undefined correlation"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(spearman(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}),
                         doctest::Contains("undefined correlation"), std::invalid_argument);
}

TEST_CASE("spearman matches the brute-force oracle on 1000 random instances with ties") {
    num::RngState rng(83);
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
        const std::size_t n = 3 + rng.uniform_below(40);
        std::vector<double> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            // Coarse grid so ties are frequent.
            x[i] = static_cast<double>(rng.uniform_below(8));
            y[i] = static_cast<double>(rng.uniform_below(8));
        }
        bool degenerate = true;
        for (std::size_t i = 1; i < n; ++i)
            if (x[i] != x[0] || y[i] != y[0]) degenerate = false;
        if (degenerate ||
            std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; }) ||
            std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; })) {
            continue;
        }
        const double got = spearman(x, y);
        const double want = spearman_bruteforce(x, y);
        worst = std::max(worst, std::abs(got - want));
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("eval_sts: oracle embedder scores 100, symmetric pairs merge, modes split") {
    const auto inv = small_inv();
    const std::vector<std::string> lang_ids = {"l0", "l1", "l2"};
    auto family = synth::make_language_family(91, lang_ids, inv, 0);
    auto bench = synth::build_sts(inv, family, {0.0, 0.25, 0.5, 0.75, 1.0}, 25, 10, 93);
    auto embedders = oracle_embedders(bench, lang_ids, inv.n_groups);

    const auto mono = eval_sts(embedders, bench, EvalMode::mono);
    REQUIRE(mono.scores.size() == 3);  // one row per language
    for (const auto& s : mono.scores) CHECK(s.value == doctest::Approx(100.0).epsilon(1e-9));

    const auto cross = eval_sts(embedders, bench, EvalMode::cross);
    REQUIRE(cross.scores.size() == 3);  // unordered pairs of 3 languages
    for (const auto& s : cross.scores) {
        CHECK(s.value == doctest::Approx(100.0).epsilon(1e-9));
        CHECK(s.key.find('-') != std::string::npos);
    }

    // Missing language model is an error.
    std::map<std::string, EmbedFn> partial = embedders;
    partial.erase("l2");
    CHECK_THROWS_WITH_AS(eval_sts(partial, bench, EvalMode::mono),
                         doctest::Contains("no model"), std::invalid_argument);
}

TEST_CASE("eval_sts: random embedder stays near zero across seeds") {
    const auto inv = small_inv();
    const std::vector<std::string> lang_ids = {"l0"};
    auto family = synth::make_language_family(95, lang_ids, inv, 0);
    auto bench = synth::build_sts(inv, family, {0.0, 0.25, 0.5, 0.75, 1.0}, 500, 0, 97);

    for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
        std::map<std::string, EmbedFn> embedders;
        // Hash-of-text embedder: independent of gold by construction.
        embedders["l0"] = [seed](const std::string& text, bool) {
            num::RngState h(num::RngState(seed).derive(text).seed);
            std::vector<float> v(16);
            for (auto& x : v) x = static_cast<float>(h.normal());
            return v;
        };
        const auto res = eval_sts(embedders, bench, EvalMode::mono);
        REQUIRE(res.scores.size() == 1);
        CHECK(std::abs(res.scores[0].value) < 15.0);
    }
}

TEST_CASE("eval_sts skips constant-gold groups with a note") {
    synth::StsBenchmark bench;
    for (int i = 0; i < 5; ++i) {
        synth::StsPair p;
        p.lang_a = p.lang_b = "l0";
        p.text_a = "a" + std::to_string(i);
        p.text_b = "b" + std::to_string(i);
        p.gold = 0.5;  // constant
        bench.pairs.push_back(p);
    }
    std::map<std::string, EmbedFn> embedders;
    embedders["l0"] = [](const std::string& text, bool) {
        std::vector<float> v(4, 0.0f);
        v[text.size() % 4] = 1.0f;
        return v;
    };
    const auto res = eval_sts(embedders, bench, EvalMode::mono);
    CHECK(res.scores.empty());
    REQUIRE(res.notes.size() == 1);
    CHECK(res.notes[0].find("degenerate") != std::string::npos);
}

TEST_CASE("eval_mcqa: fixtures, tie-break, chance level") {
    // Hand-built fixture: the correct QA pair equals the passage vector.
    synth::McqaBenchmark fixture;
    for (int i = 0; i < 2; ++i) {
        synth::McqaItem it;
        it.lang_passage = it.lang_qa = "l0";
        it.passage = "P" + std::to_string(i);
        it.question = "Q";
        it.answers = {"A0", "A1", "A2", "A3"};
        it.correct = i;  // item 0 -> answer 0, item 1 -> answer 1
        fixture.items.push_back(it);
    }
    std::map<std::string, EmbedFn> embedders;
    embedders["l0"] = [](const std::string& text, bool) {
        // Passages are axis 0; "Q A0" matches axis 0, others orthogonal.
        std::vector<float> v(8, 0.0f);
        if (text == "P0") v[0] = 1;
        else if (text == "P1") v[1] = 1;
        else if (text == "Q A0") v[0] = 1;
        else if (text == "Q A1") v[2] = 1;
        else if (text == "Q A2") v[3] = 1;
        else v[4] = 1;
        return v;
    };
    // Item 0: QA0 = passage -> correct. Item 1: all QA orthogonal to P1 -> tie
    // -> lowest index 0 predicted, but correct is 1 -> wrong. Accuracy 0.5.
    const auto res = eval_mcqa(embedders, fixture, EvalMode::mono);
    REQUIRE(res.scores.size() == 1);
    CHECK(res.scores[0].value == doctest::Approx(0.5));

    // Random embedder on 900 generated items: accuracy within 0.25 +/- 0.05.
    const auto inv = [] {
        synth::ConceptInventory inv;
        inv.n_groups = 150;
        inv.group_size = 2;
        inv.n_function = 12;
        return inv;
    }();
    auto family = synth::make_language_family(99, {"l0", "l1"}, inv, 0);
    auto bench = synth::build_mcqa(inv, family, 900, 0, 101);
    for (std::uint64_t seed : {11ull, 12ull, 13ull}) {
        std::map<std::string, EmbedFn> rand_emb;
        for (const auto& l : {"l0", "l1"})
            rand_emb[l] = [seed](const std::string& text, bool) {
                num::RngState h(num::RngState(seed).derive(text).seed);
                std::vector<float> v(16);
                for (auto& x : v) x = static_cast<float>(h.normal());
                return v;
            };
        const auto racc = eval_mcqa(rand_emb, bench, EvalMode::mono);
        double total = 0;
        for (const auto& s : racc.scores) total += s.value;
        total /= static_cast<double>(racc.scores.size());
        CHECK(total > 0.18);
        CHECK(total < 0.32);
    }
}

TEST_CASE("cross_matrix emits L mono + L(L-1)/2 pair rows, all finite") {
    const auto inv = small_inv();
    const std::vector<std::string> lang_ids = {"l0", "l1", "l2", "l3"};
    auto family = synth::make_language_family(103, lang_ids, inv, 0);
    auto bench = synth::build_sts(inv, family, {0.0, 0.5, 1.0}, 12, 4, 105);
    auto embedders = oracle_embedders(bench, lang_ids, inv.n_groups);
    const auto res = cross_matrix(embedders, bench);
    CHECK(res.scores.size() == 4 + 6);
    for (const auto& s : res.scores) CHECK(std::isfinite(s.value));
}

TEST_CASE("scale invariance: positive scaling changes no score or prediction") {
    const auto inv = small_inv();
    const std::vector<std::string> lang_ids = {"l0", "l1"};
    auto family = synth::make_language_family(107, lang_ids, inv, 0);
    auto sts = synth::build_sts(inv, family, {0.0, 0.5, 1.0}, 30, 10, 109);
    auto base = oracle_embedders(sts, lang_ids, inv.n_groups);
    std::map<std::string, EmbedFn> scaled;
    for (const auto& [l, fn] : base)
        scaled[l] = [fn](const std::string& text, bool a) {
            auto v = fn(text, a);
            for (auto& x : v) x *= 37.5f;
            return v;
        };
    const auto r1 = eval_sts(base, sts, EvalMode::cross);
    const auto r2 = eval_sts(scaled, sts, EvalMode::cross);
    REQUIRE(r1.scores.size() == r2.scores.size());
    for (std::size_t i = 0; i < r1.scores.size(); ++i)
        CHECK(r1.scores[i].value == doctest::Approx(r2.scores[i].value).epsilon(1e-12));
}

TEST_CASE("report csv: canonical ordering, fixed decimals, round-trip") {
    EvalReport rep;
    rep.rows.push_back({"single_m", "mlm_only", "sts", "mono", "l1", 2, "spearman_x100", 83.5});
    rep.rows.push_back({"base", "mlm_only", "sts", "mono", "l0", 1, "spearman_x100", 10.0});
    rep.rows.push_back({"base", "mlm_only", "mcqa", "cross", "l0-l1", 1, "accuracy", 0.25});
    const std::string path = "/tmp/mselab_test_report.csv";
    write_report_csv(rep, path);

    std::ifstream f(path);
    std::string line;
    std::getline(f, line);
    CHECK(line == "regime,base_variant,task,mode,lang,seed,metric,value");
    std::getline(f, line);
    CHECK(line == "base,mlm_only,mcqa,cross,l0-l1,1,accuracy,0.250000");

    auto rt = read_report_csv(path);
    REQUIRE(rt.rows.size() == 3);
    CHECK(rt.rows[0].task == "mcqa");
    CHECK(rt.rows[2].regime == "single_m");
    CHECK(rt.rows[2].value == doctest::Approx(83.5));
    std::remove(path.c_str());
}
