#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>

#include "mselab/numerics/kernels.hpp"
#include "mselab/tokenizer/bpe.hpp"
#include "mselab/transplant/aux_embeddings.hpp"
#include "mselab/transplant/focus.hpp"

using namespace mse;
using focus::AuxEmbeddings;
using focus::compute_overlap;
using focus::focus_init;
using focus::train_aux_embeddings;

namespace {

double cos_of(const std::vector<float>& a, const std::vector<float>& b) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    if (na == 0 || nb == 0) return 0;
    return dot / std::sqrt(na * nb);
}

}  // namespace

TEST_CASE("aux embeddings: determinism, twin contexts, rank deficiency") {
    const std::vector<std::string> corpus = {
        "ga fo mi", "ga fo mi", "zu fo mi", "zu fo mi",  // ga and zu share all contexts
        "ra ta",    "ta ra ra", "mi fo ga", "mi fo zu",
    };
    tok::BpeModel source = tok::train_bpe(corpus, 64);
    tok::BpeModel target = tok::train_bpe(corpus, 48);

    AuxEmbeddings a1 = train_aux_embeddings(corpus, source, target, 8, 2);
    AuxEmbeddings a2 = train_aux_embeddings(corpus, source, target, 8, 2);
    REQUIRE(a1.vectors.size() == a2.vectors.size());
    for (const auto& [tok_s, vec] : a1.vectors) {
        auto it = a2.vectors.find(tok_s);
        REQUIRE(it != a2.vectors.end());
        CHECK(vec == it->second);  // identical corpus -> identical vectors
    }

    // Twin tokens with identical contexts end up nearly parallel.
    const auto* ga = a1.find("ga</w>");
    const auto* zu = a1.find("zu</w>");
    REQUIRE(ga != nullptr);
    REQUIRE(zu != nullptr);
    CHECK(cos_of(*ga, *zu) >= 0.99);

    // dim far above the matrix rank: trailing dimensions come out zero.
    AuxEmbeddings big = train_aux_embeddings(corpus, source, target, 64, 2);
    const auto* v = big.find("ga</w>");
    REQUIRE(v != nullptr);
    bool tail_zero = true;
    for (std::size_t j = 32; j < v->size(); ++j) tail_zero = tail_zero && (*v)[j] == 0.0f;
    CHECK(tail_zero);

    CHECK_THROWS(train_aux_embeddings({}, source, target, 8, 2));
    CHECK_THROWS(train_aux_embeddings(corpus, source, target, 1, 2));
}

TEST_CASE("compute_overlap: identical, disjoint-except-specials, and partial") {
    const std::vector<std::string> corpus_a = {"ab ab a b"};
    const std::vector<std::string> corpus_b = {"cd cd c d"};
    tok::BpeModel ta = tok::train_bpe(corpus_a, 16);
    tok::BpeModel tb = tok::train_bpe(corpus_b, 16);

    auto same = compute_overlap(ta.vocab, ta.vocab);
    CHECK(same.pairs.size() == static_cast<std::size_t>(ta.vocab.size()));

    // Disjoint alphabets still share the five specials.
    auto specials_only = compute_overlap(ta.vocab, tb.vocab);
    CHECK(specials_only.pairs.size() == 5);
    CHECK(specials_only.pairs.count("[PAD]") == 1);
    CHECK(specials_only.pairs.count("[MASK]") == 1);

    // Partial overlap matches exact set intersection.
    const std::vector<std::string> corpus_c = {"ab ab a c"};
    tok::BpeModel tc = tok::train_bpe(corpus_c, 16);
    auto partial = compute_overlap(ta.vocab, tc.vocab);
    std::set<std::string> expect;
    for (const auto& t : ta.vocab.token_of)
        if (tc.vocab.lookup(t) >= 0) expect.insert(t);
    CHECK(partial.pairs.size() == expect.size());
    for (const auto& [t, sid] : partial.pairs) {
        CHECK(expect.count(t) == 1);
        CHECK(ta.vocab.token_of[static_cast<std::size_t>(sid)] == t);
    }
}

TEST_CASE("focus_init invariants: copy exactness, convex hull, determinism") {
    tok::Vocab source, target;
    auto add = [](tok::Vocab& v, const std::string& t) {
        v.id_of[t] = v.size();
        v.token_of.push_back(t);
    };
    for (const char* s : {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"}) {
        add(source, s);
        add(target, s);
    }
    for (const char* s : {"x", "y", "z", "w"}) add(source, s);
    for (const char* s : {"x", "y", "n1", "n2"}) add(target, s);

    num::RngState rng(55);
    auto src_emb = num::Tensor<float>::randn({static_cast<std::size_t>(source.size()), 12}, rng, 1.0f);

    AuxEmbeddings aux;
    aux.dim = 9;
    auto put = [&](const std::string& t, std::vector<float> v) {
        v.resize(9, 0.0f);
        aux.vectors[t] = std::move(v);
    };
    // Specials live on their own axes so they never alias content anchors.
    put("[PAD]", {0, 0, 0, 0, 1});
    put("[UNK]", {0, 0, 0, 0, 0, 1});
    put("[CLS]", {0, 0, 0, 0, 0, 0, 1});
    put("[SEP]", {0, 0, 0, 0, 0, 0, 0, 1});
    put("[MASK]", {0, 0, 0, 0, 0, 0, 0, 0, 1});
    put("x", {1, 0, 0, 0});
    put("y", {0, 1, 0, 0});
    put("z", {0, 0, 1, 0});
    put("w", {0, 0, 0, 1});
    put("n1", {1, 0, 0, 0});              // exactly x's aux vector
    put("n2", {0.7071f, 0.7071f, 0, 0});  // symmetric between x and y

    auto overlap = compute_overlap(source, target);
    auto res = focus_init(src_emb, overlap, aux, target);
    auto res2 = focus_init(src_emb, overlap, aux, target);
    CHECK(*res.embeddings.data == *res2.embeddings.data);  // determinism

    // Overlap rows are bit-identical copies.
    for (const auto& [t, sid] : overlap.pairs) {
        const auto tid = static_cast<std::size_t>(target.lookup(t));
        for (std::size_t j = 0; j < 12; ++j)
            CHECK(res.embeddings.at(tid, j) == src_emb.at(static_cast<std::size_t>(sid), j));
    }

    // n1's aux vector equals x's: sparsemax puts weight exactly 1 on x.
    const auto n1 = static_cast<std::size_t>(target.lookup("n1"));
    const auto x_sid = static_cast<std::size_t>(source.lookup("x"));
    for (std::size_t j = 0; j < 12; ++j)
        CHECK(res.embeddings.at(n1, j) == doctest::Approx(src_emb.at(x_sid, j)).epsilon(1e-6));

    // n2 sits exactly between x and y: 0.5/0.5 midpoint.
    const auto n2 = static_cast<std::size_t>(target.lookup("n2"));
    const auto y_sid = static_cast<std::size_t>(source.lookup("y"));
    for (std::size_t j = 0; j < 12; ++j) {
        const float mid = 0.5f * (src_emb.at(x_sid, j) + src_emb.at(y_sid, j));
        CHECK(res.embeddings.at(n2, j) == doctest::Approx(mid).epsilon(1e-3));
    }

    // Convex hull: row norms bounded by the max source row norm.
    double max_src = 0;
    for (std::size_t r = 0; r < src_emb.rows(); ++r) {
        double s = 0;
        for (std::size_t j = 0; j < 12; ++j)
            s += static_cast<double>(src_emb.at(r, j)) * src_emb.at(r, j);
        max_src = std::max(max_src, std::sqrt(s));
    }
    for (std::size_t r = 0; r < res.embeddings.rows(); ++r) {
        double s = 0;
        for (std::size_t j = 0; j < 12; ++j)
            s += static_cast<double>(res.embeddings.at(r, j)) * res.embeddings.at(r, j);
        CHECK(std::sqrt(s) <= max_src + 1e-4);
    }

    // Zero aux vector for a non-overlap token: fallback to anchor mean, reported.
    add(target, "n3");
    put("n3", {0, 0, 0, 0});
    auto overlap2 = compute_overlap(source, target);
    auto res3 = focus_init(src_emb, overlap2, aux, target);
    REQUIRE(res3.fallback_tokens.size() == 1);
    CHECK(res3.fallback_tokens[0] == "n3");

    // Missing aux vector: error naming the token.
    add(target, "absent");
    auto overlap3 = compute_overlap(source, target);
    CHECK_THROWS_WITH_AS(focus_init(src_emb, overlap3, aux, target),
                         doctest::Contains("absent"), std::runtime_error);
}

TEST_CASE("focus errors on empty overlap") {
    tok::Vocab a, b;
    auto add = [](tok::Vocab& v, const std::string& t) {
        v.id_of[t] = v.size();
        v.token_of.push_back(t);
    };
    add(a, "only_a");
    add(b, "only_b");
    CHECK_THROWS_WITH_AS(compute_overlap(a, b), doctest::Contains("no anchors"),
                         std::runtime_error);
}
