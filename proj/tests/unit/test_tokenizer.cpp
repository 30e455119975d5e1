#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <set>

#include "mselab/tokenizer/bpe.hpp"

using namespace mse::tok;

namespace {

const std::vector<std::string> kCorpus = {
    "tomu kalu pesa",  "tomu riga kalu", "pesa pesa tomu", "riga kalu tomu pesa",
    "kalu tomu riga",  "pesa kalomi",    "kalomi riga",    "tomu kalomi pesa riga",
};

std::string temp_path(const char* name) {
    return std::string("/tmp/mselab_test_") + name;
}

}  // namespace

TEST_CASE("train_bpe basics and determinism") {
    BpeModel m1 = train_bpe(kCorpus, 64);
    BpeModel m2 = train_bpe(kCorpus, 64);
    CHECK(m1.vocab.token_of == m2.vocab.token_of);
    CHECK(m1.merges == m2.merges);

    // Specials present, distinct, [PAD] at id 0.
    CHECK(m1.vocab.token_of[0] == "[PAD]");
    CHECK(m1.vocab.lookup("[UNK]") == kUnk);
    CHECK(m1.vocab.lookup("[CLS]") == kCls);
    CHECK(m1.vocab.lookup("[SEP]") == kSep);
    CHECK(m1.vocab.lookup("[MASK]") == kMask);

    // Bijection between ids and strings.
    std::set<std::string> uniq(m1.vocab.token_of.begin(), m1.vocab.token_of.end());
    CHECK(uniq.size() == m1.vocab.token_of.size());

    CHECK_THROWS(train_bpe({}, 64));
    CHECK_THROWS_WITH_AS(train_bpe(kCorpus, 6), doctest::Contains("minimum"),
                         std::invalid_argument);
}

TEST_CASE("single-merge corpus produces exactly that merge") {
    // Budget: specials + alphabet {a, b</w>} + 1 merge.
    BpeModel m = train_bpe({"ab ab ab"}, kNumSpecials + 2 + 1);
    REQUIRE(m.merges.size() == 1);
    CHECK(m.merges[0].first == "a");
    CHECK(m.merges[0].second == "b</w>");

    const auto ids = encode(m, "ab", 16);
    REQUIRE(ids.size() == 3);
    CHECK(ids[0] == kCls);
    CHECK(ids[1] == m.vocab.lookup("ab</w>"));
    CHECK(ids[2] == kSep);
}

TEST_CASE("budget at minimum yields zero merges (pure characters)") {
    const std::string msg = [&] {
        try {
            train_bpe({"ab ba"}, 0);
        } catch (const std::invalid_argument& e) {
            return std::string(e.what());
        }
        return std::string();
    }();
    REQUIRE(!msg.empty());
    const int min_size = std::stoi(msg.substr(msg.rfind(' ') + 1));
    BpeModel m = train_bpe({"ab ba"}, min_size);
    CHECK(m.merges.empty());
    const auto ids = encode(m, "ab", 16);
    CHECK(ids.size() == 4);  // CLS a b</w> SEP
}

TEST_CASE("encode contract: empty text, truncation, unknown chars") {
    BpeModel m = train_bpe(kCorpus, 64);

    const auto empty = encode(m, "", 16);
    CHECK(empty == std::vector<int>{kCls, kSep});

    std::string long_text;
    for (int i = 0; i < 500; ++i) long_text += "tomu ";
    const auto ids = encode(m, long_text, 128);
    CHECK(ids.size() == 128);
    CHECK(ids.back() == kSep);

    const auto unk = encode(m, "xyz", 16);
    CHECK(unk.size() >= 3);
    for (std::size_t i = 1; i + 1 < unk.size(); ++i) CHECK(unk[i] == kUnk);

    CHECK_THROWS(encode(m, "tomu", 1));

    // Coverage: no [UNK] on the training corpus; every id within bounds.
    for (const auto& line : kCorpus) {
        for (int id : encode(m, line, 256)) {
            CHECK(id < m.vocab.size());
            CHECK(id != kUnk);
        }
    }
}

TEST_CASE("decode round-trips corpus text and renders unk marker") {
    BpeModel m = train_bpe(kCorpus, 64);
    for (const auto& line : kCorpus) CHECK(decode(m, encode(m, line, 256)) == line);
    CHECK(decode(m, encode(m, "kalomi", 64)) == "kalomi");
    CHECK(decode(m, {kCls, kSep}) == "");
    CHECK(decode(m, {kCls, kUnk, kSep}) == "<unk>");
    CHECK_THROWS(decode(m, {m.vocab.size()}));
}

TEST_CASE("tokenizer file round-trip, format, and error paths") {
    BpeModel m = train_bpe(kCorpus, 64);
    const std::string path = temp_path("tok.txt");
    save_bpe(m, path);

    std::ifstream f(path);
    std::string header;
    std::getline(f, header);
    CHECK(header == "BPE v1");

    BpeModel r = load_bpe(path);
    CHECK(r.vocab.token_of == m.vocab.token_of);
    CHECK(r.merges == m.merges);
    for (const auto& line : kCorpus) CHECK(encode(r, line, 128) == encode(m, line, 128));

    std::ofstream bad(temp_path("tok_bad.txt"));
    bad << "NOT A TOKENIZER\n";
    bad.close();
    CHECK_THROWS_WITH_AS(load_bpe(temp_path("tok_bad.txt")), doctest::Contains("bad header"),
                         std::runtime_error);
    CHECK_THROWS(load_bpe("/nonexistent/path/tok.txt"));
    std::remove(path.c_str());
    std::remove(temp_path("tok_bad.txt").c_str());
}
