#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "mselab/encoder/model.hpp"
#include "mselab/encoder/weights_io.hpp"
#include "mselab/numerics/adam.hpp"
#include "mselab/numerics/grad_check.hpp"
#include "mselab/training/losses.hpp"

using namespace mse;
using enc::EncoderConfig;
using enc::EncoderModel;
using num::RngState;
using num::Tensor;

namespace {

EncoderConfig tiny_config(int vocab = 24) {
    EncoderConfig cfg;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.d_model = 16;
    cfg.d_ff = 32;
    cfg.max_len = 24;
    cfg.vocab_size = vocab;
    cfg.adapter_bottleneck = 8;
    cfg.adapter_scale = 4.0f;
    return cfg;
}

template <typename T>
bool tensors_equal(const Tensor<T>& a, const Tensor<T>& b) {
    return a.shape == b.shape && *a.data == *b.data;
}

}  // namespace

TEST_CASE("forward_embed is unit-norm and pad-invariant") {
    RngState rng(101);
    auto model = EncoderModel<float>::random_init(tiny_config(), rng);

    RngState data_rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<int> ids = {tok::kCls};
        const int n = 1 + static_cast<int>(data_rng.uniform_below(10));
        for (int i = 0; i < n; ++i)
            ids.push_back(tok::kNumSpecials +
                          static_cast<int>(data_rng.uniform_below(
                              static_cast<std::uint64_t>(model.config.vocab_size - tok::kNumSpecials))));
        ids.push_back(tok::kSep);

        const auto emb = model.forward_embed(ids, false);
        double norm = 0;
        for (float v : emb.v()) norm += static_cast<double>(v) * v;
        CHECK(std::abs(std::sqrt(norm) - 1.0) < 1e-6);

        // Appending [PAD] never changes the embedding, bit for bit.
        std::vector<int> padded = ids;
        padded.push_back(tok::kPad);
        padded.push_back(tok::kPad);
        const auto emb2 = model.forward_embed(padded, false);
        CHECK(*emb.data == *emb2.data);
    }

    CHECK_THROWS_WITH_AS(model.forward_embed({tok::kPad, tok::kPad}, false),
                         doctest::Contains("all-[PAD]"), std::invalid_argument);
}

TEST_CASE("adapter bypass and zero-up-projection identity") {
    RngState rng(103);
    auto model = EncoderModel<float>::random_init(tiny_config(), rng);
    const std::vector<int> ids = {tok::kCls, 7, 9, 11, tok::kSep};

    // No adapter attached: both flags give bit-identical embeddings.
    const auto none_true = model.forward_embed(ids, true);
    const auto none_false = model.forward_embed(ids, false);
    CHECK(*none_true.data == *none_false.data);

    // Freshly attached adapter has a zero up-projection: exact identity.
    model.attach_adapter(8, 4.0f, rng);
    CHECK(model.frozen_base);
    const auto with = model.forward_embed(ids, true);
    const auto without = model.forward_embed(ids, false);
    CHECK(*with.data == *without.data);

    // Nonzero up-projection must change the adapted path only.
    for (auto& layer : model.adapter->layers)
        for (float& v : layer.w_up.v()) v = 0.05f;
    const auto changed = model.forward_embed(ids, true);
    const auto base_path = model.forward_embed(ids, false);
    CHECK(*base_path.data == *without.data);
    CHECK(*changed.data != *base_path.data);

    CHECK_THROWS_WITH_AS(model.attach_adapter(8, 4.0f, rng), doctest::Contains("already"),
                         std::logic_error);
}

TEST_CASE("adapter parameter count matches the closed form") {
    RngState rng(105);
    auto model = EncoderModel<float>::random_init(tiny_config(), rng);
    const std::size_t before = model.parameter_count();
    const int r = 8;
    model.attach_adapter(r, 4.0f, rng);
    const std::size_t after = model.parameter_count();
    const auto d = static_cast<std::size_t>(model.config.d_model);
    const auto L = static_cast<std::size_t>(model.config.n_layers);
    CHECK(after - before == L * (d * r + r * d + r + d));
}

TEST_CASE("mlm_logits shape, degenerate weights, and softmax normalization") {
    RngState rng(107);
    auto model = EncoderModel<float>::random_init(tiny_config(), rng);
    const std::vector<int> ids = {tok::kCls, 7, tok::kMask, 11, tok::kSep};
    const std::vector<int> positions = {2, 3};

    auto logits = model.mlm_logits(ids, positions);
    CHECK(logits.rows() == 2);
    CHECK(logits.cols() == static_cast<std::size_t>(model.config.vocab_size));

    auto probs = num::softmax_rows(logits);
    for (std::size_t r = 0; r < probs.rows(); ++r) {
        double sum = 0;
        for (std::size_t c = 0; c < probs.cols(); ++c) sum += probs.at(r, c);
        CHECK(std::abs(sum - 1.0) < 1e-6);
    }

    // Zero embeddings: logits collapse to the bias at every position.
    for (float& v : model.token_embeddings.v()) v = 0.0f;
    for (std::size_t i = 0; i < model.mlm_bias.numel(); ++i)
        model.mlm_bias.v()[i] = static_cast<float>(i) * 0.125f;
    auto degen = model.mlm_logits(ids, positions);
    for (std::size_t r = 0; r < degen.rows(); ++r)
        for (std::size_t c = 0; c < degen.cols(); ++c)
            CHECK(degen.at(r, c) == doctest::Approx(model.mlm_bias.v()[c]).epsilon(1e-6));

    CHECK_THROWS(model.mlm_logits(ids, {}));
    CHECK_THROWS(model.mlm_logits(ids, {99}));
}

TEST_CASE("weight file round-trip is bit-exact; corrupt files are rejected") {
    RngState rng(109);
    auto model = EncoderModel<float>::random_init(tiny_config(), rng);
    model.attach_adapter(8, 4.0f, rng);
    model.phase = "contrastive";
    model.lang = "xx";

    const std::string path = "/tmp/mselab_test_model.bin";
    enc::save_model(model, path);
    auto loaded = enc::load_model(path);

    CHECK(loaded.phase == "contrastive");
    CHECK(loaded.lang == "xx");
    CHECK(loaded.frozen_base == model.frozen_base);
    REQUIRE(loaded.adapter.has_value());
    auto a = model.named_parameters();
    auto b = loaded.named_parameters();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].first == b[i].first);
        CHECK(tensors_equal(*a[i].second, *b[i].second));
    }

    // Format detail: token embedding tensor dims (V, d_model).
    const auto tensors = enc::read_weight_file(path);
    REQUIRE(!tensors.empty());
    CHECK(tensors[0].name == "token_embeddings");
    CHECK(tensors[0].dims ==
          std::vector<std::uint64_t>{static_cast<std::uint64_t>(model.config.vocab_size),
                                     static_cast<std::uint64_t>(model.config.d_model)});

    // Corrupt magic.
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.write("XXXX", 4);
    }
    CHECK_THROWS_WITH_AS(enc::load_model(path), doctest::Contains("bad magic"),
                         std::runtime_error);

    // Truncation.
    enc::save_model(model, path);
    {
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    CHECK_THROWS_WITH_AS(enc::load_model(path), doctest::Contains("truncated"),
                         std::runtime_error);
    std::remove(path.c_str());
    std::remove((path + ".json").c_str());
}

TEST_CASE("MLM and MNRL losses pass grad_check on a 2-layer d16 model") {
    RngState rng(111);
    auto model = EncoderModel<double>::random_init(tiny_config(), rng);
    for (auto* p : model.parameters()) p->set_requires_grad(true);

    SUBCASE("mlm") {
        train::MaskedBatch batch;
        batch.corrupted = {{tok::kCls, tok::kMask, 9, tok::kMask, tok::kSep},
                           {tok::kCls, 6, tok::kMask, tok::kSep}};
        batch.positions = {{1, 3}, {2}};
        batch.originals = {{7, 12}, {9}};
        auto loss_fn = [&]() { return train::mlm_loss<double>(model, batch); };
        CHECK(num::grad_check(loss_fn, model.parameters(), 1e-5) < 1e-4);
    }

    SUBCASE("mnrl through the encoder") {
        const std::vector<std::vector<int>> anchors = {{tok::kCls, 6, 8, tok::kSep},
                                                       {tok::kCls, 10, 12, tok::kSep}};
        const std::vector<std::vector<int>> positives = {{tok::kCls, 6, 9, tok::kSep},
                                                         {tok::kCls, 10, 13, tok::kSep}};
        auto loss_fn = [&]() {
            std::vector<Tensor<double>> a_rows, p_rows;
            for (const auto& ids : anchors) a_rows.push_back(model.forward_embed(ids, false));
            for (const auto& ids : positives) p_rows.push_back(model.forward_embed(ids, false));
            auto a = num::concat_rows(a_rows);
            auto p = num::concat_rows(p_rows);
            return train::mnrl_loss<double>(a, p, nullptr, 20.0);
        };
        CHECK(num::grad_check(loss_fn, model.parameters(), 1e-5) < 1e-4);
    }

    SUBCASE("mnrl adapter-only gradients with frozen base") {
        model.attach_adapter(8, 4.0, rng);
        // Nonzero up-projection so the adapter path carries signal.
        for (auto& layer : model.adapter->layers)
            for (double& v : layer.w_up.v()) v = 0.01;
        model.set_training_mode(true);
        const std::vector<std::vector<int>> anchors = {{tok::kCls, 6, 8, tok::kSep},
                                                       {tok::kCls, 10, 12, tok::kSep}};
        const std::vector<std::vector<int>> positives = {{tok::kCls, 6, 9, tok::kSep},
                                                         {tok::kCls, 10, 13, tok::kSep}};
        auto loss_fn = [&]() {
            std::vector<Tensor<double>> a_rows, p_rows;
            for (const auto& ids : anchors) a_rows.push_back(model.forward_embed(ids, true));
            for (const auto& ids : positives) p_rows.push_back(model.forward_embed(ids, true));
            return train::mnrl_loss<double>(num::concat_rows(a_rows), num::concat_rows(p_rows),
                                            nullptr, 20.0);
        };
        CHECK(num::grad_check(loss_fn, model.trainable_parameters(), 1e-5) < 1e-4);
    }
}

TEST_CASE("frozen base: adapter training leaves every base tensor bit-identical") {
    RngState rng(113);
    auto model = EncoderModel<float>::random_init(tiny_config(), rng);
    model.attach_adapter(8, 4.0f, rng);
    model.set_training_mode(true);

    std::vector<std::vector<float>> base_before;
    for (auto* p : model.base_parameters()) base_before.push_back(*p->data);

    // A few adapter-only update steps.
    num::AdamState<float> st;
    st.lr = 1e-2f;
    st.init(model.trainable_parameters());
    const std::vector<int> a_ids = {tok::kCls, 6, 8, tok::kSep};
    const std::vector<int> p_ids = {tok::kCls, 6, 9, tok::kSep};
    const std::vector<int> a2_ids = {tok::kCls, 10, 12, tok::kSep};
    const std::vector<int> p2_ids = {tok::kCls, 10, 13, tok::kSep};
    for (int step = 0; step < 5; ++step) {
        for (auto* p : model.trainable_parameters()) p->zero_grad();
        auto a = num::concat_rows<float>(
            {model.forward_embed(a_ids, true), model.forward_embed(a2_ids, true)});
        auto p = num::concat_rows<float>(
            {model.forward_embed(p_ids, true), model.forward_embed(p2_ids, true)});
        auto loss = train::mnrl_loss<float>(a, p, nullptr, 20.0f);
        num::backward(loss);
        num::adam_step(model.trainable_parameters(), st);
    }

    auto base_after = model.base_parameters();
    for (std::size_t i = 0; i < base_after.size(); ++i)
        CHECK(*base_after[i]->data == base_before[i]);

    // And the adapter actually moved.
    bool adapter_changed = false;
    for (auto& layer : model.adapter->layers)
        for (float v : layer.w_up.v()) adapter_changed = adapter_changed || v != 0.0f;
    CHECK(adapter_changed);
}
