// mse-lab: train, align, and evaluate modular per-language sentence encoders
// on a deterministic synthetic language family.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "exp_config.hpp"
#include "experiment.hpp"
#include "mselab/encoder/model.hpp"
#include "mselab/eval/harness.hpp"
#include "mselab/numerics/grad_check.hpp"
#include "mselab/tokenizer/bpe.hpp"
#include "mselab/training/losses.hpp"
#include "mselab/training/trainer.hpp"
#include "mselab/transplant/focus.hpp"
#include "mselab/util/tsv.hpp"

namespace fs = std::filesystem;
using namespace mse;

namespace {

// Exit codes (documented in the README):
//   0 success, 1 internal error, 2 usage/config error, 3 missing file,
//   4 phase-order violation, 5 data/format error.
enum ExitCode : int {
    kOk = 0,
    kInternal = 1,
    kConfig = 2,
    kMissingFile = 3,
    kPhaseOrder = 4,
    kFormat = 5,
};

struct CliError : std::runtime_error {
    int code;
    CliError(int c, const std::string& msg) : std::runtime_error(msg), code(c) {}
};

void require_file(const std::string& path) {
    if (!fs::exists(path)) throw CliError(kMissingFile, "missing file: " + path);
}

void require_phase(const enc::EncoderModel<float>& model,
                   const std::vector<std::string>& allowed, const std::string& op) {
    for (const auto& p : allowed)
        if (model.phase == p) return;
    std::string want;
    for (const auto& p : allowed) want += (want.empty() ? "" : "|") + p;
    throw CliError(kPhaseOrder, "phase-order violation: " + op + " requires model phase [" +
                                    want + "], got '" + model.phase + "'");
}

enc::EncoderModel<float> load_model_checked(const std::string& path) {
    require_file(path);
    require_file(path + ".json");
    try {
        return enc::load_model(path);
    } catch (const std::exception& e) {
        throw CliError(kFormat, e.what());
    }
}

tok::BpeModel load_tokenizer_checked(const std::string& path) {
    require_file(path);
    try {
        return tok::load_bpe(path);
    } catch (const std::exception& e) {
        throw CliError(kFormat, e.what());
    }
}

cli::ExperimentConfig load_config_checked(const std::string& path) {
    require_file(path);
    try {
        return cli::load_experiment_config(path);
    } catch (const std::invalid_argument& e) {
        throw CliError(kConfig, e.what());
    } catch (const std::exception& e) {
        throw CliError(kConfig, e.what());
    }
}

std::string default_out_dir(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("MSE_LAB_OUT")) return env;
    return "out";
}

// Model map file: {"langs": {"<lang>": {"model": path, "tokenizer": path}}}
struct LoadedLang {
    enc::EncoderModel<float> model;
    tok::BpeModel tokenizer;
};

std::map<std::string, LoadedLang> load_model_map(const std::string& path) {
    require_file(path);
    std::ifstream f(path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        throw CliError(kFormat, std::string("model map: malformed JSON: ") + e.what());
    }
    std::map<std::string, LoadedLang> out;
    if (!j.contains("langs")) throw CliError(kFormat, "model map: missing 'langs' object");
    for (const auto& [lang, spec] : j.at("langs").items()) {
        LoadedLang ll{load_model_checked(spec.at("model").get<std::string>()),
                      load_tokenizer_checked(spec.at("tokenizer").get<std::string>())};
        out.emplace(lang, std::move(ll));
    }
    return out;
}

std::map<std::string, eval::EmbedFn> embedders_of(std::map<std::string, LoadedLang>& langs) {
    std::map<std::string, eval::EmbedFn> out;
    for (auto& [lang, ll] : langs) {
        const auto* model = &ll.model;
        const auto* tokenizer = &ll.tokenizer;
        out[lang] = [model, tokenizer](const std::string& text, bool use_adapter) {
            num::NoGradGuard guard;
            const auto ids = tok::encode(*tokenizer, text, model->config.max_len);
            return *model->forward_embed(ids, use_adapter).data;
        };
    }
    return out;
}

std::vector<std::size_t> index_range(std::size_t n) {
    std::vector<std::size_t> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = i;
    return v;
}

std::size_t lang_index_of(const synth::RealizedCorpus& corpus, const std::string& lang) {
    for (std::size_t i = 0; i < corpus.langs.size(); ++i)
        if (corpus.langs[i] == lang) return i;
    throw CliError(kConfig, "language '" + lang + "' not present in corpus");
}

// ----------------------------- subcommand bodies -----------------------------

int cmd_gen_data(const std::string& config_path, const std::string& out_flag,
                 std::optional<std::uint64_t> seed) {
    cli::ExperimentConfig cfg = load_config_checked(config_path);
    const std::uint64_t s = seed.value_or(cfg.seeds.front());
    const fs::path dir = fs::path(default_out_dir(out_flag));
    fs::create_directories(dir);

    num::RngState root(s);
    const std::size_t pivot = cfg.pivot_index();
    auto family = synth::make_language_family(root.derive("family").seed, cfg.languages,
                                              cfg.inventory, pivot);
    for (std::size_t l = 0; l < cfg.languages.size(); ++l) {
        const bool lowres = cfg.is_low_resource(cfg.languages[l]);
        const int n = std::max(32, lowres ? cfg.data.mlm_sentences / cfg.data.low_resource_divisor
                                          : cfg.data.mlm_sentences);
        auto lines = synth::build_mlm_corpus(cfg.inventory, family[l], l == pivot,
                                             n + cfg.data.mlm_heldout,
                                             cfg.data.translation_noise,
                                             root.derive("mlm-" + cfg.languages[l]));
        std::vector<std::string> held(lines.end() - cfg.data.mlm_heldout, lines.end());
        lines.resize(static_cast<std::size_t>(n));
        util::write_lines(lines, (dir / ("mlm_" + cfg.languages[l] + ".txt")).string());
        util::write_lines(held, (dir / ("mlm_heldout_" + cfg.languages[l] + ".txt")).string());
    }
    const int total = cfg.data.items + cfg.data.heldout_items;
    auto concepts =
        synth::build_corpus(cfg.inventory, total, cfg.data.hard_negative_fraction,
                            root.derive("corpus"));
    auto realized = synth::realize_corpus(concepts, family, pivot, cfg.inventory,
                                          cfg.data.translation_noise,
                                          root.derive("corpus-realize"));
    synth::RealizedCorpus train_part, held_part;
    train_part.langs = held_part.langs = realized.langs;
    for (int i = 0; i < cfg.data.items; ++i)
        train_part.items.push_back(realized.items[static_cast<std::size_t>(i)]);
    for (int i = cfg.data.items; i < total; ++i)
        held_part.items.push_back(realized.items[static_cast<std::size_t>(i)]);
    util::write_corpus_tsv(train_part, (dir / "corpus_train.tsv").string());
    util::write_corpus_tsv(held_part, (dir / "corpus_heldout.tsv").string());

    const int alt_domain = std::max(25, (cfg.inventory.n_groups * 7) / 10);
    auto alt = synth::build_corpus(cfg.inventory, cfg.data.items,
                                   cfg.data.hard_negative_fraction, root.derive("pivot-alt"),
                                   alt_domain);
    util::write_corpus_tsv(synth::realize_corpus(alt, family, pivot, cfg.inventory,
                                                 cfg.data.translation_noise,
                                                 root.derive("pivot-alt-realize")),
                           (dir / "pivot_alt.tsv").string());

    util::write_sts_tsv(synth::build_sts(cfg.inventory, family, cfg.data.sts_levels,
                                         cfg.data.sts_mono_per_lang,
                                         cfg.data.sts_cross_per_direction,
                                         root.derive("sts").seed),
                        (dir / "sts.tsv").string());
    util::write_mcqa_tsv(synth::build_mcqa(cfg.inventory, family, cfg.data.mcqa_mono_items,
                                           cfg.data.mcqa_cross_items, root.derive("mcqa").seed),
                         (dir / "mcqa.tsv").string());
    std::printf("wrote data for seed %llu to %s\n",
                static_cast<unsigned long long>(s), dir.string().c_str());
    return kOk;
}

int cmd_train_tokenizer(const std::vector<std::string>& inputs, int vocab_size,
                        const std::string& out) {
    std::vector<std::string> lines;
    for (const auto& path : inputs) {
        require_file(path);
        for (auto& l : util::read_lines(path)) lines.push_back(std::move(l));
    }
    try {
        tok::BpeModel model = tok::train_bpe(lines, vocab_size);
        tok::save_bpe(model, out);
        std::printf("trained tokenizer: %d tokens, %zu merges -> %s\n", model.vocab.size(),
                    model.merges.size(), out.c_str());
    } catch (const std::invalid_argument& e) {
        throw CliError(kConfig, e.what());
    }
    return kOk;
}

int cmd_pretrain_base(const std::string& config_path, const std::string& tokenizer_path,
                      const std::string& data_dir, const std::string& out,
                      std::optional<std::uint64_t> seed) {
    cli::ExperimentConfig cfg = load_config_checked(config_path);
    const std::uint64_t s = seed.value_or(cfg.seeds.front());
    tok::BpeModel tokenizer = load_tokenizer_checked(tokenizer_path);

    std::vector<std::string> mixed;
    for (const auto& lang : cfg.languages) {
        const std::string path = (fs::path(data_dir) / ("mlm_" + lang + ".txt")).string();
        require_file(path);
        for (auto& l : util::read_lines(path)) mixed.push_back(std::move(l));
    }
    require_file((fs::path(data_dir) / "corpus_train.tsv").string());
    auto corpus = util::read_corpus_tsv((fs::path(data_dir) / "corpus_train.tsv").string());

    enc::EncoderConfig ecfg = cfg.encoder;
    ecfg.vocab_size = tokenizer.vocab.size();
    train::TrainConfig mlm_tc = cfg.phase_train_config(cfg.mlm, s);
    train::TrainConfig con_tc = cfg.phase_train_config(cfg.contrastive, s);
    con_tc.epochs = cfg.base_contrastive_epochs;
    auto model = train::pretrain_base(ecfg, tokenizer, mixed, corpus,
                                      train::parse_base_variant(cfg.base_variant), mlm_tc,
                                      cfg.base_mlm_steps, con_tc,
                                      num::RngState(s).derive("base"));
    enc::save_model(model, out);
    std::printf("pretrained base (%s) -> %s\n", cfg.base_variant.c_str(), out.c_str());
    return kOk;
}

int cmd_transplant(const std::string& config_path, const std::string& base_path,
                   const std::string& base_tok_path, const std::string& tok_path,
                   const std::string& corpus_path, const std::string& lang,
                   const std::string& out) {
    cli::ExperimentConfig cfg = load_config_checked(config_path);
    auto base = load_model_checked(base_path);
    require_phase(base, {"pretrained"}, "transplant");
    auto base_tok = load_tokenizer_checked(base_tok_path);
    auto lang_tok = load_tokenizer_checked(tok_path);
    require_file(corpus_path);
    const auto lines = util::read_lines(corpus_path);
    auto model = focus::transplant_encoder(base, base_tok, lang_tok, lines, cfg.aux_dim,
                                           cfg.aux_window, lang);
    enc::save_model(model, out);
    std::printf("transplanted %s (%d tokens) -> %s\n", lang.c_str(), lang_tok.vocab.size(),
                out.c_str());
    return kOk;
}

int cmd_adapt_mlm(const std::string& config_path, const std::string& model_path,
                  const std::string& tok_path, const std::string& corpus_path,
                  const std::string& heldout_path, int steps, const std::string& out,
                  std::optional<std::uint64_t> seed) {
    cli::ExperimentConfig cfg = load_config_checked(config_path);
    auto model = load_model_checked(model_path);
    require_phase(model, {"init", "pretrained", "transplanted"}, "adapt-mlm");
    auto tokenizer = load_tokenizer_checked(tok_path);
    require_file(corpus_path);
    const auto lines = util::read_lines(corpus_path);
    std::vector<std::string> heldout;
    if (!heldout_path.empty()) {
        require_file(heldout_path);
        heldout = util::read_lines(heldout_path);
    }
    const std::uint64_t s = seed.value_or(cfg.seeds.front());
    train::TrainConfig tc = cfg.phase_train_config(cfg.mlm, s);
    const int n_steps = steps > 0 ? steps : cfg.mlm.steps;
    const auto res = train::run_mlm(model, tokenizer, lines, tc, n_steps,
                                    num::RngState(s).derive("adapt-mlm"), heldout);
    model.phase = "mlm";
    enc::save_model(model, out);
    std::printf("mlm: %ld steps, held-out %.4f -> %.4f, wrote %s\n", res.steps,
                res.initial_heldout, res.final_heldout, out.c_str());
    return kOk;
}

int cmd_train_sent(const std::string& config_path, const std::string& model_path,
                   const std::string& tok_path, const std::string& corpus_path,
                   const std::string& mode, const std::string& lang, const std::string& out,
                   std::optional<std::uint64_t> seed) {
    cli::ExperimentConfig cfg = load_config_checked(config_path);
    auto model = load_model_checked(model_path);
    require_phase(model, {"init", "pretrained", "transplanted", "mlm"}, "train-sent");
    auto tokenizer = load_tokenizer_checked(tok_path);
    require_file(corpus_path);
    auto corpus = util::read_corpus_tsv(corpus_path);
    const std::uint64_t s = seed.value_or(cfg.seeds.front());
    train::TrainConfig tc = cfg.phase_train_config(cfg.contrastive, s);
    const auto items = index_range(corpus.items.size());
    num::RngState rng = num::RngState(s).derive("train-sent");

    train::PhaseResult res;
    if (mode == "single_m") {
        res = train::run_contrastive_single(model, tokenizer, corpus,
                                            train::SingleMode::monolingual_batches, tc, rng,
                                            items, {});
    } else if (mode == "single_c") {
        res = train::run_contrastive_single(model, tokenizer, corpus,
                                            train::SingleMode::crosslingual_pairs, tc, rng,
                                            items, {});
    } else if (mode == "mono") {
        if (lang.empty()) throw CliError(kConfig, "train-sent --mode mono requires --lang");
        res = train::run_contrastive_mono(model, tokenizer, corpus,
                                          lang_index_of(corpus, lang), tc, rng, items, {});
    } else {
        throw CliError(kConfig, "train-sent: unknown mode '" + mode +
                                    "' (single_m|single_c|mono)");
    }
    model.phase = "contrastive";
    enc::save_model(model, out);
    std::printf("contrastive (%s): %ld steps, wrote %s\n", mode.c_str(), res.steps, out.c_str());
    return kOk;
}

int cmd_train_cla(const std::string& config_path, const std::string& target_path,
                  const std::string& target_tok_path, const std::string& pivot_path,
                  const std::string& pivot_tok_path, const std::string& corpus_path,
                  const std::string& pivot_lang, const std::string& lang, const std::string& out,
                  std::optional<std::uint64_t> seed) {
    cli::ExperimentConfig cfg = load_config_checked(config_path);
    auto target = load_model_checked(target_path);
    auto pivot = load_model_checked(pivot_path);
    require_phase(target, {"contrastive"}, "train-cla");
    require_phase(pivot, {"contrastive"}, "train-cla (pivot)");
    if (pivot.adapter)
        throw CliError(kConfig, "train-cla: pivot must not carry an adapter (fixed pivot)");
    auto target_tok = load_tokenizer_checked(target_tok_path);
    auto pivot_tok = load_tokenizer_checked(pivot_tok_path);
    require_file(corpus_path);
    auto corpus = util::read_corpus_tsv(corpus_path);

    const std::uint64_t s = seed.value_or(cfg.seeds.front());
    if (!target.adapter) {
        num::RngState arng = num::RngState(s).derive("adapter-" + lang);
        target.attach_adapter(cfg.encoder.adapter_bottleneck, cfg.encoder.adapter_scale, arng);
    }
    train::TrainConfig tc = cfg.phase_train_config(cfg.cla, s);
    tc.adapter_lr = cfg.cla.lr;
    const auto res = train::run_cla_pair(pivot, pivot_tok, target, target_tok, corpus,
                                         lang_index_of(corpus, pivot_lang),
                                         lang_index_of(corpus, lang), tc,
                                         num::RngState(s).derive("cla-" + lang),
                                         index_range(corpus.items.size()), {});
    target.phase = "aligned";
    enc::save_model(target, out);
    std::printf("cla %s->%s: %ld steps, wrote %s\n", pivot_lang.c_str(), lang.c_str(), res.steps,
                out.c_str());
    return kOk;
}

int cmd_encode(const std::string& model_path, const std::string& tok_path,
               const std::string& map_path, const std::string& lang, const std::string& mode,
               const std::string& input, const std::string& out) {
    if (mode != "mono" && mode != "cross")
        throw CliError(kConfig, "encode: --mode must be mono or cross");
    const bool use_adapter = mode == "cross";

    enc::EncoderModel<float> model;
    tok::BpeModel tokenizer;
    if (!map_path.empty()) {
        auto langs = load_model_map(map_path);
        auto it = langs.find(lang);
        if (it == langs.end()) throw CliError(kConfig, "encode: language not in model map: " + lang);
        model = std::move(it->second.model);
        tokenizer = std::move(it->second.tokenizer);
    } else {
        if (model_path.empty() || tok_path.empty())
            throw CliError(kConfig, "encode: need --model and --tokenizer (or --model-map/--lang)");
        model = load_model_checked(model_path);
        tokenizer = load_tokenizer_checked(tok_path);
    }

    std::istream* in = &std::cin;
    std::ifstream fin;
    if (!input.empty() && input != "-") {
        require_file(input);
        fin.open(input);
        in = &fin;
    }
    std::ostream* os = &std::cout;
    std::ofstream fout;
    if (!out.empty()) {
        fout.open(out, std::ios::binary);
        if (!fout) throw CliError(kInternal, "encode: cannot open " + out);
        os = &fout;
    }

    num::NoGradGuard guard;
    std::string line;
    char buf[32];
    while (std::getline(*in, line)) {
        if (line.empty()) continue;
        const auto ids = tok::encode(tokenizer, line, model.config.max_len);
        const auto emb = model.forward_embed(ids, use_adapter);
        for (std::size_t j = 0; j < emb.numel(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.8g", static_cast<double>((*emb.data)[j]));
            (*os) << (j ? " " : "") << buf;
        }
        (*os) << '\n';
    }
    return kOk;
}

int cmd_eval(const std::string& task, const std::string& map_path,
             const std::string& benchmark_path, const std::string& mode, const std::string& out,
             const std::string& regime, const std::string& base_variant, long seed) {
    if (mode != "mono" && mode != "cross")
        throw CliError(kConfig, "eval: --mode must be mono or cross");
    auto langs = load_model_map(map_path);
    auto embedders = embedders_of(langs);
    const eval::EvalMode m = mode == "mono" ? eval::EvalMode::mono : eval::EvalMode::cross;

    eval::EvalResult res;
    std::string metric;
    require_file(benchmark_path);
    if (task == "sts") {
        res = eval::eval_sts(embedders, util::read_sts_tsv(benchmark_path), m);
        metric = "spearman_x100";
    } else {
        res = eval::eval_mcqa(embedders, util::read_mcqa_tsv(benchmark_path), m);
        metric = "accuracy";
    }
    for (const auto& note : res.notes) std::fprintf(stderr, "note: %s\n", note.c_str());

    if (out.empty()) {
        for (const auto& s : res.scores) std::printf("%s\t%.6f\n", s.key.c_str(), s.value);
    } else {
        eval::EvalReport report;
        for (const auto& s : res.scores)
            report.rows.push_back({regime, base_variant, task, mode, s.key, seed, metric,
                                   s.value});
        eval::write_report_csv(report, out);
        std::printf("wrote %zu rows to %s\n", report.rows.size(), out.c_str());
    }
    return kOk;
}

int cmd_grad_check(double h) {
    enc::EncoderConfig cfg;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.d_model = 16;
    cfg.d_ff = 32;
    cfg.max_len = 24;
    cfg.vocab_size = 24;
    cfg.adapter_bottleneck = 8;
    num::RngState rng(12345);
    auto model = enc::EncoderModel<double>::random_init(cfg, rng);
    for (auto* p : model.parameters()) p->set_requires_grad(true);

    train::MaskedBatch batch;
    batch.corrupted = {{tok::kCls, tok::kMask, 9, tok::kMask, tok::kSep},
                       {tok::kCls, 6, tok::kMask, tok::kSep}};
    batch.positions = {{1, 3}, {2}};
    batch.originals = {{7, 12}, {9}};
    const double mlm_err = num::grad_check(
        [&]() { return train::mlm_loss<double>(model, batch); }, model.parameters(), h);

    const std::vector<std::vector<int>> anchors = {{tok::kCls, 6, 8, tok::kSep},
                                                   {tok::kCls, 10, 12, tok::kSep}};
    const std::vector<std::vector<int>> positives = {{tok::kCls, 6, 9, tok::kSep},
                                                     {tok::kCls, 10, 13, tok::kSep}};
    const double mnrl_err = num::grad_check(
        [&]() {
            std::vector<num::Tensor<double>> a, p;
            for (const auto& ids : anchors) a.push_back(model.forward_embed(ids, false));
            for (const auto& ids : positives) p.push_back(model.forward_embed(ids, false));
            return train::mnrl_loss<double>(num::concat_rows(a), num::concat_rows(p), nullptr,
                                            20.0);
        },
        model.parameters(), h);

    std::printf("mlm  grad check: max relative error %.3e\n", mlm_err);
    std::printf("mnrl grad check: max relative error %.3e\n", mnrl_err);
    const bool ok = mlm_err < 1e-4 && mnrl_err < 1e-4;
    std::printf("%s\n", ok ? "PASS" : "FAIL");
    return ok ? kOk : kInternal;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mse-lab: modular multilingual sentence encoder laboratory"};
    app.require_subcommand(1);

    std::string config_path, out_dir, out_file, model_path, tok_path, base_path, base_tok_path;
    std::string corpus_path, heldout_path, lang, pivot_lang, mode, map_path, benchmark_path;
    std::string target_path, target_tok_path, pivot_path, pivot_tok_path, input_path;
    std::string regime_tag = "adhoc", variant_tag = "adhoc";
    std::vector<std::string> inputs;
    int vocab_size = 512, steps = 0, jobs = 0;
    long seed_tag = 0;
    double h = 1e-5;
    std::uint64_t seed_val = 0;
    bool seed_set = false;
    auto add_seed = [&](CLI::App* cmd) {
        cmd->add_option("--seed", seed_val, "seed override")->each([&](const std::string&) {
            seed_set = true;
        });
    };
    auto seed_opt = [&]() -> std::optional<std::uint64_t> {
        return seed_set ? std::optional<std::uint64_t>(seed_val) : std::nullopt;
    };

    auto* gen = app.add_subcommand("gen-data", "generate the synthetic corpora and benchmarks");
    gen->add_option("--config", config_path)->required();
    gen->add_option("--out", out_dir);
    add_seed(gen);

    auto* ttok = app.add_subcommand("train-tokenizer", "train a BPE tokenizer");
    ttok->add_option("--input", inputs, "input text file(s)")->required();
    ttok->add_option("--vocab-size", vocab_size)->required();
    ttok->add_option("--out", out_file)->required();

    auto* pre = app.add_subcommand("pretrain-base", "pretrain the shared multilingual base");
    pre->add_option("--config", config_path)->required();
    pre->add_option("--tokenizer", tok_path)->required();
    pre->add_option("--data", out_dir, "gen-data output directory")->required();
    pre->add_option("--out", out_file)->required();
    add_seed(pre);

    auto* tra = app.add_subcommand("transplant", "FOCUS-initialize a language-specific encoder");
    tra->add_option("--config", config_path)->required();
    tra->add_option("--base", base_path)->required();
    tra->add_option("--base-tokenizer", base_tok_path)->required();
    tra->add_option("--tokenizer", tok_path)->required();
    tra->add_option("--corpus", corpus_path)->required();
    tra->add_option("--lang", lang)->required();
    tra->add_option("--out", out_file)->required();

    auto* mlm = app.add_subcommand("adapt-mlm", "masked-language-model language adaptation");
    mlm->add_option("--config", config_path)->required();
    mlm->add_option("--model", model_path)->required();
    mlm->add_option("--tokenizer", tok_path)->required();
    mlm->add_option("--corpus", corpus_path)->required();
    mlm->add_option("--heldout", heldout_path);
    mlm->add_option("--steps", steps);
    mlm->add_option("--out", out_file)->required();
    add_seed(mlm);

    auto* sent = app.add_subcommand("train-sent", "contrastive sentence specialization");
    sent->add_option("--config", config_path)->required();
    sent->add_option("--model", model_path)->required();
    sent->add_option("--tokenizer", tok_path)->required();
    sent->add_option("--corpus", corpus_path)->required();
    sent->add_option("--mode", mode, "single_m|single_c|mono")->required();
    sent->add_option("--lang", lang);
    sent->add_option("--out", out_file)->required();
    add_seed(sent);

    auto* cla = app.add_subcommand("train-cla", "train a cross-lingual alignment adapter");
    cla->add_option("--config", config_path)->required();
    cla->add_option("--target", target_path)->required();
    cla->add_option("--target-tokenizer", target_tok_path)->required();
    cla->add_option("--pivot", pivot_path)->required();
    cla->add_option("--pivot-tokenizer", pivot_tok_path)->required();
    cla->add_option("--corpus", corpus_path)->required();
    cla->add_option("--pivot-lang", pivot_lang)->required();
    cla->add_option("--lang", lang)->required();
    cla->add_option("--out", out_file)->required();
    add_seed(cla);

    auto* enc_cmd = app.add_subcommand("encode", "embed sentences, one vector per line");
    enc_cmd->add_option("--model", model_path);
    enc_cmd->add_option("--tokenizer", tok_path);
    enc_cmd->add_option("--model-map", map_path);
    enc_cmd->add_option("--lang", lang);
    enc_cmd->add_option("--mode", mode, "mono (bypass adapters) or cross")->required();
    enc_cmd->add_option("--input", input_path, "input file, - for stdin");
    enc_cmd->add_option("--out", out_file);

    auto* ests = app.add_subcommand("eval-sts", "Spearman x100 on an STS benchmark");
    ests->add_option("--model-map", map_path)->required();
    ests->add_option("--benchmark", benchmark_path)->required();
    ests->add_option("--mode", mode)->required();
    ests->add_option("--out", out_file);
    ests->add_option("--regime", regime_tag);
    ests->add_option("--base-variant", variant_tag);
    ests->add_option("--seed-tag", seed_tag);

    auto* emcqa = app.add_subcommand("eval-mcqa", "accuracy on an MCQA benchmark");
    emcqa->add_option("--model-map", map_path)->required();
    emcqa->add_option("--benchmark", benchmark_path)->required();
    emcqa->add_option("--mode", mode)->required();
    emcqa->add_option("--out", out_file);
    emcqa->add_option("--regime", regime_tag);
    emcqa->add_option("--base-variant", variant_tag);
    emcqa->add_option("--seed-tag", seed_tag);

    auto* gc = app.add_subcommand("grad-check", "verify analytic gradients on a tiny model");
    gc->add_option("--step", h, "central-difference step");

    auto* run = app.add_subcommand("run-experiment", "full pipeline: data, training, evaluation");
    run->add_option("--config", config_path)->required();
    run->add_option("--out", out_dir);
    run->add_option("--jobs", jobs, "parallel per-language jobs (0 = auto)");
    add_seed(run);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::fprintf(stderr, "error: usage: %s\n", e.what());
        return kConfig;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(config_path, out_dir, seed_opt());
        if (ttok->parsed()) return cmd_train_tokenizer(inputs, vocab_size, out_file);
        if (pre->parsed())
            return cmd_pretrain_base(config_path, tok_path, out_dir, out_file, seed_opt());
        if (tra->parsed())
            return cmd_transplant(config_path, base_path, base_tok_path, tok_path, corpus_path,
                                  lang, out_file);
        if (mlm->parsed())
            return cmd_adapt_mlm(config_path, model_path, tok_path, corpus_path, heldout_path,
                                 steps, out_file, seed_opt());
        if (sent->parsed())
            return cmd_train_sent(config_path, model_path, tok_path, corpus_path, mode, lang,
                                  out_file, seed_opt());
        if (cla->parsed())
            return cmd_train_cla(config_path, target_path, target_tok_path, pivot_path,
                                 pivot_tok_path, corpus_path, pivot_lang, lang, out_file,
                                 seed_opt());
        if (enc_cmd->parsed())
            return cmd_encode(model_path, tok_path, map_path, lang, mode, input_path, out_file);
        if (ests->parsed())
            return cmd_eval("sts", map_path, benchmark_path, mode, out_file, regime_tag,
                            variant_tag, seed_tag);
        if (emcqa->parsed())
            return cmd_eval("mcqa", map_path, benchmark_path, mode, out_file, regime_tag,
                            variant_tag, seed_tag);
        if (gc->parsed()) return cmd_grad_check(h);
        if (run->parsed()) {
            cli::ExperimentConfig cfg = load_config_checked(config_path);
            cli::RunOptions opts;
            opts.out_dir = default_out_dir(out_dir);
            opts.jobs = jobs;
            opts.seed_override = seed_opt();
            const auto res = cli::run_experiment(cfg, opts);
            std::printf("report: %s\nmanifest: %s\n", res.report_path.c_str(),
                        res.manifest_path.c_str());
            return kOk;
        }
    } catch (const CliError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.code;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: internal: %s\n", e.what());
        return kInternal;
    }
    return kConfig;
}
