#include "experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "json.hpp"
#include "mselab/eval/harness.hpp"
#include "mselab/synthlang/benchmark_gen.hpp"
#include "mselab/tokenizer/bpe.hpp"
#include "mselab/training/trainer.hpp"
#include "mselab/transplant/focus.hpp"
#include "mselab/util/sha256.hpp"
#include "mselab/util/tsv.hpp"

namespace mse::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

constexpr const char* kToolVersion = "0.1.0";

// ----------------------------- bookkeeping -----------------------------

class RunLog {
  public:
    explicit RunLog(bool quiet) : quiet_(quiet) {}

    void phase(const std::string& name, double seconds) {
        std::lock_guard<std::mutex> lock(mu_);
        phases_.emplace_back(name, seconds);
        if (!quiet_) std::fprintf(stderr, "[mse-lab] %-42s %8.2fs\n", name.c_str(), seconds);
    }

    void artifact(const std::string& path) {
        std::lock_guard<std::mutex> lock(mu_);
        artifacts_.push_back(path);
    }

    std::vector<std::pair<std::string, double>> phases() const { return phases_; }
    std::vector<std::string> artifacts() const { return artifacts_; }

  private:
    bool quiet_;
    mutable std::mutex mu_;
    std::vector<std::pair<std::string, double>> phases_;
    std::vector<std::string> artifacts_;
};

class PhaseTimer {
  public:
    PhaseTimer(RunLog& log, std::string name) : log_(log), name_(std::move(name)), t0_(Clock::now()) {}
    ~PhaseTimer() {
        const double s = std::chrono::duration<double>(Clock::now() - t0_).count();
        log_.phase(name_, s);
    }

  private:
    RunLog& log_;
    std::string name_;
    Clock::time_point t0_;
};

void parallel_over(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::mutex err_mu;
    std::exception_ptr err;
    const int threads = std::min<int>(jobs, static_cast<int>(n));
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mu);
                    if (!err) err = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

// ----------------------------- per-seed data -----------------------------

struct SeedData {
    std::vector<synth::LanguageSpec> family;
    std::vector<std::vector<std::string>> mlm_train;    // [lang]
    std::vector<std::vector<std::string>> mlm_heldout;  // [lang]
    std::vector<std::string> mixed_mlm;
    synth::RealizedCorpus corpus;  // train items then held-out items
    std::vector<std::size_t> train_items, heldout_items;
    synth::RealizedCorpus pivot_alt;  // different item sample (non-parallel)
    std::vector<std::size_t> alt_items;
    synth::StsBenchmark sts;
    synth::McqaBenchmark mcqa;
};

SeedData generate_data(const ExperimentConfig& cfg, std::uint64_t seed, const fs::path& dir,
                       RunLog& log) {
    PhaseTimer timer(log, "seed" + std::to_string(seed) + "/gen_data");
    SeedData d;
    num::RngState root(seed);
    const std::size_t pivot = cfg.pivot_index();

    d.family = synth::make_language_family(root.derive("family").seed, cfg.languages,
                                           cfg.inventory, pivot);

    d.mlm_train.resize(cfg.languages.size());
    d.mlm_heldout.resize(cfg.languages.size());
    for (std::size_t l = 0; l < cfg.languages.size(); ++l) {
        const bool lowres = cfg.is_low_resource(cfg.languages[l]);
        const int n = std::max(32, lowres ? cfg.data.mlm_sentences / cfg.data.low_resource_divisor
                                          : cfg.data.mlm_sentences);
        auto lines = synth::build_mlm_corpus(cfg.inventory, d.family[l], l == pivot,
                                             n + cfg.data.mlm_heldout, cfg.data.translation_noise,
                                             root.derive("mlm-" + cfg.languages[l]));
        d.mlm_heldout[l].assign(lines.end() - cfg.data.mlm_heldout, lines.end());
        lines.resize(static_cast<std::size_t>(n));
        d.mlm_train[l] = std::move(lines);
        util::write_lines(d.mlm_train[l], (dir / ("mlm_" + cfg.languages[l] + ".txt")).string());
        util::write_lines(d.mlm_heldout[l],
                          (dir / ("mlm_heldout_" + cfg.languages[l] + ".txt")).string());
        log.artifact((dir / ("mlm_" + cfg.languages[l] + ".txt")).string());
        log.artifact((dir / ("mlm_heldout_" + cfg.languages[l] + ".txt")).string());
    }
    // Interleaved mixed corpus: low-resource languages appear at their
    // (smaller) natural share.
    for (std::size_t l = 0; l < cfg.languages.size(); ++l)
        for (const auto& line : d.mlm_train[l]) d.mixed_mlm.push_back(line);

    const int total_items = cfg.data.items + cfg.data.heldout_items;
    auto concepts = synth::build_corpus(cfg.inventory, total_items,
                                        cfg.data.hard_negative_fraction, root.derive("corpus"));
    d.corpus = synth::realize_corpus(concepts, d.family, pivot, cfg.inventory,
                                     cfg.data.translation_noise, root.derive("corpus-realize"));
    for (int i = 0; i < cfg.data.items; ++i) d.train_items.push_back(static_cast<std::size_t>(i));
    for (int i = cfg.data.items; i < total_items; ++i)
        d.heldout_items.push_back(static_cast<std::size_t>(i));

    // Different-domain paraphrase set for the pivot ablation: anchors drawn
    // from a restricted topical subdomain of the concept inventory.
    const int alt_domain = std::max(25, (cfg.inventory.n_groups * 7) / 10);
    auto alt_concepts = synth::build_corpus(cfg.inventory, cfg.data.items,
                                            cfg.data.hard_negative_fraction,
                                            root.derive("pivot-alt"), alt_domain);
    d.pivot_alt = synth::realize_corpus(alt_concepts, d.family, pivot, cfg.inventory,
                                        cfg.data.translation_noise,
                                        root.derive("pivot-alt-realize"));
    for (int i = 0; i < cfg.data.items; ++i) d.alt_items.push_back(static_cast<std::size_t>(i));

    d.sts = synth::build_sts(cfg.inventory, d.family, cfg.data.sts_levels,
                             cfg.data.sts_mono_per_lang, cfg.data.sts_cross_per_direction,
                             root.derive("sts").seed);
    d.mcqa = synth::build_mcqa(cfg.inventory, d.family, cfg.data.mcqa_mono_items,
                               cfg.data.mcqa_cross_items, root.derive("mcqa").seed);

    // Train/held-out corpus files split by item groups.
    synth::RealizedCorpus train_part, held_part;
    train_part.langs = held_part.langs = d.corpus.langs;
    for (std::size_t i : d.train_items) train_part.items.push_back(d.corpus.items[i]);
    for (std::size_t i : d.heldout_items) held_part.items.push_back(d.corpus.items[i]);
    util::write_corpus_tsv(train_part, (dir / "corpus_train.tsv").string());
    util::write_corpus_tsv(held_part, (dir / "corpus_heldout.tsv").string());
    util::write_corpus_tsv(d.pivot_alt, (dir / "pivot_alt.tsv").string());
    util::write_sts_tsv(d.sts, (dir / "sts.tsv").string());
    util::write_mcqa_tsv(d.mcqa, (dir / "mcqa.tsv").string());
    for (const char* f : {"corpus_train.tsv", "corpus_heldout.tsv", "pivot_alt.tsv", "sts.tsv",
                          "mcqa.tsv"})
        log.artifact((dir / f).string());
    return d;
}

// ----------------------------- helpers -----------------------------

eval::EmbedFn make_embedder(const enc::EncoderModel<float>* model, const tok::BpeModel* tokenizer) {
    return [model, tokenizer](const std::string& text, bool use_adapter) {
        num::NoGradGuard guard;
        const auto ids = tok::encode(*tokenizer, text, model->config.max_len);
        const auto emb = model->forward_embed(ids, use_adapter);
        return *emb.data;
    };
}

struct SeedModels {
    tok::BpeModel base_tok;
    std::vector<tok::BpeModel> lang_toks;  // [lang]
    enc::EncoderModel<float> base;
    std::map<std::string, enc::EncoderModel<float>> singles;       // regime -> model
    std::vector<enc::EncoderModel<float>> multi_m;                 // [lang]
    std::vector<enc::EncoderModel<float>> multi_post_mlm;          // [lang], pre-contrastive
    std::vector<enc::EncoderModel<float>> multi_mc;                // [lang] (pivot: no adapter)
    std::map<std::string, std::vector<enc::EncoderModel<float>>> strategy_models;
    std::vector<enc::EncoderModel<float>> independent;  // [lang]
    std::optional<enc::EncoderModel<float>> pivot_alt_model;
};

void save_and_track(const enc::EncoderModel<float>& model, const fs::path& path, RunLog& log) {
    enc::save_model(model, path.string());
    log.artifact(path.string());
    log.artifact(path.string() + ".json");
}

std::vector<std::size_t> cla_item_subset(const ExperimentConfig& cfg,
                                         const std::vector<std::size_t>& train_items) {
    if (cfg.cla.items <= 0 || static_cast<std::size_t>(cfg.cla.items) >= train_items.size())
        return train_items;
    return std::vector<std::size_t>(train_items.begin(), train_items.begin() + cfg.cla.items);
}

// ----------------------------- seed pipeline -----------------------------

SeedModels train_seed(const ExperimentConfig& cfg, const SeedData& d, std::uint64_t seed,
                      const fs::path& dir, int jobs, RunLog& log) {
    const std::size_t n_langs = cfg.languages.size();
    const std::size_t pivot = cfg.pivot_index();
    const std::string tag = "seed" + std::to_string(seed) + "/";
    num::RngState root(seed);

    SeedModels m;

    {
        PhaseTimer t(log, tag + "base_tokenizer");
        std::vector<std::string> tok_corpus;
        if (cfg.balanced_tokenizer_corpus) {
            for (std::size_t l = 0; l < n_langs; ++l) {
                const int reps =
                    cfg.is_low_resource(cfg.languages[l]) ? cfg.data.low_resource_divisor : 1;
                for (int r = 0; r < reps; ++r)
                    for (const auto& line : d.mlm_train[l]) tok_corpus.push_back(line);
            }
        } else {
            tok_corpus = d.mixed_mlm;
        }
        m.base_tok = tok::train_bpe(tok_corpus, cfg.base_vocab_size);
        tok::save_bpe(m.base_tok, (dir / "tok_base.txt").string());
        log.artifact((dir / "tok_base.txt").string());
    }

    {
        PhaseTimer t(log, tag + "pretrain_base");
        enc::EncoderConfig base_cfg = cfg.encoder;
        base_cfg.vocab_size = m.base_tok.vocab.size();
        // Restrict the contrastive warm phase to the train items.
        synth::RealizedCorpus train_part;
        train_part.langs = d.corpus.langs;
        for (std::size_t i : d.train_items) train_part.items.push_back(d.corpus.items[i]);
        train::TrainConfig mlm_tc = cfg.phase_train_config(cfg.mlm, seed);
        train::TrainConfig con_tc = cfg.phase_train_config(cfg.contrastive, seed);
        con_tc.epochs = cfg.base_contrastive_epochs;
        m.base = train::pretrain_base(base_cfg, m.base_tok, d.mixed_mlm, train_part,
                                      train::parse_base_variant(cfg.base_variant), mlm_tc,
                                      cfg.base_mlm_steps, con_tc, root.derive("base"));
        save_and_track(m.base, dir / "base.bin", log);
    }

    // --- Single regimes on the shared model ---
    const bool want_single_m = std::count(cfg.regimes.begin(), cfg.regimes.end(), "single_m");
    const bool want_single_c = std::count(cfg.regimes.begin(), cfg.regimes.end(), "single_c");
    const bool want_single_mc = std::count(cfg.regimes.begin(), cfg.regimes.end(), "single_mc");

    // Single regimes train on the concatenation of every language's
    // paraphrase data, so one logical epoch spans n_langs passes.
    train::TrainConfig single_cc = cfg.phase_train_config(cfg.contrastive, seed);
    single_cc.epochs = cfg.contrastive.epochs * static_cast<int>(n_langs);

    if (want_single_m || want_single_mc) {
        PhaseTimer t(log, tag + "single_m");
        auto model = m.base.clone();
        train::run_contrastive_single(model, m.base_tok, d.corpus,
                                      train::SingleMode::monolingual_batches, single_cc,
                                      root.derive("single_m"), d.train_items, d.heldout_items);
        model.phase = "contrastive";
        save_and_track(model, dir / "single_m.bin", log);
        m.singles.emplace("single_m", std::move(model));
    }
    if (want_single_c) {
        PhaseTimer t(log, tag + "single_c");
        auto model = m.base.clone();
        train::run_contrastive_single(model, m.base_tok, d.corpus,
                                      train::SingleMode::crosslingual_pairs, single_cc,
                                      root.derive("single_c"), d.train_items, d.heldout_items);
        model.phase = "contrastive";
        save_and_track(model, dir / "single_c.bin", log);
        m.singles.emplace("single_c", std::move(model));
    }
    if (want_single_mc) {
        PhaseTimer t(log, tag + "single_mc");
        auto model = m.singles.at("single_m").clone();
        train::run_contrastive_single(model, m.base_tok, d.corpus,
                                      train::SingleMode::crosslingual_pairs, single_cc,
                                      root.derive("single_mc"), d.train_items, d.heldout_items);
        model.phase = "contrastive";
        save_and_track(model, dir / "single_mc.bin", log);
        m.singles.emplace("single_mc", std::move(model));
    }

    // --- Multi pipeline: tokenizer, transplant, MLM, contrastive per language ---
    const bool want_multi = std::count(cfg.regimes.begin(), cfg.regimes.end(), "multi_m") ||
                            std::count(cfg.regimes.begin(), cfg.regimes.end(), "multi_mc");
    m.lang_toks.resize(n_langs);
    m.multi_m.resize(n_langs);
    m.multi_post_mlm.resize(n_langs);
    if (want_multi) {
        parallel_over(n_langs, jobs, [&](std::size_t l) {
            const std::string& lang = cfg.languages[l];
            const auto t0 = Clock::now();
            m.lang_toks[l] = tok::train_bpe(d.mlm_train[l], cfg.lang_vocab_size);
            tok::save_bpe(m.lang_toks[l], (dir / ("tok_" + lang + ".txt")).string());
            log.artifact((dir / ("tok_" + lang + ".txt")).string());

            auto model = focus::transplant_encoder(m.base, m.base_tok, m.lang_toks[l],
                                                   d.mlm_train[l], cfg.aux_dim, cfg.aux_window,
                                                   lang);
            const double t_trans = std::chrono::duration<double>(Clock::now() - t0).count();
            log.phase(tag + "multi/" + lang + "/transplant", t_trans);

            const auto t1 = Clock::now();
            train::TrainConfig mc = cfg.phase_train_config(cfg.mlm, seed);
            train::run_mlm(model, m.lang_toks[l], d.mlm_train[l], mc, cfg.mlm.steps,
                           root.derive("multi-mlm-" + lang), d.mlm_heldout[l]);
            model.phase = "mlm";
            m.multi_post_mlm[l] = model.clone();
            log.phase(tag + "multi/" + lang + "/mlm",
                      std::chrono::duration<double>(Clock::now() - t1).count());

            const auto t2 = Clock::now();
            train::TrainConfig cc = cfg.phase_train_config(cfg.contrastive, seed);
            train::run_contrastive_mono(model, m.lang_toks[l], d.corpus, l, cc,
                                        root.derive("multi-sent-" + lang), d.train_items,
                                        d.heldout_items);
            model.phase = "contrastive";
            save_and_track(model, dir / ("multi_m_" + lang + ".bin"), log);
            m.multi_m[l] = std::move(model);
            log.phase(tag + "multi/" + lang + "/contrastive",
                      std::chrono::duration<double>(Clock::now() - t2).count());
        });
    }

    // --- Cross-lingual alignment (bilingual-to-pivot default for multi_mc) ---
    const auto cla_items = cla_item_subset(cfg, d.train_items);
    if (std::count(cfg.regimes.begin(), cfg.regimes.end(), "multi_mc")) {
        PhaseTimer t(log, tag + "cla_bilingual");
        m.multi_mc.resize(n_langs);
        for (std::size_t l = 0; l < n_langs; ++l) {
            if (l == pivot) {
                m.multi_mc[l] = m.multi_m[l].clone();  // pivot keeps no adapter
                continue;
            }
            auto model = m.multi_m[l].clone();
            num::RngState arng = root.derive("adapter-" + cfg.languages[l]);
            model.attach_adapter(cfg.encoder.adapter_bottleneck, cfg.encoder.adapter_scale, arng);
            train::TrainConfig cc = cfg.phase_train_config(cfg.cla, seed);
            cc.adapter_lr = cfg.cla.lr;
            train::run_cla_pair(m.multi_m[pivot], m.lang_toks[pivot], model, m.lang_toks[l],
                                d.corpus, pivot, l, cc, root.derive("cla-" + cfg.languages[l]),
                                cla_items, d.heldout_items);
            model.phase = "aligned";
            save_and_track(model, dir / ("multi_mc_" + cfg.languages[l] + ".bin"), log);
            m.multi_mc[l] = std::move(model);
        }
    }

    // --- Alignment strategy ablation ---
    for (const auto& strategy_name : cfg.ablations.alignment_strategies) {
        const auto strategy = train::parse_align_strategy(strategy_name);
        if (strategy == train::AlignStrategy::bilingual_to_pivot) continue;  // = multi_mc
        if (m.multi_m.empty() || !want_multi) continue;
        PhaseTimer t(log, tag + "cla_" + strategy_name);
        const auto plan = train::plan_alignment(cfg.languages, cfg.pivot, strategy);
        std::vector<enc::EncoderModel<float>> models(n_langs);
        for (std::size_t l = 0; l < n_langs; ++l) models[l] = m.multi_m[l].clone();
        for (const auto& lang : plan.adapter_langs) {
            const std::size_t l = static_cast<std::size_t>(
                std::find(cfg.languages.begin(), cfg.languages.end(), lang) -
                cfg.languages.begin());
            num::RngState arng = root.derive("adapter-" + strategy_name + "-" + lang);
            models[l].attach_adapter(cfg.encoder.adapter_bottleneck, cfg.encoder.adapter_scale,
                                     arng);
        }
        for (const auto& [lang_a, lang_b] : plan.jobs) {
            const std::size_t la = static_cast<std::size_t>(
                std::find(cfg.languages.begin(), cfg.languages.end(), lang_a) -
                cfg.languages.begin());
            const std::size_t lb = static_cast<std::size_t>(
                std::find(cfg.languages.begin(), cfg.languages.end(), lang_b) -
                cfg.languages.begin());
            train::TrainConfig cc = cfg.phase_train_config(cfg.cla, seed);
            cc.adapter_lr = cfg.cla.lr;
            train::run_cla_pair(models[la], m.lang_toks[la], models[lb], m.lang_toks[lb],
                                d.corpus, la, lb, cc,
                                root.derive("cla-" + strategy_name + "-" + lang_a + "-" + lang_b),
                                cla_items, d.heldout_items);
        }
        m.strategy_models[strategy_name] = std::move(models);
    }

    // --- Independent initialization ablation ---
    if (cfg.ablations.independent_init && want_multi) {
        m.independent.resize(n_langs);
        parallel_over(n_langs, jobs, [&](std::size_t l) {
            const std::string& lang = cfg.languages[l];
            const auto t0 = Clock::now();
            enc::EncoderConfig icfg = cfg.encoder;
            icfg.vocab_size = m.lang_toks[l].vocab.size();
            num::RngState irng = root.derive("indep-init-" + lang);
            auto model = enc::EncoderModel<float>::random_init(icfg, irng);
            model.lang = lang;
            train::TrainConfig mc = cfg.phase_train_config(cfg.mlm, seed);
            train::run_mlm(model, m.lang_toks[l], d.mlm_train[l], mc, cfg.mlm.steps,
                           root.derive("indep-mlm-" + lang), d.mlm_heldout[l]);
            train::TrainConfig cc = cfg.phase_train_config(cfg.contrastive, seed);
            train::run_contrastive_mono(model, m.lang_toks[l], d.corpus, l, cc,
                                        root.derive("indep-sent-" + lang), d.train_items,
                                        d.heldout_items);
            model.phase = "contrastive";
            save_and_track(model, dir / ("indep_" + lang + ".bin"), log);
            m.independent[l] = std::move(model);
            log.phase(tag + "independent/" + lang,
                      std::chrono::duration<double>(Clock::now() - t0).count());
        });
    }

    // --- Non-multi-parallel pivot ablation ---
    if (cfg.ablations.nonparallel_pivot && want_multi) {
        PhaseTimer t(log, tag + "nonparallel_pivot");
        auto model = m.multi_post_mlm[pivot].clone();
        train::TrainConfig cc = cfg.phase_train_config(cfg.contrastive, seed);
        train::run_contrastive_mono(model, m.lang_toks[pivot], d.pivot_alt, pivot, cc,
                                    root.derive("pivot-alt-sent"), d.alt_items, {});
        model.phase = "contrastive";
        save_and_track(model, dir / "pivot_alt.bin", log);
        m.pivot_alt_model = std::move(model);
    }

    return m;
}

// ----------------------------- evaluation -----------------------------

void add_rows(eval::EvalReport& report, const std::string& regime,
              const std::string& base_variant, const std::string& task, const std::string& mode,
              long seed, const std::string& metric, const eval::EvalResult& res) {
    for (const auto& s : res.scores)
        report.rows.push_back({regime, base_variant, task, mode, s.key,
                               seed, metric, s.value});
}

void eval_regime(eval::EvalReport& report, const ExperimentConfig& cfg, const SeedData& d,
                 const std::map<std::string, eval::EmbedFn>& embedders,
                 const std::string& regime, long seed, bool with_mcqa, bool sts_mono,
                 bool sts_cross) {
    if (sts_mono)
        add_rows(report, regime, cfg.base_variant, "sts", "mono", seed, "spearman_x100",
                 eval::eval_sts(embedders, d.sts, eval::EvalMode::mono));
    if (sts_cross)
        add_rows(report, regime, cfg.base_variant, "sts", "cross", seed, "spearman_x100",
                 eval::eval_sts(embedders, d.sts, eval::EvalMode::cross));
    if (with_mcqa && cfg.eval_mcqa) {
        add_rows(report, regime, cfg.base_variant, "mcqa", "mono", seed, "accuracy",
                 eval::eval_mcqa(embedders, d.mcqa, eval::EvalMode::mono));
        if (cfg.eval_mcqa_cross)
            add_rows(report, regime, cfg.base_variant, "mcqa", "cross", seed, "accuracy",
                     eval::eval_mcqa(embedders, d.mcqa, eval::EvalMode::cross));
    }
}

void eval_seed(eval::EvalReport& report, const ExperimentConfig& cfg, const SeedData& d,
               SeedModels& m, std::uint64_t seed, RunLog& log) {
    PhaseTimer t(log, "seed" + std::to_string(seed) + "/eval");
    const auto s = static_cast<long>(seed);
    const std::size_t n_langs = cfg.languages.size();

    auto shared_map = [&](const enc::EncoderModel<float>& model) {
        std::map<std::string, eval::EmbedFn> out;
        for (const auto& lang : cfg.languages) out[lang] = make_embedder(&model, &m.base_tok);
        return out;
    };
    auto multi_map = [&](const std::vector<enc::EncoderModel<float>>& models) {
        std::map<std::string, eval::EmbedFn> out;
        for (std::size_t l = 0; l < n_langs; ++l)
            out[cfg.languages[l]] = make_embedder(&models[l], &m.lang_toks[l]);
        return out;
    };

    eval_regime(report, cfg, d, shared_map(m.base), "base", s, true, true, true);
    for (const auto& [name, model] : m.singles)
        eval_regime(report, cfg, d, shared_map(model), name, s, true, true, true);
    if (!m.multi_m.empty() && std::count(cfg.regimes.begin(), cfg.regimes.end(), "multi_m"))
        eval_regime(report, cfg, d, multi_map(m.multi_m), "multi_m", s, true, true, true);
    if (!m.multi_mc.empty())
        eval_regime(report, cfg, d, multi_map(m.multi_mc), "multi_mc", s, true, true, true);
    for (auto& [strategy, models] : m.strategy_models)
        eval_regime(report, cfg, d, multi_map(models), "multi_mc_" + strategy, s, false, false,
                    true);
    if (!m.independent.empty())
        eval_regime(report, cfg, d, multi_map(m.independent), "independent_init", s, false, true,
                    true);
    if (m.pivot_alt_model) {
        auto map = multi_map(m.multi_m);
        map[cfg.pivot] = make_embedder(&*m.pivot_alt_model, &m.lang_toks[cfg.pivot_index()]);
        eval_regime(report, cfg, d, map, "nonparallel_pivot", s, false, true, true);
    }
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg_in, const RunOptions& opts) {
    ExperimentConfig cfg = cfg_in;
    if (opts.seed_override) cfg.seeds = {*opts.seed_override};
    cfg.validate();

    const fs::path out(opts.out_dir);
    fs::create_directories(out);
    const int jobs = opts.jobs > 0
                         ? opts.jobs
                         : std::max(1, std::min(4, static_cast<int>(
                                                      std::thread::hardware_concurrency())));

    RunLog log(opts.quiet);
    eval::EvalReport report;
    std::mutex report_mu;
    const int outer = std::min<int>(jobs, static_cast<int>(cfg.seeds.size()));
    const int inner = std::max(1, jobs / std::max(1, outer));
    parallel_over(cfg.seeds.size(), outer, [&](std::size_t si) {
        const std::uint64_t seed = cfg.seeds[si];
        const fs::path seed_dir = out / ("seed" + std::to_string(seed));
        fs::create_directories(seed_dir / "data");
        SeedData data = generate_data(cfg, seed, seed_dir / "data", log);
        SeedModels models = train_seed(cfg, data, seed, seed_dir, inner, log);
        eval::EvalReport seed_report;
        eval_seed(seed_report, cfg, data, models, seed, log);
        std::lock_guard<std::mutex> lock(report_mu);
        report.rows.insert(report.rows.end(), seed_report.rows.begin(), seed_report.rows.end());
    });

    const fs::path report_path = out / "report.csv";
    eval::write_report_csv(report, report_path.string());
    log.artifact(report_path.string());

    // Manifest: config echo, wall times, artifact digests.
    json manifest;
    manifest["tool"] = "mse-lab";
    manifest["version"] = kToolVersion;
    manifest["config"] = json::parse(experiment_config_json(cfg));
    json phases = json::array();
    auto phase_list = log.phases();
    std::sort(phase_list.begin(), phase_list.end());
    for (const auto& [name, seconds] : phase_list)
        phases.push_back({{"name", name}, {"seconds", seconds}});
    manifest["phases"] = phases;
    json artifacts = json::array();
    auto artifact_list = log.artifacts();
    std::sort(artifact_list.begin(), artifact_list.end());
    for (const auto& path : artifact_list) {
        artifacts.push_back({{"path", fs::relative(path, out).string()},
                             {"sha256", util::sha256_file(path)}});
    }
    manifest["artifacts"] = artifacts;
    manifest["report"] = "report.csv";

    const fs::path manifest_path = out / "manifest.json";
    std::ofstream mf(manifest_path);
    mf << manifest.dump(2) << '\n';
    mf.close();

    verify_manifest(manifest_path.string());
    return {report_path.string(), manifest_path.string()};
}

void verify_manifest(const std::string& manifest_path) {
    std::ifstream f(manifest_path);
    if (!f) throw std::runtime_error("manifest: cannot open " + manifest_path);
    json manifest;
    f >> manifest;
    const fs::path base = fs::path(manifest_path).parent_path();
    for (const auto& a : manifest.at("artifacts")) {
        const std::string rel = a.at("path").get<std::string>();
        const std::string want = a.at("sha256").get<std::string>();
        const std::string got = util::sha256_file((base / rel).string());
        if (got != want)
            throw std::runtime_error("manifest: digest mismatch for " + rel);
    }
}

}  // namespace mse::cli
