#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mselab/encoder/config.hpp"
#include "mselab/synthlang/concepts.hpp"
#include "mselab/training/trainer.hpp"

namespace mse::cli {

struct DataConfig {
    int mlm_sentences = 3000;
    int mlm_heldout = 64;
    int low_resource_divisor = 10;
    int items = 1200;
    int heldout_items = 96;
    double hard_negative_fraction = 0.5;
    double translation_noise = 0.1;
    int sts_mono_per_lang = 120;
    int sts_cross_per_direction = 40;
    std::vector<double> sts_levels = {0.0, 0.25, 0.5, 0.75, 1.0};
    int mcqa_mono_items = 150;
    int mcqa_cross_items = 150;
};

struct PhaseConfig {
    int steps = 0;        // MLM-style phases
    int epochs = 1;       // contrastive phases
    int batch_size = 32;
    float lr = 1e-3f;
    int max_len = 64;
    int items = 0;  // contrastive subset size; 0 = all
};

struct AblationConfig {
    bool independent_init = true;
    bool nonparallel_pivot = true;
    std::vector<std::string> alignment_strategies = {"bilingual_to_pivot", "all_pairs",
                                                     "all_pairs_incl_pivot"};
};

struct ExperimentConfig {
    std::vector<std::string> languages = {"l0", "l1", "l2", "l3", "l4"};
    std::string pivot = "l0";
    std::vector<std::string> low_resource = {"l3", "l4"};
    std::vector<std::uint64_t> seeds = {1, 2, 3};

    synth::ConceptInventory inventory;
    enc::EncoderConfig encoder;
    DataConfig data;

    int lang_vocab_size = 384;
    int base_vocab_size = 1536;
    // Oversample low-resource languages when training the shared tokenizer
    // (alpha-smoothing stand-in); the MLM corpora themselves stay skewed.
    bool balanced_tokenizer_corpus = true;
    int aux_dim = 32;
    int aux_window = 5;

    std::string base_variant = "mlm_plus_contrastive";
    int base_mlm_steps = 400;
    int base_contrastive_epochs = 2;

    PhaseConfig mlm;          // per-language adaptation
    PhaseConfig contrastive;  // sentence specialization
    PhaseConfig cla;          // adapter alignment

    float mnrl_scale = 20.0f;
    float mask_prob = 0.15f;
    int mlm_max_len = 48;

    std::vector<std::string> regimes = {"single_m", "single_c", "single_mc", "multi_m",
                                        "multi_mc"};
    AblationConfig ablations;
    bool eval_mcqa = true;
    bool eval_mcqa_cross = true;

    std::size_t pivot_index() const;
    bool is_low_resource(const std::string& lang) const;
    void validate() const;

    // The TrainConfig handed to core phases, with per-phase overrides applied.
    train::TrainConfig phase_train_config(const PhaseConfig& phase, std::uint64_t seed) const;
};

ExperimentConfig load_experiment_config(const std::string& path);
std::string experiment_config_json(const ExperimentConfig& cfg);  // canonical echo

}  // namespace mse::cli
