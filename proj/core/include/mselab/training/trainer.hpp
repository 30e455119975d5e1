#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mselab/encoder/model.hpp"
#include "mselab/synthlang/benchmark_gen.hpp"
#include "mselab/tokenizer/bpe.hpp"
#include "mselab/training/masking.hpp"

namespace mse::train {

struct TrainConfig {
    int batch_size = 128;
    float lr = 2e-5f;          // encoder phases
    float adapter_lr = 1e-4f;  // CLA adapters
    int epochs = 1;
    int max_len = 128;      // contrastive sequence length
    int mlm_max_len = 256;  // MLM sequence length
    float mnrl_scale = 20.0f;
    float mask_prob = 0.15f;
    std::uint64_t seed = 0;
    int mlm_steps = 2000;
    double clip_norm = 1.0;

    void validate() const;
};

enum class Regime { single_m, single_c, single_mc, multi_m, multi_mc };
enum class BaseVariant { mlm_only, mlm_plus_contrastive };
enum class AlignStrategy { bilingual_to_pivot, all_pairs, all_pairs_incl_pivot };

Regime parse_regime(const std::string& s);
std::string regime_name(Regime r);
BaseVariant parse_base_variant(const std::string& s);
std::string base_variant_name(BaseVariant v);
AlignStrategy parse_align_strategy(const std::string& s);
std::string align_strategy_name(AlignStrategy s);

struct RegimeSpec {
    Regime regime = Regime::single_m;
    BaseVariant base_variant = BaseVariant::mlm_plus_contrastive;
    AlignStrategy align_strategy = AlignStrategy::bilingual_to_pivot;
    bool multiparallel = true;
    bool shared_init = true;
};

struct PhaseResult {
    double initial_heldout = 0.0;
    double final_heldout = 0.0;
    long steps = 0;
};

// Masked-language-model phase over monolingual lines. Held-out loss is
// measured on a fixed masked batch before and after.
PhaseResult run_mlm(enc::EncoderModel<float>& model, const tok::BpeModel& tokenizer,
                    const std::vector<std::string>& lines, const TrainConfig& cfg, int steps,
                    num::RngState rng, const std::vector<std::string>& heldout_lines);

// Contrastive batch construction modes for a shared (single) model:
//   monolingual_batches — every batch is one language, sampled per batch;
//   crosslingual_pairs  — each sentence side draws its language independently.
enum class SingleMode { monolingual_batches, crosslingual_pairs };

PhaseResult run_contrastive_single(enc::EncoderModel<float>& model,
                                   const tok::BpeModel& tokenizer,
                                   const synth::RealizedCorpus& corpus, SingleMode mode,
                                   const TrainConfig& cfg, num::RngState rng,
                                   const std::vector<std::size_t>& train_items,
                                   const std::vector<std::size_t>& heldout_items);

// Monolingual contrastive specialization of one per-language model.
PhaseResult run_contrastive_mono(enc::EncoderModel<float>& model, const tok::BpeModel& tokenizer,
                                 const synth::RealizedCorpus& corpus, std::size_t lang_index,
                                 const TrainConfig& cfg, num::RngState rng,
                                 const std::vector<std::size_t>& train_items,
                                 const std::vector<std::size_t>& heldout_items);

// One cross-lingual alignment job over the pair (lang_a, lang_b). Only the
// adapters of frozen-base models train; a side without an adapter must be a
// frozen pivot and contributes constant embeddings. Loss is the symmetric
// mean of the two MNRL directions.
PhaseResult run_cla_pair(enc::EncoderModel<float>& model_a, const tok::BpeModel& tok_a,
                         enc::EncoderModel<float>& model_b, const tok::BpeModel& tok_b,
                         const synth::RealizedCorpus& corpus, std::size_t lang_a,
                         std::size_t lang_b, const TrainConfig& cfg, num::RngState rng,
                         const std::vector<std::size_t>& train_items,
                         const std::vector<std::size_t>& heldout_items);

// Shared multilingual base: MLM over the mixed corpus, optionally followed by
// a contrastive phase with per-sentence random languages. The two phases take
// their own train configs (the contrastive one's epochs field is honored).
enc::EncoderModel<float> pretrain_base(const enc::EncoderConfig& enc_cfg,
                                       const tok::BpeModel& tokenizer,
                                       const std::vector<std::string>& mixed_lines,
                                       const synth::RealizedCorpus& pairs, BaseVariant variant,
                                       const TrainConfig& mlm_cfg, int mlm_steps,
                                       const TrainConfig& contrastive_cfg, num::RngState rng);

struct AlignmentPlan {
    std::vector<std::pair<std::string, std::string>> jobs;  // (lang_a, lang_b)
    std::vector<std::string> adapter_langs;
};

AlignmentPlan plan_alignment(const std::vector<std::string>& langs, const std::string& pivot,
                             AlignStrategy strategy);

}  // namespace mse::train
