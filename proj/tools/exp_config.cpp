#include "exp_config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace mse::cli {

using nlohmann::json;

std::size_t ExperimentConfig::pivot_index() const {
    for (std::size_t i = 0; i < languages.size(); ++i)
        if (languages[i] == pivot) return i;
    throw std::invalid_argument("config: pivot not listed in languages");
}

bool ExperimentConfig::is_low_resource(const std::string& lang) const {
    for (const auto& l : low_resource)
        if (l == lang) return true;
    return false;
}

void ExperimentConfig::validate() const {
    if (languages.size() < 2) throw std::invalid_argument("config: need at least 2 languages");
    (void)pivot_index();
    if (seeds.empty()) throw std::invalid_argument("config: need at least 1 seed");
    std::set<std::string> uniq(languages.begin(), languages.end());
    if (uniq.size() != languages.size())
        throw std::invalid_argument("config: duplicate language ids");
    for (const auto& l : low_resource)
        if (!uniq.count(l))
            throw std::invalid_argument("config: low_resource language not in languages: " + l);
    encoder.validate();
    if (lang_vocab_size < 16 || base_vocab_size < 16)
        throw std::invalid_argument("config: vocabulary sizes too small");
    if (inventory.n_content() < 50 || inventory.group_size < 2)
        throw std::invalid_argument("config: inventory too small");
    for (const auto& r : regimes) (void)train::parse_regime(r);
    (void)train::parse_base_variant(base_variant);
    for (const auto& s : ablations.alignment_strategies) (void)train::parse_align_strategy(s);
}

train::TrainConfig ExperimentConfig::phase_train_config(const PhaseConfig& phase,
                                                        std::uint64_t seed) const {
    train::TrainConfig cfg;
    cfg.batch_size = phase.batch_size;
    cfg.lr = phase.lr;
    cfg.adapter_lr = phase.lr;
    cfg.epochs = phase.epochs;
    cfg.max_len = phase.max_len;
    cfg.mlm_max_len = mlm_max_len;
    cfg.mnrl_scale = mnrl_scale;
    cfg.mask_prob = mask_prob;
    cfg.seed = seed;
    return cfg;
}

namespace {

void read_phase(const json& j, const char* key, PhaseConfig& phase) {
    if (!j.contains(key)) return;
    const json& p = j.at(key);
    phase.steps = p.value("steps", phase.steps);
    phase.epochs = p.value("epochs", phase.epochs);
    phase.batch_size = p.value("batch_size", phase.batch_size);
    phase.lr = p.value("lr", phase.lr);
    phase.max_len = p.value("max_len", phase.max_len);
    phase.items = p.value("items", phase.items);
}

json phase_json(const PhaseConfig& p) {
    return json{{"steps", p.steps},   {"epochs", p.epochs},   {"batch_size", p.batch_size},
                {"lr", p.lr},         {"max_len", p.max_len}, {"items", p.items}};
}

void read_data(const json& j, DataConfig& d) {
    d.mlm_sentences = j.value("mlm_sentences", d.mlm_sentences);
    d.mlm_heldout = j.value("mlm_heldout", d.mlm_heldout);
    d.low_resource_divisor = j.value("low_resource_divisor", d.low_resource_divisor);
    d.items = j.value("items", d.items);
    d.heldout_items = j.value("heldout_items", d.heldout_items);
    d.hard_negative_fraction = j.value("hard_negative_fraction", d.hard_negative_fraction);
    d.translation_noise = j.value("translation_noise", d.translation_noise);
    d.sts_mono_per_lang = j.value("sts_mono_per_lang", d.sts_mono_per_lang);
    d.sts_cross_per_direction = j.value("sts_cross_per_direction", d.sts_cross_per_direction);
    if (j.contains("sts_levels")) d.sts_levels = j.at("sts_levels").get<std::vector<double>>();
    d.mcqa_mono_items = j.value("mcqa_mono_items", d.mcqa_mono_items);
    d.mcqa_cross_items = j.value("mcqa_cross_items", d.mcqa_cross_items);
}

json data_json(const DataConfig& d) {
    return json{{"mlm_sentences", d.mlm_sentences},
                {"mlm_heldout", d.mlm_heldout},
                {"low_resource_divisor", d.low_resource_divisor},
                {"items", d.items},
                {"heldout_items", d.heldout_items},
                {"hard_negative_fraction", d.hard_negative_fraction},
                {"translation_noise", d.translation_noise},
                {"sts_mono_per_lang", d.sts_mono_per_lang},
                {"sts_cross_per_direction", d.sts_cross_per_direction},
                {"sts_levels", d.sts_levels},
                {"mcqa_mono_items", d.mcqa_mono_items},
                {"mcqa_cross_items", d.mcqa_cross_items}};
}

}  // namespace

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("config: cannot open " + path);
    json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        throw std::invalid_argument("config: malformed JSON in " + path + ": " + e.what());
    }

    ExperimentConfig cfg;
    try {
        if (j.contains("languages")) cfg.languages = j.at("languages").get<std::vector<std::string>>();
        cfg.pivot = j.value("pivot", cfg.pivot);
        if (j.contains("low_resource"))
            cfg.low_resource = j.at("low_resource").get<std::vector<std::string>>();
        if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();

        if (j.contains("inventory")) {
            const json& inv = j.at("inventory");
            cfg.inventory.n_groups = inv.value("groups", cfg.inventory.n_groups);
            cfg.inventory.group_size = inv.value("group_size", cfg.inventory.group_size);
            cfg.inventory.n_function = inv.value("function", cfg.inventory.n_function);
        }
        if (j.contains("encoder")) {
            const json& e = j.at("encoder");
            cfg.encoder.n_layers = e.value("n_layers", cfg.encoder.n_layers);
            cfg.encoder.n_heads = e.value("n_heads", cfg.encoder.n_heads);
            cfg.encoder.d_model = e.value("d_model", cfg.encoder.d_model);
            cfg.encoder.d_ff = e.value("d_ff", cfg.encoder.d_ff);
            cfg.encoder.max_len = e.value("max_len", cfg.encoder.max_len);
            cfg.encoder.adapter_bottleneck =
                e.value("adapter_bottleneck", cfg.encoder.adapter_bottleneck);
            cfg.encoder.adapter_scale = e.value("adapter_scale", cfg.encoder.adapter_scale);
        }
        if (j.contains("data")) read_data(j.at("data"), cfg.data);
        if (j.contains("tokenizer")) {
            cfg.lang_vocab_size = j.at("tokenizer").value("lang_vocab_size", cfg.lang_vocab_size);
            cfg.base_vocab_size = j.at("tokenizer").value("base_vocab_size", cfg.base_vocab_size);
            cfg.balanced_tokenizer_corpus =
                j.at("tokenizer").value("balanced_corpus", cfg.balanced_tokenizer_corpus);
        }
        if (j.contains("aux")) {
            cfg.aux_dim = j.at("aux").value("dim", cfg.aux_dim);
            cfg.aux_window = j.at("aux").value("window", cfg.aux_window);
        }
        if (j.contains("base")) {
            cfg.base_variant = j.at("base").value("variant", cfg.base_variant);
            cfg.base_mlm_steps = j.at("base").value("mlm_steps", cfg.base_mlm_steps);
            cfg.base_contrastive_epochs =
                j.at("base").value("contrastive_epochs", cfg.base_contrastive_epochs);
        }
        read_phase(j, "mlm", cfg.mlm);
        read_phase(j, "contrastive", cfg.contrastive);
        read_phase(j, "cla", cfg.cla);
        cfg.mnrl_scale = j.value("mnrl_scale", cfg.mnrl_scale);
        cfg.mask_prob = j.value("mask_prob", cfg.mask_prob);
        cfg.mlm_max_len = j.value("mlm_max_len", cfg.mlm_max_len);
        if (j.contains("regimes")) cfg.regimes = j.at("regimes").get<std::vector<std::string>>();
        if (j.contains("ablations")) {
            const json& a = j.at("ablations");
            cfg.ablations.independent_init =
                a.value("independent_init", cfg.ablations.independent_init);
            cfg.ablations.nonparallel_pivot =
                a.value("nonparallel_pivot", cfg.ablations.nonparallel_pivot);
            if (a.contains("alignment_strategies"))
                cfg.ablations.alignment_strategies =
                    a.at("alignment_strategies").get<std::vector<std::string>>();
        }
        if (j.contains("eval")) {
            cfg.eval_mcqa = j.at("eval").value("mcqa", cfg.eval_mcqa);
            cfg.eval_mcqa_cross = j.at("eval").value("mcqa_cross", cfg.eval_mcqa_cross);
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument("config: schema violation in " + path + ": " + e.what());
    }
    cfg.validate();
    return cfg;
}

std::string experiment_config_json(const ExperimentConfig& cfg) {
    json j;
    j["languages"] = cfg.languages;
    j["pivot"] = cfg.pivot;
    j["low_resource"] = cfg.low_resource;
    j["seeds"] = cfg.seeds;
    j["inventory"] = {{"groups", cfg.inventory.n_groups},
                      {"group_size", cfg.inventory.group_size},
                      {"function", cfg.inventory.n_function}};
    j["encoder"] = {{"n_layers", cfg.encoder.n_layers},
                    {"n_heads", cfg.encoder.n_heads},
                    {"d_model", cfg.encoder.d_model},
                    {"d_ff", cfg.encoder.d_ff},
                    {"max_len", cfg.encoder.max_len},
                    {"adapter_bottleneck", cfg.encoder.adapter_bottleneck},
                    {"adapter_scale", cfg.encoder.adapter_scale}};
    j["data"] = data_json(cfg.data);
    j["tokenizer"] = {{"lang_vocab_size", cfg.lang_vocab_size},
                      {"base_vocab_size", cfg.base_vocab_size},
                      {"balanced_corpus", cfg.balanced_tokenizer_corpus}};
    j["aux"] = {{"dim", cfg.aux_dim}, {"window", cfg.aux_window}};
    j["base"] = {{"variant", cfg.base_variant},
                 {"mlm_steps", cfg.base_mlm_steps},
                 {"contrastive_epochs", cfg.base_contrastive_epochs}};
    j["mlm"] = phase_json(cfg.mlm);
    j["contrastive"] = phase_json(cfg.contrastive);
    j["cla"] = phase_json(cfg.cla);
    j["mnrl_scale"] = cfg.mnrl_scale;
    j["mask_prob"] = cfg.mask_prob;
    j["mlm_max_len"] = cfg.mlm_max_len;
    j["regimes"] = cfg.regimes;
    j["ablations"] = {{"independent_init", cfg.ablations.independent_init},
                      {"nonparallel_pivot", cfg.ablations.nonparallel_pivot},
                      {"alignment_strategies", cfg.ablations.alignment_strategies}};
    j["eval"] = {{"mcqa", cfg.eval_mcqa}, {"mcqa_cross", cfg.eval_mcqa_cross}};
    return j.dump(2);
}

}  // namespace mse::cli
