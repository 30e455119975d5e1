#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mselab/synthlang/benchmark_gen.hpp"

namespace mse::eval {

// Sentence embedder for one language; `use_adapter` engages the CLA adapter
// when the underlying model carries one.
using EmbedFn = std::function<std::vector<float>(const std::string& text, bool use_adapter)>;

enum class EvalMode { mono, cross };

inline const char* mode_name(EvalMode m) { return m == EvalMode::mono ? "mono" : "cross"; }

struct GroupScore {
    std::string key;  // language, or "a-b" unordered pair
    double value;     // Spearman x100 for STS, accuracy for MCQA
};

struct EvalResult {
    std::vector<GroupScore> scores;
    std::vector<std::string> notes;  // skipped degenerate groups etc.
};

// Spearman x100 of cosine vs gold per language (mono) or per unordered
// language pair (cross; the two directions' scores are averaged). Mono mode
// bypasses adapters; cross mode engages them.
EvalResult eval_sts(const std::map<std::string, EmbedFn>& embedders,
                    const synth::StsBenchmark& bench, EvalMode mode);

// Accuracy of argmax cosine(passage, question+answer); ties resolve to the
// lowest candidate index.
EvalResult eval_mcqa(const std::map<std::string, EmbedFn>& embedders,
                     const synth::McqaBenchmark& bench, EvalMode mode);

// Mono diagonal plus every unordered pair in one call: L + L*(L-1)/2 rows.
EvalResult cross_matrix(const std::map<std::string, EmbedFn>& embedders,
                        const synth::StsBenchmark& bench);

// ----------------------------- report -----------------------------

struct EvalRow {
    std::string regime, base_variant, task, mode, lang;
    long seed = 0;
    std::string metric;
    double value = 0.0;
};

struct EvalReport {
    std::vector<EvalRow> rows;
};

// CSV with header "regime,base_variant,task,mode,lang,seed,metric,value",
// rows sorted canonically, values fixed to six decimals.
void write_report_csv(const EvalReport& report, const std::string& path);
EvalReport read_report_csv(const std::string& path);

}  // namespace mse::eval
