#include "mselab/eval/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mselab/eval/spearman.hpp"
#include "mselab/numerics/kernels.hpp"

namespace mse::eval {

namespace {

std::string pair_key(const std::string& a, const std::string& b) {
    return a < b ? a + "-" + b : b + "-" + a;
}

const EmbedFn& embedder_for(const std::map<std::string, EmbedFn>& embedders,
                            const std::string& lang) {
    auto it = embedders.find(lang);
    if (it == embedders.end())
        throw std::invalid_argument("eval: no model for language " + lang);
    return it->second;
}

double cosine_of(const std::vector<float>& a, const std::vector<float>& b) {
    return num::cosine(std::span<const float>(a), std::span<const float>(b));
}

}  // namespace

EvalResult eval_sts(const std::map<std::string, EmbedFn>& embedders,
                    const synth::StsBenchmark& bench, EvalMode mode) {
    const bool use_adapter = (mode == EvalMode::cross);

    // Group pairs by ordered (lang_a, lang_b); mono keeps the diagonal only.
    std::map<std::pair<std::string, std::string>, std::pair<std::vector<double>, std::vector<double>>>
        groups;  // -> (cosines, golds)
    for (const auto& p : bench.pairs) {
        const bool is_mono = p.lang_a == p.lang_b;
        if ((mode == EvalMode::mono) != is_mono) continue;
        const auto va = embedder_for(embedders, p.lang_a)(p.text_a, use_adapter);
        const auto vb = embedder_for(embedders, p.lang_b)(p.text_b, use_adapter);
        auto& g = groups[{p.lang_a, p.lang_b}];
        g.first.push_back(cosine_of(va, vb));
        g.second.push_back(p.gold);
    }

    // Ordered-group Spearman, then symmetric averaging into unordered keys.
    std::map<std::string, std::pair<double, int>> merged;
    EvalResult res;
    for (const auto& [key, data] : groups) {
        double rho;
        try {
            rho = spearman(data.second, data.first) * 100.0;
        } catch (const std::invalid_argument&) {
            res.notes.push_back("skipped degenerate group " + key.first + "-" + key.second +
                                " (constant gold or scores)");
            continue;
        }
        const std::string k =
            key.first == key.second ? key.first : pair_key(key.first, key.second);
        auto& slot = merged[k];
        slot.first += rho;
        slot.second += 1;
    }
    for (const auto& [k, acc] : merged)
        res.scores.push_back({k, acc.first / static_cast<double>(acc.second)});
    return res;
}

EvalResult eval_mcqa(const std::map<std::string, EmbedFn>& embedders,
                     const synth::McqaBenchmark& bench, EvalMode mode) {
    const bool use_adapter = (mode == EvalMode::cross);

    std::map<std::pair<std::string, std::string>, std::pair<long, long>> tally;  // correct, total
    for (const auto& item : bench.items) {
        const bool is_mono = item.lang_passage == item.lang_qa;
        if ((mode == EvalMode::mono) != is_mono) continue;
        const auto pv = embedder_for(embedders, item.lang_passage)(item.passage, use_adapter);
        int best = 0;
        double best_cos = -2.0;
        for (int a = 0; a < 4; ++a) {
            const std::string qa = item.question + " " + item.answers[static_cast<std::size_t>(a)];
            const auto qv = embedder_for(embedders, item.lang_qa)(qa, use_adapter);
            const double c = cosine_of(pv, qv);
            if (c > best_cos) {  // ties keep the lowest index
                best_cos = c;
                best = a;
            }
        }
        auto& t = tally[{item.lang_passage, item.lang_qa}];
        if (best == item.correct) t.first += 1;
        t.second += 1;
    }

    std::map<std::string, std::pair<double, int>> merged;
    EvalResult res;
    for (const auto& [key, t] : tally) {
        const double acc = static_cast<double>(t.first) / static_cast<double>(t.second);
        const std::string k =
            key.first == key.second ? key.first : pair_key(key.first, key.second);
        auto& slot = merged[k];
        slot.first += acc;
        slot.second += 1;
    }
    for (const auto& [k, acc] : merged)
        res.scores.push_back({k, acc.first / static_cast<double>(acc.second)});
    return res;
}

EvalResult cross_matrix(const std::map<std::string, EmbedFn>& embedders,
                        const synth::StsBenchmark& bench) {
    EvalResult mono = eval_sts(embedders, bench, EvalMode::mono);
    EvalResult cross = eval_sts(embedders, bench, EvalMode::cross);
    EvalResult out;
    out.scores = mono.scores;
    out.scores.insert(out.scores.end(), cross.scores.begin(), cross.scores.end());
    out.notes = mono.notes;
    out.notes.insert(out.notes.end(), cross.notes.begin(), cross.notes.end());
    return out;
}

void write_report_csv(const EvalReport& report, const std::string& path) {
    EvalReport sorted = report;
    std::sort(sorted.rows.begin(), sorted.rows.end(), [](const EvalRow& a, const EvalRow& b) {
        auto key = [](const EvalRow& r) {
            return std::tie(r.regime, r.base_variant, r.task, r.mode, r.lang, r.seed, r.metric);
        };
        return key(a) < key(b);
    });
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("report: cannot open " + path);
    f << "regime,base_variant,task,mode,lang,seed,metric,value\n";
    char buf[64];
    for (const auto& r : sorted.rows) {
        std::snprintf(buf, sizeof(buf), "%.6f", r.value);
        f << r.regime << ',' << r.base_variant << ',' << r.task << ',' << r.mode << ',' << r.lang
          << ',' << r.seed << ',' << r.metric << ',' << buf << '\n';
    }
    if (!f) throw std::runtime_error("report: write failed for " + path);
}

EvalReport read_report_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("report: cannot open " + path);
    std::string line;
    if (!std::getline(f, line) || line != "regime,base_variant,task,mode,lang,seed,metric,value")
        throw std::runtime_error("report: bad header in " + path);
    EvalReport report;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        EvalRow r;
        std::string seed_s, value_s;
        if (!std::getline(ss, r.regime, ',') || !std::getline(ss, r.base_variant, ',') ||
            !std::getline(ss, r.task, ',') || !std::getline(ss, r.mode, ',') ||
            !std::getline(ss, r.lang, ',') || !std::getline(ss, seed_s, ',') ||
            !std::getline(ss, r.metric, ',') || !std::getline(ss, value_s))
            throw std::runtime_error("report: malformed row in " + path);
        r.seed = std::stol(seed_s);
        r.value = std::stod(value_s);
        report.rows.push_back(std::move(r));
    }
    return report;
}

}  // namespace mse::eval
