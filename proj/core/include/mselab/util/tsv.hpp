#pragma once

#include <string>
#include <vector>

#include "mselab/synthlang/benchmark_gen.hpp"

namespace mse::util {

// Multi-parallel paraphrase corpus, one row per (item, language) in family
// order: lang \t anchor \t positive \t hard_negative (hard may be empty).
// Rows of one item are consecutive.
void write_corpus_tsv(const synth::RealizedCorpus& corpus, const std::string& path);
synth::RealizedCorpus read_corpus_tsv(const std::string& path);

// langA \t langB \t textA \t textB \t gold
void write_sts_tsv(const synth::StsBenchmark& bench, const std::string& path);
synth::StsBenchmark read_sts_tsv(const std::string& path);

// lang_passage \t lang_qa \t passage \t question \t a0..a3 \t correct
void write_mcqa_tsv(const synth::McqaBenchmark& bench, const std::string& path);
synth::McqaBenchmark read_mcqa_tsv(const std::string& path);

void write_lines(const std::vector<std::string>& lines, const std::string& path);
std::vector<std::string> read_lines(const std::string& path);

}  // namespace mse::util
