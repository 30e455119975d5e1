#include "mselab/util/tsv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mse::util {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == '\t') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

std::ofstream open_out(const std::string& path, const char* what) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error(std::string(what) + ": cannot open " + path);
    return f;
}

std::ifstream open_in(const std::string& path, const char* what) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error(std::string(what) + ": cannot open " + path);
    return f;
}

}  // namespace

void write_corpus_tsv(const synth::RealizedCorpus& corpus, const std::string& path) {
    auto f = open_out(path, "corpus");
    for (const auto& item : corpus.items) {
        for (std::size_t l = 0; l < corpus.langs.size(); ++l) {
            const auto& r = item[l];
            f << corpus.langs[l] << '\t' << r.anchor << '\t' << r.positive << '\t' << r.hard
              << '\n';
        }
    }
    if (!f) throw std::runtime_error("corpus: write failed for " + path);
}

synth::RealizedCorpus read_corpus_tsv(const std::string& path) {
    auto f = open_in(path, "corpus");
    synth::RealizedCorpus corpus;
    std::string line;
    std::vector<synth::RealizedItem> current;
    std::vector<std::string> current_langs;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const auto cols = split_tabs(line);
        if (cols.size() != 4) throw std::runtime_error("corpus: expected 4 columns in " + path);
        const std::string& lang = cols[0];
        if (!current_langs.empty() && lang == current_langs[0]) {
            // New item group begins.
            if (corpus.langs.empty()) {
                corpus.langs = current_langs;
            } else if (current_langs != corpus.langs) {
                throw std::runtime_error("corpus: inconsistent language grouping in " + path);
            }
            corpus.items.push_back(std::move(current));
            current.clear();
            current_langs.clear();
        }
        current_langs.push_back(lang);
        current.push_back({cols[1], cols[2], cols[3]});
    }
    if (!current.empty()) {
        if (corpus.langs.empty())
            corpus.langs = current_langs;
        else if (current_langs != corpus.langs)
            throw std::runtime_error("corpus: inconsistent language grouping in " + path);
        corpus.items.push_back(std::move(current));
    }
    if (corpus.items.empty()) throw std::runtime_error("corpus: empty file " + path);
    return corpus;
}

void write_sts_tsv(const synth::StsBenchmark& bench, const std::string& path) {
    auto f = open_out(path, "sts");
    char buf[32];
    for (const auto& p : bench.pairs) {
        std::snprintf(buf, sizeof(buf), "%.6f", p.gold);
        f << p.lang_a << '\t' << p.lang_b << '\t' << p.text_a << '\t' << p.text_b << '\t' << buf
          << '\n';
    }
    if (!f) throw std::runtime_error("sts: write failed for " + path);
}

synth::StsBenchmark read_sts_tsv(const std::string& path) {
    auto f = open_in(path, "sts");
    synth::StsBenchmark bench;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const auto cols = split_tabs(line);
        if (cols.size() != 5) throw std::runtime_error("sts: expected 5 columns in " + path);
        synth::StsPair p;
        p.lang_a = cols[0];
        p.lang_b = cols[1];
        p.text_a = cols[2];
        p.text_b = cols[3];
        p.gold = std::stod(cols[4]);
        bench.pairs.push_back(std::move(p));
    }
    return bench;
}

void write_mcqa_tsv(const synth::McqaBenchmark& bench, const std::string& path) {
    auto f = open_out(path, "mcqa");
    for (const auto& it : bench.items) {
        f << it.lang_passage << '\t' << it.lang_qa << '\t' << it.passage << '\t' << it.question;
        for (const auto& a : it.answers) f << '\t' << a;
        f << '\t' << it.correct << '\n';
    }
    if (!f) throw std::runtime_error("mcqa: write failed for " + path);
}

synth::McqaBenchmark read_mcqa_tsv(const std::string& path) {
    auto f = open_in(path, "mcqa");
    synth::McqaBenchmark bench;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const auto cols = split_tabs(line);
        if (cols.size() != 9) throw std::runtime_error("mcqa: expected 9 columns in " + path);
        synth::McqaItem it;
        it.lang_passage = cols[0];
        it.lang_qa = cols[1];
        it.passage = cols[2];
        it.question = cols[3];
        for (int a = 0; a < 4; ++a) it.answers[static_cast<std::size_t>(a)] = cols[4 + static_cast<std::size_t>(a)];
        it.correct = std::stoi(cols[8]);
        if (it.correct < 0 || it.correct > 3)
            throw std::runtime_error("mcqa: correct index out of range in " + path);
        bench.items.push_back(std::move(it));
    }
    return bench;
}

void write_lines(const std::vector<std::string>& lines, const std::string& path) {
    auto f = open_out(path, "lines");
    for (const auto& l : lines) f << l << '\n';
    if (!f) throw std::runtime_error("lines: write failed for " + path);
}

std::vector<std::string> read_lines(const std::string& path) {
    auto f = open_in(path, "lines");
    std::vector<std::string> out;
    std::string line;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) out.push_back(line);
    }
    return out;
}

}  // namespace mse::util
