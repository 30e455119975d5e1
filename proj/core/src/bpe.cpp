#include "mselab/tokenizer/bpe.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace mse::tok {

namespace {

const char* kSpecialNames[kNumSpecials] = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};

std::vector<std::string> split_words(const std::string& line) {
    std::vector<std::string> words;
    std::string cur;
    for (char c : line) {
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            if (!cur.empty()) {
                words.push_back(cur);
                cur.clear();
            }
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) words.push_back(cur);
    return words;
}

// UTF-8 code points as strings; the synthetic corpora are ASCII but real
// bytes should not be split mid-sequence.
std::vector<std::string> split_chars(const std::string& word) {
    std::vector<std::string> chars;
    std::size_t i = 0;
    while (i < word.size()) {
        const unsigned char c = static_cast<unsigned char>(word[i]);
        std::size_t n = 1;
        if ((c & 0xE0) == 0xC0) n = 2;
        else if ((c & 0xF0) == 0xE0) n = 3;
        else if ((c & 0xF8) == 0xF0) n = 4;
        n = std::min(n, word.size() - i);
        chars.push_back(word.substr(i, n));
        i += n;
    }
    return chars;
}

// Initial symbol sequence for a word: characters, final one fused with the
// end-of-word marker.
std::vector<std::string> word_symbols(const std::string& word) {
    std::vector<std::string> syms = split_chars(word);
    if (!syms.empty()) syms.back() += kEowMarker;
    return syms;
}

std::string pair_key(const std::string& a, const std::string& b) { return a + "\x01" + b; }

}  // namespace

void BpeModel::rebuild_rank_index() {
    merge_rank.clear();
    for (std::size_t i = 0; i < merges.size(); ++i)
        merge_rank[pair_key(merges[i].first, merges[i].second)] = static_cast<int>(i);
}

BpeModel train_bpe(const std::vector<std::string>& corpus, int vocab_size) {
    bool any = false;
    std::map<std::string, long> word_freq;  // ordered for determinism
    for (const std::string& line : corpus) {
        for (const std::string& w : split_words(line)) {
            ++word_freq[w];
            any = true;
        }
    }
    if (!any) throw std::invalid_argument("train_bpe: empty corpus");

    // Alphabet: all initial symbols over word types, sorted.
    std::map<std::string, int> alphabet;
    std::vector<std::vector<std::string>> seqs;
    std::vector<long> freqs;
    for (const auto& [w, f] : word_freq) {
        seqs.push_back(word_symbols(w));
        freqs.push_back(f);
        for (const std::string& s : seqs.back()) alphabet[s] = 1;
    }

    const int min_size = kNumSpecials + static_cast<int>(alphabet.size());
    if (vocab_size < min_size)
        throw std::invalid_argument("train_bpe: vocab_size too small, minimum is " +
                                    std::to_string(min_size));

    BpeModel model;
    for (int i = 0; i < kNumSpecials; ++i) {
        model.vocab.token_of.push_back(kSpecialNames[i]);
        model.vocab.id_of[kSpecialNames[i]] = i;
    }
    for (const auto& [s, _] : alphabet) {
        model.vocab.id_of[s] = model.vocab.size();
        model.vocab.token_of.push_back(s);
    }

    while (model.vocab.size() < vocab_size) {
        // Count adjacent pairs over word types weighted by frequency.
        std::map<std::pair<std::string, std::string>, long> pair_count;
        for (std::size_t wi = 0; wi < seqs.size(); ++wi) {
            const auto& sy = seqs[wi];
            for (std::size_t i = 0; i + 1 < sy.size(); ++i)
                pair_count[{sy[i], sy[i + 1]}] += freqs[wi];
        }
        long best_count = 0;
        std::pair<std::string, std::string> best;
        std::string best_merged;
        for (const auto& [pr, cnt] : pair_count) {
            if (cnt < 2) continue;
            const std::string merged = pr.first + pr.second;
            if (cnt > best_count || (cnt == best_count && merged < best_merged)) {
                best_count = cnt;
                best = pr;
                best_merged = merged;
            }
        }
        if (best_count < 2) break;  // no pair repeats

        model.merges.push_back(best);
        if (model.vocab.id_of.find(best_merged) == model.vocab.id_of.end()) {
            model.vocab.id_of[best_merged] = model.vocab.size();
            model.vocab.token_of.push_back(best_merged);
        }
        // Apply the merge to every word type.
        for (auto& sy : seqs) {
            std::vector<std::string> next;
            next.reserve(sy.size());
            std::size_t i = 0;
            while (i < sy.size()) {
                if (i + 1 < sy.size() && sy[i] == best.first && sy[i + 1] == best.second) {
                    next.push_back(best_merged);
                    i += 2;
                } else {
                    next.push_back(sy[i]);
                    ++i;
                }
            }
            sy = std::move(next);
        }
    }

    model.rebuild_rank_index();
    return model;
}

namespace {

std::vector<std::string> apply_merges(const BpeModel& model, const std::string& word) {
    std::vector<std::string> syms = word_symbols(word);
    if (syms.size() < 2) return syms;
    // Repeatedly merge the lowest-ranked adjacent pair; equivalent to applying
    // the merge list in order.
    while (true) {
        int best_rank = -1;
        std::size_t best_pos = 0;
        for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
            auto it = model.merge_rank.find(pair_key(syms[i], syms[i + 1]));
            if (it == model.merge_rank.end()) continue;
            if (best_rank < 0 || it->second < best_rank) {
                best_rank = it->second;
                best_pos = i;
            }
        }
        if (best_rank < 0) break;
        const auto& rule = model.merges[static_cast<std::size_t>(best_rank)];
        std::vector<std::string> next;
        next.reserve(syms.size());
        std::size_t i = 0;
        while (i < syms.size()) {
            if (i + 1 < syms.size() && syms[i] == rule.first && syms[i + 1] == rule.second) {
                next.push_back(rule.first + rule.second);
                i += 2;
            } else {
                next.push_back(syms[i]);
                ++i;
            }
        }
        syms = std::move(next);
    }
    return syms;
}

}  // namespace

std::vector<int> encode(const BpeModel& model, const std::string& text, int max_len) {
    if (max_len < 2) throw std::invalid_argument("encode: max_len must be >= 2");
    std::vector<int> ids;
    ids.push_back(kCls);
    for (const std::string& word : split_words(text)) {
        for (const std::string& sym : apply_merges(model, word)) {
            const int id = model.vocab.lookup(sym);
            ids.push_back(id >= 0 ? id : kUnk);
        }
    }
    if (static_cast<int>(ids.size()) + 1 > max_len) ids.resize(static_cast<std::size_t>(max_len) - 1);
    ids.push_back(kSep);
    return ids;
}

std::string decode(const BpeModel& model, const std::vector<int>& ids) {
    std::string out;
    const std::string eow = kEowMarker;
    for (int id : ids) {
        if (id < 0 || id >= model.vocab.size())
            throw std::out_of_range("decode: id " + std::to_string(id) + " out of range");
        if (id == kPad || id == kCls || id == kSep || id == kMask) continue;
        if (id == kUnk) {
            out += "<unk>";
            continue;
        }
        std::string tok = model.vocab.token_of[static_cast<std::size_t>(id)];
        const bool at_eow =
            tok.size() >= eow.size() && tok.compare(tok.size() - eow.size(), eow.size(), eow) == 0;
        if (at_eow) tok.resize(tok.size() - eow.size());
        out += tok;
        if (at_eow) out += ' ';
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

void save_bpe(const BpeModel& model, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_bpe: cannot open " + path);
    f << "BPE v1\n";
    for (int i = 0; i < model.vocab.size(); ++i)
        f << i << '\t' << model.vocab.token_of[static_cast<std::size_t>(i)] << '\n';
    f << "#MERGES\n";
    for (const auto& [a, b] : model.merges) f << a << '\t' << b << '\n';
    if (!f) throw std::runtime_error("save_bpe: write failed for " + path);
}

BpeModel load_bpe(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_bpe: cannot open " + path);
    std::string line;
    if (!std::getline(f, line) || line != "BPE v1")
        throw std::runtime_error("load_bpe: bad header in " + path);
    BpeModel model;
    bool in_merges = false;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        if (line == "#MERGES") {
            in_merges = true;
            continue;
        }
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos)
            throw std::runtime_error("load_bpe: malformed line in " + path);
        if (!in_merges) {
            const int id = std::stoi(line.substr(0, tab));
            const std::string tok = line.substr(tab + 1);
            if (id != model.vocab.size())
                throw std::runtime_error("load_bpe: non-contiguous ids in " + path);
            model.vocab.id_of[tok] = id;
            model.vocab.token_of.push_back(tok);
        } else {
            model.merges.emplace_back(line.substr(0, tab), line.substr(tab + 1));
        }
    }
    if (model.vocab.size() < kNumSpecials)
        throw std::runtime_error("load_bpe: vocabulary missing special tokens in " + path);
    model.rebuild_rank_index();
    return model;
}

}  // namespace mse::tok
