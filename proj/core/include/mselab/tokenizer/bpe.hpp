#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace mse::tok {

// Special token ids. [PAD] is pinned to id 0.
inline constexpr int kPad = 0;
inline constexpr int kUnk = 1;
inline constexpr int kCls = 2;
inline constexpr int kSep = 3;
inline constexpr int kMask = 4;
inline constexpr int kNumSpecials = 5;

// End-of-word marker carried by a word's final subword.
inline constexpr const char* kEowMarker = "</w>";

struct Vocab {
    std::unordered_map<std::string, int> id_of;
    std::vector<std::string> token_of;

    int size() const { return static_cast<int>(token_of.size()); }
    int lookup(const std::string& token) const {
        auto it = id_of.find(token);
        return it == id_of.end() ? -1 : it->second;
    }
    bool is_special(int id) const { return id >= 0 && id < kNumSpecials; }
};

struct BpeModel {
    Vocab vocab;
    std::vector<std::pair<std::string, std::string>> merges;

    // Rank lookup rebuilt after training or loading.
    std::unordered_map<std::string, int> merge_rank;

    void rebuild_rank_index();
};

// Greedy highest-frequency pair merging over the whitespace-split corpus.
// Ties break by lexicographic order of the merged string. Stops when
// vocab_size is reached or no pair occurs twice.
BpeModel train_bpe(const std::vector<std::string>& corpus, int vocab_size);

// [CLS] + subword ids + [SEP], truncated so total length <= max_len with
// [SEP] last. Characters outside the alphabet map to [UNK].
std::vector<int> encode(const BpeModel& model, const std::string& text, int max_len);

// Inverse of encode on in-vocabulary text: specials dropped, [UNK] rendered
// as the literal "<unk>" marker, end-of-word markers restored to spaces.
std::string decode(const BpeModel& model, const std::vector<int>& ids);

void save_bpe(const BpeModel& model, const std::string& path);
BpeModel load_bpe(const std::string& path);

}  // namespace mse::tok
