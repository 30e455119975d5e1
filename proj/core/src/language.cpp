#include "mselab/synthlang/language.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace mse::synth {

namespace {

const std::vector<std::string> kConsonants = {"b", "d", "f", "g", "h", "k", "l", "m",
                                              "n", "p", "r", "s", "t", "v", "w", "z"};
const std::vector<std::string> kVowels = {"a", "e", "i", "o", "u"};

std::vector<std::string> pick_subset(const std::vector<std::string>& pool, std::size_t n,
                                     num::RngState& rng) {
    std::vector<std::string> items = pool;
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j = rng.uniform_below(i);
        std::swap(items[i - 1], items[j]);
    }
    items.resize(std::min(n, items.size()));
    return items;
}

std::string make_stem(const std::vector<std::string>& cons, const std::vector<std::string>& vows,
                      bool content, num::RngState& rng) {
    auto cv = [&]() {
        return cons[rng.uniform_below(cons.size())] + vows[rng.uniform_below(vows.size())];
    };
    std::string w;
    if (content) {
        // Consonant-initial, 2-3 syllables.
        const int syl = 2 + static_cast<int>(rng.uniform_below(2));
        for (int s = 0; s < syl; ++s) w += cv();
    } else {
        // Vowel-initial, short.
        w = vows[rng.uniform_below(vows.size())] + cons[rng.uniform_below(cons.size())];
        if (rng.bernoulli(0.5)) w += vows[rng.uniform_below(vows.size())];
    }
    return w;
}

}  // namespace

std::vector<LanguageSpec> make_language_family(std::uint64_t seed,
                                               const std::vector<std::string>& lang_ids,
                                               const ConceptInventory& inv,
                                               std::size_t pivot_index) {
    if (pivot_index >= lang_ids.size())
        throw std::invalid_argument("language family: pivot index out of range");
    const OrderRule orders[] = {OrderRule::reverse, OrderRule::rotate_one, OrderRule::swap_adjacent,
                                OrderRule::rotate_two};
    const SuffixRule::Kind suffix_kinds[] = {SuffixRule::Kind::content_all,
                                             SuffixRule::Kind::alternating,
                                             SuffixRule::Kind::final_word};

    std::vector<LanguageSpec> family;
    num::RngState root(seed);

    // Shared stem pool: every language maps some of its content concepts onto
    // stems from this pool, with its own assignment. The same surface form
    // then denotes unrelated meanings across languages (homographs), which is
    // what makes a shared vocabulary genuinely contested.
    std::vector<std::string> pool;
    {
        num::RngState prng = root.derive("stem-pool");
        std::set<std::string> seen;
        const int pool_size = std::max(24, inv.n_groups / 2);
        while (static_cast<int>(pool.size()) < pool_size) {
            const std::string w = make_stem(kConsonants, kVowels, true, prng);
            if (seen.insert(w).second) pool.push_back(w);
        }
    }

    std::size_t variant = 0;
    for (std::size_t li = 0; li < lang_ids.size(); ++li) {
        num::RngState rng = root.derive(lang_ids[li]);
        LanguageSpec spec;
        spec.lang_id = lang_ids[li];
        const auto cons = pick_subset(kConsonants, 7, rng);
        const auto vows = pick_subset(kVowels, 3, rng);

        std::set<std::string> used;
        spec.lexicon.resize(static_cast<std::size_t>(inv.n_total()));
        for (int c = 0; c < inv.n_total(); ++c) {
            std::string w;
            if (inv.is_content(c) && rng.bernoulli(0.5)) {
                w = pool[rng.uniform_below(pool.size())];
                if (!used.insert(w).second) w.clear();
            }
            if (w.empty()) {
                do {
                    w = make_stem(cons, vows, inv.is_content(c), rng);
                } while (!used.insert(w).second);
            }
            spec.lexicon[static_cast<std::size_t>(c)] = w;
        }

        if (li == pivot_index) {
            spec.order = OrderRule::identity;
            spec.suffix.kind = SuffixRule::Kind::none;
        } else {
            spec.order = orders[variant % 4];
            spec.suffix.kind = suffix_kinds[variant % 3];
            spec.suffix.sfx1 = cons[0] + vows[0];
            spec.suffix.sfx2 = cons[1] + vows[1];
            ++variant;
        }
        family.push_back(std::move(spec));
    }
    return family;
}

std::string realize(const ConceptSentence& cs, const LanguageSpec& lang) {
    const std::size_t n = cs.concepts.size();
    std::vector<int> ordered(cs.concepts);
    switch (lang.order) {
        case OrderRule::identity:
            break;
        case OrderRule::reverse:
            std::reverse(ordered.begin(), ordered.end());
            break;
        case OrderRule::rotate_one:
            if (n > 1) std::rotate(ordered.begin(), ordered.begin() + 1, ordered.end());
            break;
        case OrderRule::rotate_two:
            if (n > 2)
                std::rotate(ordered.begin(), ordered.begin() + 2, ordered.end());
            else
                std::reverse(ordered.begin(), ordered.end());
            break;
        case OrderRule::swap_adjacent:
            for (std::size_t i = 0; i + 1 < n; i += 2) std::swap(ordered[i], ordered[i + 1]);
            break;
    }

    // Content detection must not depend on an inventory object here: lexicon
    // stems encode it (content words are consonant-initial).
    auto is_vowel = [](char c) {
        return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
    };

    std::string out;
    for (std::size_t i = 0; i < ordered.size(); ++i) {
        const int c = ordered[i];
        if (c < 0 || static_cast<std::size_t>(c) >= lang.lexicon.size())
            throw std::out_of_range("realize: unknown concept id " + std::to_string(c));
        std::string w = lang.lexicon[static_cast<std::size_t>(c)];
        const bool content = !w.empty() && !is_vowel(w[0]);
        switch (lang.suffix.kind) {
            case SuffixRule::Kind::none:
                break;
            case SuffixRule::Kind::content_all:
                if (content) w += lang.suffix.sfx1;
                break;
            case SuffixRule::Kind::alternating:
                if (content) w += (i % 2 == 0 ? lang.suffix.sfx1 : lang.suffix.sfx2);
                break;
            case SuffixRule::Kind::final_word:
                if (i + 1 == ordered.size()) w += lang.suffix.sfx1;
                break;
        }
        if (!out.empty()) out += ' ';
        out += w;
    }
    return out;
}

ConceptSentence noisy_variant(const ConceptSentence& cs, const ConceptInventory& inv, double p,
                              num::RngState& rng) {
    ConceptSentence out = cs;
    if (p <= 0.0 || inv.group_size < 2) return out;
    for (int& c : out.concepts) {
        if (!inv.is_content(c) || !rng.bernoulli(p)) continue;
        const int g = inv.group_of(c);
        int k = c - inv.member_of(g, 0);
        const int shift =
            1 + static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(inv.group_size - 1)));
        c = inv.member_of(g, (k + shift) % inv.group_size);
    }
    return out;
}

}  // namespace mse::synth
