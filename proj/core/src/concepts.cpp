#include "mselab/synthlang/concepts.hpp"

#include <algorithm>
#include <stdexcept>

namespace mse::synth {

std::vector<int> ConceptSentence::content_ids(const ConceptInventory& inv) const {
    std::vector<int> out;
    for (int c : concepts)
        if (inv.is_content(c)) out.push_back(c);
    return out;
}

std::set<int> ConceptSentence::content_groups(const ConceptInventory& inv) const {
    std::set<int> out;
    for (int c : concepts)
        if (inv.is_content(c)) out.insert(inv.group_of(c));
    return out;
}

namespace {

double jaccard(const std::set<int>& a, const std::set<int>& b) {
    if (a.empty() && b.empty()) return 1.0;
    std::size_t inter = 0;
    for (int x : a) inter += b.count(x);
    const std::size_t uni = a.size() + b.size() - inter;
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

double content_jaccard_ids(const ConceptSentence& a, const ConceptSentence& b,
                           const ConceptInventory& inv) {
    std::set<int> sa, sb;
    for (int c : a.concepts)
        if (inv.is_content(c)) sa.insert(c);
    for (int c : b.concepts)
        if (inv.is_content(c)) sb.insert(c);
    return jaccard(sa, sb);
}

double content_jaccard_groups(const ConceptSentence& a, const ConceptSentence& b,
                              const ConceptInventory& inv) {
    return jaccard(a.content_groups(inv), b.content_groups(inv));
}

ConceptSentence gen_concept_sentence(const ConceptInventory& inv, num::RngState& rng,
                                     int max_group) {
    const int group_pool = (max_group > 0 && max_group <= inv.n_groups) ? max_group : inv.n_groups;
    const int len = 3 + static_cast<int>(rng.uniform_below(10));  // uniform in [3, 12]
    const int max_func = std::min(3, len - 2);
    const int n_func = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(max_func + 1)));
    const int n_cont = std::min(len - n_func, group_pool);

    // Distinct content groups, one member each.
    std::vector<int> picked;
    std::set<int> used_groups;
    while (static_cast<int>(picked.size()) < n_cont) {
        const int g = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(group_pool)));
        if (used_groups.count(g)) continue;
        used_groups.insert(g);
        const int k = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(inv.group_size)));
        picked.push_back(inv.member_of(g, k));
    }
    for (int i = 0; i < n_func; ++i)
        picked.push_back(inv.n_content() +
                         static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(inv.n_function))));

    // Shuffle positions (Fisher-Yates).
    for (std::size_t i = picked.size(); i > 1; --i) {
        const std::size_t j = rng.uniform_below(i);
        std::swap(picked[i - 1], picked[j]);
    }
    ConceptSentence cs;
    cs.concepts = std::move(picked);
    return cs;
}

std::vector<ConceptSentence> gen_concept_corpus(const ConceptInventory& inv, int n_sentences,
                                                num::RngState rng, int max_group) {
    if (inv.n_content() < 50 || inv.group_size < 2)
        throw std::invalid_argument(
            "concept corpus: inventory too small (need >= 50 content concepts in groups of >= 2)");
    if (inv.n_function < 1) throw std::invalid_argument("concept corpus: no function concepts");
    std::vector<ConceptSentence> out;
    out.reserve(static_cast<std::size_t>(std::max(0, n_sentences)));
    for (int i = 0; i < n_sentences; ++i) out.push_back(gen_concept_sentence(inv, rng, max_group));
    return out;
}

ConceptSentence gen_paraphrase(const ConceptSentence& cs, const ConceptInventory& inv,
                               num::RngState& rng, ParaphraseStats* stats, double p_swap,
                               double p_func) {
    auto swap_sibling = [&](int id, num::RngState& r) {
        if (inv.group_size < 2) return id;
        const int g = inv.group_of(id);
        int k = id - inv.member_of(g, 0);
        const int shift =
            1 + static_cast<int>(r.uniform_below(static_cast<std::uint64_t>(inv.group_size - 1)));
        k = (k + shift) % inv.group_size;
        return inv.member_of(g, k);
    };

    for (int attempt = 0; attempt < 20; ++attempt) {
        ConceptSentence cand = cs;
        for (int& c : cand.concepts)
            if (inv.is_content(c) && rng.bernoulli(p_swap)) c = swap_sibling(c, rng);
        if (rng.bernoulli(p_func)) {
            // Drop one function concept if any, otherwise insert one.
            std::vector<std::size_t> fpos;
            for (std::size_t i = 0; i < cand.concepts.size(); ++i)
                if (inv.is_function(cand.concepts[i])) fpos.push_back(i);
            if (!fpos.empty() && rng.bernoulli(0.5)) {
                cand.concepts.erase(cand.concepts.begin() +
                                    static_cast<std::ptrdiff_t>(fpos[rng.uniform_below(fpos.size())]));
            } else {
                const int f = inv.n_content() +
                              static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(inv.n_function)));
                const std::size_t at = rng.uniform_below(cand.concepts.size() + 1);
                cand.concepts.insert(cand.concepts.begin() + static_cast<std::ptrdiff_t>(at), f);
            }
        }
        if (content_jaccard_ids(cs, cand, inv) >= 0.6) return cand;
    }

    // Resampling exhausted: swap only as many concepts as the overlap bound
    // allows and report the fallback.
    if (stats) stats->fallbacks += 1;
    ConceptSentence cand = cs;
    std::vector<std::size_t> cpos;
    for (std::size_t i = 0; i < cand.concepts.size(); ++i)
        if (inv.is_content(cand.concepts[i])) cpos.push_back(i);
    const std::size_t budget = cpos.size() / 4;  // (k-m)/(k+m) >= 0.6 iff m <= k/4
    for (std::size_t i = cpos.size(); i > 1; --i) {
        const std::size_t j = rng.uniform_below(i);
        std::swap(cpos[i - 1], cpos[j]);
    }
    for (std::size_t i = 0; i < budget; ++i)
        cand.concepts[cpos[i]] = swap_sibling(cand.concepts[cpos[i]], rng);
    return cand;
}

ConceptSentence gen_hard_negative(const ConceptSentence& cs, const ConceptInventory& inv,
                                  num::RngState& rng) {
    ConceptSentence out = cs;
    std::vector<std::size_t> cpos;
    for (std::size_t i = 0; i < out.concepts.size(); ++i)
        if (inv.is_content(out.concepts[i])) cpos.push_back(i);
    if (cpos.empty()) throw std::invalid_argument("hard negative: sentence has no content concepts");
    const std::size_t at = cpos[rng.uniform_below(cpos.size())];
    const std::set<int> used = out.content_groups(inv);
    while (true) {
        const int g = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(inv.n_groups)));
        if (used.count(g)) continue;
        const int k = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(inv.group_size)));
        out.concepts[at] = inv.member_of(g, k);
        return out;
    }
}

}  // namespace mse::synth
