#include "mselab/synthlang/benchmark_gen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mse::synth {

MultiParallelCorpus build_corpus(const ConceptInventory& inv, int n_items,
                                 double hard_negative_fraction, num::RngState rng,
                                 int max_group) {
    MultiParallelCorpus corpus;
    corpus.items.reserve(static_cast<std::size_t>(std::max(0, n_items)));
    for (int i = 0; i < n_items; ++i) {
        ParaItem item;
        item.anchor = gen_concept_sentence(inv, rng, max_group);
        item.positive = gen_paraphrase(item.anchor, inv, rng);
        if (rng.bernoulli(hard_negative_fraction))
            item.hard_negative = gen_hard_negative(item.anchor, inv, rng);
        corpus.items.push_back(std::move(item));
    }
    return corpus;
}

RealizedCorpus realize_corpus(const MultiParallelCorpus& corpus,
                              const std::vector<LanguageSpec>& family, std::size_t pivot_index,
                              const ConceptInventory& inv, double noise_p, num::RngState rng) {
    RealizedCorpus out;
    for (const auto& lang : family) out.langs.push_back(lang.lang_id);
    out.items.resize(corpus.items.size());
    for (std::size_t i = 0; i < corpus.items.size(); ++i) {
        out.items[i].resize(family.size());
        for (std::size_t l = 0; l < family.size(); ++l) {
            const bool pivot = (l == pivot_index);
            const ParaItem& item = corpus.items[i];
            RealizedItem r;
            if (pivot) {
                r.anchor = realize(item.anchor, family[l]);
                r.positive = realize(item.positive, family[l]);
                if (item.hard_negative) r.hard = realize(*item.hard_negative, family[l]);
            } else {
                r.anchor = realize(noisy_variant(item.anchor, inv, noise_p, rng), family[l]);
                r.positive = realize(noisy_variant(item.positive, inv, noise_p, rng), family[l]);
                if (item.hard_negative)
                    r.hard = realize(noisy_variant(*item.hard_negative, inv, noise_p, rng), family[l]);
            }
            out.items[i][l] = std::move(r);
        }
    }
    return out;
}

std::vector<std::string> build_mlm_corpus(const ConceptInventory& inv, const LanguageSpec& lang,
                                          bool is_pivot, int n_sentences, double noise_p,
                                          num::RngState rng) {
    std::vector<std::string> lines;
    lines.reserve(static_cast<std::size_t>(std::max(0, n_sentences)));
    for (int i = 0; i < n_sentences; ++i) {
        ConceptSentence cs = gen_concept_sentence(inv, rng);
        if (!is_pivot && noise_p > 0.0) cs = noisy_variant(cs, inv, noise_p, rng);
        lines.push_back(realize(cs, lang));
    }
    return lines;
}

// ----------------------------- STS -----------------------------

namespace {

struct StsConceptPair {
    ConceptSentence a, b;
    double gold;
};

// Anchor with k content groups; the pair partner replaces round(level*k)
// groups with fresh ones, synonym-swaps the kept concepts with prob 0.5 and
// redraws function concepts.
StsConceptPair make_sts_concepts(const ConceptInventory& inv, double level, num::RngState& rng) {
    const int k = 3 + static_cast<int>(rng.uniform_below(4));  // 3..6 content groups
    std::set<int> groups;
    std::vector<int> a_content;
    while (static_cast<int>(a_content.size()) < k) {
        const int g = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(inv.n_groups)));
        if (!groups.insert(g).second) continue;
        a_content.push_back(
            inv.member_of(g, static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(inv.group_size)))));
    }
    const int replaced = static_cast<int>(std::lround(level * k));

    std::vector<int> b_content = a_content;
    // Choose the replaced positions.
    std::vector<int> idx(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i;
    for (std::size_t i = idx.size(); i > 1; --i) {
        const std::size_t j = rng.uniform_below(i);
        std::swap(idx[i - 1], idx[j]);
    }
    for (int r = 0; r < replaced; ++r) {
        while (true) {
            const int g = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(inv.n_groups)));
            if (groups.count(g)) continue;
            groups.insert(g);
            b_content[static_cast<std::size_t>(idx[static_cast<std::size_t>(r)])] = inv.member_of(
                g, static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(inv.group_size))));
            break;
        }
    }
    // Synonym-swap the kept concepts for textual variety at identical gold.
    if (inv.group_size >= 2) {
        for (int r = replaced; r < k; ++r) {
            int& c = b_content[static_cast<std::size_t>(idx[static_cast<std::size_t>(r)])];
            if (!rng.bernoulli(0.5)) continue;
            const int g = inv.group_of(c);
            int member = c - inv.member_of(g, 0);
            const int shift =
                1 + static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(inv.group_size - 1)));
            c = inv.member_of(g, (member + shift) % inv.group_size);
        }
    }

    auto assemble = [&](std::vector<int> content) {
        const int n_func = static_cast<int>(rng.uniform_below(3));
        for (int f = 0; f < n_func; ++f)
            content.push_back(inv.n_content() +
                              static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(inv.n_function))));
        for (std::size_t i = content.size(); i > 1; --i) {
            const std::size_t j = rng.uniform_below(i);
            std::swap(content[i - 1], content[j]);
        }
        ConceptSentence cs;
        cs.concepts = std::move(content);
        return cs;
    };

    StsConceptPair pair;
    pair.a = assemble(a_content);
    pair.b = assemble(b_content);
    pair.gold = static_cast<double>(k - replaced) / static_cast<double>(k + replaced);
    return pair;
}

std::vector<int> sorted_groups(const ConceptSentence& cs, const ConceptInventory& inv) {
    const auto gs = cs.content_groups(inv);
    return std::vector<int>(gs.begin(), gs.end());
}

}  // namespace

StsBenchmark build_sts(const ConceptInventory& inv, const std::vector<LanguageSpec>& family,
                       const std::vector<double>& levels, int n_mono_per_lang,
                       int n_cross_per_direction, std::uint64_t seed) {
    if (levels.empty()) throw std::invalid_argument("sts: no corruption levels");
    for (double l : levels)
        if (l < 0.0 || l > 1.0) throw std::invalid_argument("sts: levels must lie in [0,1]");

    StsBenchmark bench;
    num::RngState root(seed);

    auto emit = [&](const LanguageSpec& la, const LanguageSpec& lb, int count,
                    num::RngState& rng) {
        for (int i = 0; i < count; ++i) {
            const double level = levels[static_cast<std::size_t>(i) % levels.size()];
            const StsConceptPair cp = make_sts_concepts(inv, level, rng);
            StsPair p;
            p.lang_a = la.lang_id;
            p.lang_b = lb.lang_id;
            p.text_a = realize(cp.a, la);
            p.text_b = realize(cp.b, lb);
            p.gold = cp.gold;
            p.groups_a = sorted_groups(cp.a, inv);
            p.groups_b = sorted_groups(cp.b, inv);
            bench.pairs.push_back(std::move(p));
        }
    };

    for (const auto& lang : family) {
        num::RngState rng = root.derive("sts-mono-" + lang.lang_id);
        emit(lang, lang, n_mono_per_lang, rng);
    }
    for (const auto& la : family) {
        for (const auto& lb : family) {
            if (la.lang_id == lb.lang_id) continue;
            num::RngState rng = root.derive("sts-cross-" + la.lang_id + "-" + lb.lang_id);
            emit(la, lb, n_cross_per_direction, rng);
        }
    }
    return bench;
}

// ----------------------------- MCQA -----------------------------

namespace {

struct PassageDraft {
    std::vector<ConceptSentence> sentences;
    std::set<int> groups;
};

PassageDraft make_passage(const ConceptInventory& inv, num::RngState& rng) {
    PassageDraft d;
    const int n_sent = 3 + static_cast<int>(rng.uniform_below(3));  // 3..5
    for (int s = 0; s < n_sent; ++s) {
        const int k = 3 + static_cast<int>(rng.uniform_below(4));
        std::vector<int> content;
        while (static_cast<int>(content.size()) < k) {
            const int g = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(inv.n_groups)));
            if (d.groups.count(g)) continue;  // disjoint within the whole passage
            d.groups.insert(g);
            content.push_back(inv.member_of(
                g, static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(inv.group_size)))));
        }
        const int n_func = static_cast<int>(rng.uniform_below(3));
        for (int f = 0; f < n_func; ++f)
            content.push_back(inv.n_content() +
                              static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(inv.n_function))));
        for (std::size_t i = content.size(); i > 1; --i) {
            const std::size_t j = rng.uniform_below(i);
            std::swap(content[i - 1], content[j]);
        }
        ConceptSentence cs;
        cs.concepts = std::move(content);
        d.sentences.push_back(std::move(cs));
    }
    return d;
}

std::vector<int> union_groups(const std::set<int>& a, const std::set<int>& b) {
    std::set<int> u = a;
    u.insert(b.begin(), b.end());
    return std::vector<int>(u.begin(), u.end());
}

}  // namespace

McqaBenchmark build_mcqa(const ConceptInventory& inv, const std::vector<LanguageSpec>& family,
                         int n_mono, int n_cross, std::uint64_t seed) {
    const int n_items = n_mono + n_cross;
    if (n_items < 2) throw std::invalid_argument("mcqa: need at least 2 items for distractors");
    if (family.size() < 2) throw std::invalid_argument("mcqa: need at least 2 languages");

    num::RngState root(seed);
    num::RngState rng = root.derive("mcqa");

    // Passages first; distractors then draw from other items' passages.
    std::vector<PassageDraft> passages;
    passages.reserve(static_cast<std::size_t>(n_items));
    for (int i = 0; i < n_items; ++i) passages.push_back(make_passage(inv, rng));

    McqaBenchmark bench;
    for (int i = 0; i < n_items; ++i) {
        const PassageDraft& pass = passages[static_cast<std::size_t>(i)];
        McqaItem item;
        if (i < n_mono) {
            const std::size_t l = rng.uniform_below(family.size());
            item.lang_passage = family[l].lang_id;
            item.lang_qa = family[l].lang_id;
        } else {
            const std::size_t la = rng.uniform_below(family.size());
            std::size_t lb = rng.uniform_below(family.size() - 1);
            if (lb >= la) ++lb;
            item.lang_passage = family[la].lang_id;
            item.lang_qa = family[lb].lang_id;
        }
        const LanguageSpec* lp = nullptr;
        const LanguageSpec* lq = nullptr;
        for (const auto& l : family) {
            if (l.lang_id == item.lang_passage) lp = &l;
            if (l.lang_id == item.lang_qa) lq = &l;
        }

        std::string passage_text;
        for (const auto& s : pass.sentences) {
            if (!passage_text.empty()) passage_text += ' ';
            passage_text += realize(s, *lp);
        }
        item.passage = passage_text;
        item.passage_groups.assign(pass.groups.begin(), pass.groups.end());

        const std::size_t target = rng.uniform_below(pass.sentences.size());
        const ConceptSentence& pt = pass.sentences[target];

        // The concatenation question + correct answer paraphrases the target
        // sentence: the question carries one half of its content concepts,
        // the correct answer the complementary half. Distractors use the
        // same half-coverage recipe over other passages' sentences so
        // candidate length never gives the answer away.
        std::vector<int> pt_content = pt.content_ids(inv);
        for (std::size_t i2 = pt_content.size(); i2 > 1; --i2) {
            const std::size_t j2 = rng.uniform_below(i2);
            std::swap(pt_content[i2 - 1], pt_content[j2]);
        }
        const std::size_t half = (pt_content.size() + 1) / 2;
        auto make_part = [&](const std::vector<int>& ids, std::size_t lo, std::size_t hi) {
            ConceptSentence part;
            for (std::size_t i2 = lo; i2 < hi; ++i2) {
                int c = ids[i2];
                if (inv.group_size >= 2 && rng.bernoulli(0.5)) {
                    const int g = inv.group_of(c);
                    const int member = c - inv.member_of(g, 0);
                    const int shift = 1 + static_cast<int>(rng.uniform_below(
                                              static_cast<std::uint64_t>(inv.group_size - 1)));
                    c = inv.member_of(g, (member + shift) % inv.group_size);
                }
                part.concepts.push_back(c);
            }
            const int n_func = static_cast<int>(rng.uniform_below(3));
            for (int f = 0; f < n_func; ++f)
                part.concepts.push_back(
                    inv.n_content() +
                    static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(inv.n_function))));
            for (std::size_t i2 = part.concepts.size(); i2 > 1; --i2) {
                const std::size_t j2 = rng.uniform_below(i2);
                std::swap(part.concepts[i2 - 1], part.concepts[j2]);
            }
            return part;
        };
        const ConceptSentence question_cs = make_part(pt_content, 0, half);
        const ConceptSentence correct_cs = make_part(pt_content, half, pt_content.size());
        item.question = realize(question_cs, *lq);

        // Distractors: group-disjoint from this passage, answer-shaped.
        std::array<ConceptSentence, 3> distractors;
        for (int dnum = 0; dnum < 3; ++dnum) {
            bool found = false;
            for (int attempt = 0; attempt < 200 && !found; ++attempt) {
                std::size_t other = rng.uniform_below(static_cast<std::uint64_t>(n_items - 1));
                if (static_cast<int>(other) >= i) ++other;
                const PassageDraft& op = passages[other];
                const std::size_t si = rng.uniform_below(op.sentences.size());
                const ConceptSentence& src = op.sentences[si];
                bool disjoint = true;
                for (int g : src.content_groups(inv))
                    if (pass.groups.count(g)) {
                        disjoint = false;
                        break;
                    }
                if (!disjoint) continue;
                std::vector<int> src_content = src.content_ids(inv);
                for (std::size_t i2 = src_content.size(); i2 > 1; --i2) {
                    const std::size_t j2 = rng.uniform_below(i2);
                    std::swap(src_content[i2 - 1], src_content[j2]);
                }
                const std::size_t src_half = (src_content.size() + 1) / 2;
                distractors[static_cast<std::size_t>(dnum)] =
                    make_part(src_content, src_half, src_content.size());
                if (distractors[static_cast<std::size_t>(dnum)].content_ids(inv).empty())
                    distractors[static_cast<std::size_t>(dnum)] =
                        make_part(src_content, 0, src_half);
                found = true;
            }
            if (!found)
                throw std::runtime_error(
                    "mcqa: corpus too small to draw group-disjoint distractors");
        }

        item.correct = static_cast<int>(rng.uniform_below(4));
        int next_distractor = 0;
        const auto q_groups = question_cs.content_groups(inv);
        for (int a = 0; a < 4; ++a) {
            const ConceptSentence& cs =
                (a == item.correct) ? correct_cs
                                    : distractors[static_cast<std::size_t>(next_distractor++)];
            item.answers[static_cast<std::size_t>(a)] = realize(cs, *lq);
            item.qa_groups[static_cast<std::size_t>(a)] =
                union_groups(q_groups, cs.content_groups(inv));
        }
        bench.items.push_back(std::move(item));
    }
    return bench;
}

}  // namespace mse::synth
