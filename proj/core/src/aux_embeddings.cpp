#include "mselab/transplant/aux_embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "mselab/numerics/rng.hpp"

namespace mse::focus {

namespace {

// Token strings of a line under one tokenizer, specials stripped.
std::vector<std::string> tokenize_strings(const tok::BpeModel& model, const std::string& line) {
    std::vector<std::string> out;
    // Long max_len: aux training must see whole lines.
    const std::vector<int> ids = tok::encode(model, line, 1 << 20);
    for (int id : ids) {
        if (model.vocab.is_special(id)) continue;
        out.push_back(model.vocab.token_of[static_cast<std::size_t>(id)]);
    }
    return out;
}

// Top-k eigenpairs of a dense symmetric matrix by subspace iteration with a
// fixed deterministic start. Returns eigenvalues (by |lambda| descending) and
// eigenvectors as columns.
void symmetric_topk(const std::vector<double>& m, std::size_t n, std::size_t k,
                    std::vector<double>& eigvals, std::vector<double>& eigvecs) {
    k = std::min(k, n);
    std::vector<double> q(n * k);
    num::RngState rng(0x5EEDF0C05ULL);
    for (double& x : q) x = rng.normal();

    auto orthonormalize = [&]() {
        for (std::size_t c = 0; c < k; ++c) {
            for (std::size_t p = 0; p < c; ++p) {
                double dot = 0.0;
                for (std::size_t r = 0; r < n; ++r) dot += q[r * k + c] * q[r * k + p];
                for (std::size_t r = 0; r < n; ++r) q[r * k + c] -= dot * q[r * k + p];
            }
            double norm = 0.0;
            for (std::size_t r = 0; r < n; ++r) norm += q[r * k + c] * q[r * k + c];
            norm = std::sqrt(norm);
            if (norm < 1e-300) {
                // Deterministic re-seed for a collapsed direction.
                for (std::size_t r = 0; r < n; ++r) q[r * k + c] = rng.normal();
                double nn = 0.0;
                for (std::size_t r = 0; r < n; ++r) nn += q[r * k + c] * q[r * k + c];
                norm = std::sqrt(nn);
            }
            for (std::size_t r = 0; r < n; ++r) q[r * k + c] /= norm;
        }
    };

    orthonormalize();
    std::vector<double> next(n * k);
    std::vector<double> prev_eval(k, 0.0);
    eigvals.assign(k, 0.0);
    const int max_iter = 100;
    for (int it = 0; it < max_iter; ++it) {
        // next = M * q
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t r = 0; r < n; ++r) {
            const double* mr = m.data() + r * n;
            for (std::size_t c2 = 0; c2 < n; ++c2) {
                const double v = mr[c2];
                if (v == 0.0) continue;
                const double* qr = q.data() + c2 * k;
                double* nr = next.data() + r * k;
                for (std::size_t c = 0; c < k; ++c) nr[c] += v * qr[c];
            }
        }
        // Rayleigh estimates before orthonormalization.
        for (std::size_t c = 0; c < k; ++c) {
            double dot = 0.0;
            for (std::size_t r = 0; r < n; ++r) dot += q[r * k + c] * next[r * k + c];
            eigvals[c] = dot;
        }
        q.swap(next);
        orthonormalize();
        double drift = 0.0;
        for (std::size_t c = 0; c < k; ++c)
            drift = std::max(drift, std::abs(eigvals[c] - prev_eval[c]));
        prev_eval = eigvals;
        if (it > 4 && drift < 1e-12) break;
    }
    eigvecs = std::move(q);
}

}  // namespace

AuxEmbeddings train_aux_embeddings(const std::vector<std::string>& corpus,
                                   const tok::BpeModel& source_tok,
                                   const tok::BpeModel& target_tok, int dim, int window) {
    if (corpus.empty()) throw std::invalid_argument("aux embeddings: empty corpus");
    if (dim < 2) throw std::invalid_argument("aux embeddings: dim must be >= 2");
    if (window < 1) throw std::invalid_argument("aux embeddings: window must be >= 1");

    // Shared string-keyed index over both tokenizations (ordered for
    // determinism of the matrix layout). Every vocabulary token gets a row so
    // tokens that never occur (specials, shadowed merges) still have vectors.
    std::map<std::string, std::size_t> index;
    for (const tok::BpeModel* model : {&source_tok, &target_tok})
        for (const std::string& t : model->vocab.token_of) index.emplace(t, index.size());
    std::vector<std::vector<std::size_t>> streams;
    streams.reserve(corpus.size() * 2);
    for (const tok::BpeModel* model : {&source_tok, &target_tok}) {
        for (const std::string& line : corpus) {
            std::vector<std::size_t> stream;
            for (const std::string& s : tokenize_strings(*model, line)) {
                auto [it, _] = index.emplace(s, index.size());
                stream.push_back(it->second);
            }
            streams.push_back(std::move(stream));
        }
    }
    // Re-index in sorted key order so the layout is corpus-order independent.
    {
        std::size_t next_id = 0;
        std::vector<std::size_t> remap(index.size());
        for (auto& [_, id] : index) {
            remap[id] = next_id;
            id = next_id++;
        }
        for (auto& stream : streams)
            for (auto& t : stream) t = remap[t];
    }

    const std::size_t n = index.size();
    std::vector<double> cooc(n * n, 0.0);
    std::vector<double> row_sum(n, 0.0);
    double total = 0.0;
    for (const auto& stream : streams) {
        for (std::size_t i = 0; i < stream.size(); ++i) {
            const std::size_t lo = i > static_cast<std::size_t>(window) ? i - window : 0;
            for (std::size_t j = lo; j < i; ++j) {
                cooc[stream[i] * n + stream[j]] += 1.0;
                cooc[stream[j] * n + stream[i]] += 1.0;
            }
        }
    }
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) row_sum[r] += cooc[r * n + c];
    for (double s : row_sum) total += s;

    // Positive PMI.
    std::vector<double> ppmi(n * n, 0.0);
    if (total > 0.0) {
        for (std::size_t r = 0; r < n; ++r) {
            if (row_sum[r] == 0.0) continue;
            for (std::size_t c = 0; c < n; ++c) {
                const double x = cooc[r * n + c];
                if (x == 0.0 || row_sum[c] == 0.0) continue;
                const double pmi = std::log(x * total / (row_sum[r] * row_sum[c]));
                if (pmi > 0.0) ppmi[r * n + c] = pmi;
            }
        }
    }

    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(dim), n);
    std::vector<double> eigvals, eigvecs;
    symmetric_topk(ppmi, n, k, eigvals, eigvecs);

    // Embedding row = U * sqrt(|lambda|), near-zero spectrum clamped so rank
    // deficiency shows up as zero trailing dimensions.
    double lmax = 0.0;
    for (double l : eigvals) lmax = std::max(lmax, std::abs(l));
    std::vector<double> sing(k, 0.0);
    for (std::size_t c = 0; c < k; ++c) {
        const double a = std::abs(eigvals[c]);
        sing[c] = (lmax > 0.0 && a > 1e-9 * lmax) ? std::sqrt(a) : 0.0;
    }
    // Sign convention: largest-|entry| of each vector nonnegative.
    for (std::size_t c = 0; c < k; ++c) {
        double best = 0.0;
        std::size_t best_r = 0;
        for (std::size_t r = 0; r < n; ++r) {
            const double v = std::abs(eigvecs[r * k + c]);
            if (v > best) {
                best = v;
                best_r = r;
            }
        }
        if (eigvecs[best_r * k + c] < 0.0)
            for (std::size_t r = 0; r < n; ++r) eigvecs[r * k + c] = -eigvecs[r * k + c];
    }

    AuxEmbeddings aux;
    aux.dim = dim;
    for (const auto& [token, id] : index) {
        std::vector<float> vec(static_cast<std::size_t>(dim), 0.0f);
        if (row_sum[id] > 0.0) {
            for (std::size_t c = 0; c < k; ++c)
                vec[c] = static_cast<float>(eigvecs[id * k + c] * sing[c]);
        } else {
            aux.zero_tokens.push_back(token);
        }
        aux.vectors.emplace(token, std::move(vec));
    }
    return aux;
}

}  // namespace mse::focus
