#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "mselab/numerics/tensor.hpp"

namespace mse::num {

// ----------------------------- raw GEMM kernels -----------------------------
// C(n,m) += A(n,k) * B(k,m). (i,k,j) loop order keeps the inner loop streaming.
template <typename T>
void gemm_nn(const T* A, const T* B, T* C, std::size_t n, std::size_t k, std::size_t m) {
    for (std::size_t i = 0; i < n; ++i) {
        const T* a = A + i * k;
        T* c = C + i * m;
        for (std::size_t p = 0; p < k; ++p) {
            const T av = a[p];
            if (av == T(0)) continue;
            const T* b = B + p * m;
            for (std::size_t j = 0; j < m; ++j) c[j] += av * b[j];
        }
    }
}

// C(n,m) += A(n,k) * B(m,k)^T — row-by-row dot products.
template <typename T>
void gemm_nt(const T* A, const T* B, T* C, std::size_t n, std::size_t k, std::size_t m) {
    for (std::size_t i = 0; i < n; ++i) {
        const T* a = A + i * k;
        T* c = C + i * m;
        for (std::size_t j = 0; j < m; ++j) {
            const T* b = B + j * k;
            T acc = T(0);
            for (std::size_t p = 0; p < k; ++p) acc += a[p] * b[p];
            c[j] += acc;
        }
    }
}

// C(n,m) += A(k,n)^T * B(k,m).
template <typename T>
void gemm_tn(const T* A, const T* B, T* C, std::size_t n, std::size_t k, std::size_t m) {
    for (std::size_t p = 0; p < k; ++p) {
        const T* a = A + p * n;
        const T* b = B + p * m;
        for (std::size_t i = 0; i < n; ++i) {
            const T av = a[i];
            if (av == T(0)) continue;
            T* c = C + i * m;
            for (std::size_t j = 0; j < m; ++j) c[j] += av * b[j];
        }
    }
}

// ----------------------------- node plumbing -----------------------------

namespace detail {

inline thread_local int no_grad_depth = 0;

template <typename T>
bool any_requires(const Tensor<T>& t) {
    return t.requires_grad;
}

template <typename T, typename... Rest>
bool any_requires(const Tensor<T>& t, const Rest&... rest) {
    return t.requires_grad || any_requires(rest...);
}

template <typename... Ts>
bool track(const Ts&... ts) {
    return no_grad_depth == 0 && any_requires(ts...);
}

template <typename T>
void attach(Tensor<T>& out, std::vector<Tensor<T>> parents,
            std::function<void(Tensor<T>&)> fn) {
    out.requires_grad = true;
    out.ensure_grad();  // before any copy of `out` is taken, so all alias it
    out.node = std::make_shared<Node<T>>();
    out.node->parents = std::move(parents);
    out.node->backward = std::move(fn);
}

template <typename T>
void accumulate(Tensor<T>& t, const std::vector<T>& delta) {
    if (!t.requires_grad) return;
    t.ensure_grad();
    auto& g = *t.grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += delta[i];
}

}  // namespace detail

// Scoped switch that disables graph construction (held-out loss evaluation,
// inference on models whose parameters are flagged trainable).
struct NoGradGuard {
    NoGradGuard() { ++detail::no_grad_depth; }
    ~NoGradGuard() { --detail::no_grad_depth; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

// ----------------------------- elementwise -----------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape != b.shape) throw std::invalid_argument("add: shape mismatch");
    Tensor<T> out = Tensor<T>::zeros(a.shape);
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) (*out.data)[i] = (*a.data)[i] + (*b.data)[i];
    if (detail::track(a, b)) {
        detail::attach<T>(out, {a, b}, [](Tensor<T>& o) {
            for (auto& p : o.node->parents) {
                if (!p.requires_grad) continue;
                p.ensure_grad();
                auto& g = *p.grad;
                const auto& og = *o.grad;
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += og[i];
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape != b.shape) throw std::invalid_argument("sub: shape mismatch");
    Tensor<T> out = Tensor<T>::zeros(a.shape);
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) (*out.data)[i] = (*a.data)[i] - (*b.data)[i];
    if (detail::track(a, b)) {
        detail::attach<T>(out, {a, b}, [](Tensor<T>& o) {
            auto& pa = o.node->parents[0];
            auto& pb = o.node->parents[1];
            const auto& og = *o.grad;
            if (pa.requires_grad) {
                pa.ensure_grad();
                for (std::size_t i = 0; i < og.size(); ++i) (*pa.grad)[i] += og[i];
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                for (std::size_t i = 0; i < og.size(); ++i) (*pb.grad)[i] -= og[i];
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape != b.shape) throw std::invalid_argument("mul: shape mismatch");
    Tensor<T> out = Tensor<T>::zeros(a.shape);
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) (*out.data)[i] = (*a.data)[i] * (*b.data)[i];
    if (detail::track(a, b)) {
        detail::attach<T>(out, {a, b}, [](Tensor<T>& o) {
            auto& pa = o.node->parents[0];
            auto& pb = o.node->parents[1];
            const auto& og = *o.grad;
            if (pa.requires_grad) {
                pa.ensure_grad();
                for (std::size_t i = 0; i < og.size(); ++i)
                    (*pa.grad)[i] += og[i] * (*pb.data)[i];
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                for (std::size_t i = 0; i < og.size(); ++i)
                    (*pb.grad)[i] += og[i] * (*pa.data)[i];
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c) {
    Tensor<T> out = Tensor<T>::zeros(a.shape);
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) (*out.data)[i] = (*a.data)[i] * c;
    if (detail::track(a)) {
        detail::attach<T>(out, {a}, [c](Tensor<T>& o) {
            auto& p = o.node->parents[0];
            p.ensure_grad();
            const auto& og = *o.grad;
            for (std::size_t i = 0; i < og.size(); ++i) (*p.grad)[i] += og[i] * c;
        });
    }
    return out;
}

// Broadcast-add a length-m vector to every row of an (n,m) matrix.
template <typename T>
Tensor<T> add_rowvec(const Tensor<T>& m, const Tensor<T>& v) {
    const std::size_t rows = m.rows(), cols = m.cols();
    if (v.numel() != cols) throw std::invalid_argument("add_rowvec: width mismatch");
    Tensor<T> out = Tensor<T>::zeros(m.shape);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
            (*out.data)[i * cols + j] = (*m.data)[i * cols + j] + (*v.data)[j];
    if (detail::track(m, v)) {
        detail::attach<T>(out, {m, v}, [rows, cols](Tensor<T>& o) {
            auto& pm = o.node->parents[0];
            auto& pv = o.node->parents[1];
            const auto& og = *o.grad;
            if (pm.requires_grad) {
                pm.ensure_grad();
                for (std::size_t i = 0; i < og.size(); ++i) (*pm.grad)[i] += og[i];
            }
            if (pv.requires_grad) {
                pv.ensure_grad();
                for (std::size_t i = 0; i < rows; ++i)
                    for (std::size_t j = 0; j < cols; ++j)
                        (*pv.grad)[j] += og[i * cols + j];
            }
        });
    }
    return out;
}

// ----------------------------- matrix products -----------------------------

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    if (b.rows() != k) throw std::invalid_argument("matmul: inner dim mismatch");
    Tensor<T> out = Tensor<T>::zeros({n, m});
    gemm_nn(a.data->data(), b.data->data(), out.data->data(), n, k, m);
    if (detail::track(a, b)) {
        detail::attach<T>(out, {a, b}, [n, k, m](Tensor<T>& o) {
            auto& pa = o.node->parents[0];
            auto& pb = o.node->parents[1];
            if (pa.requires_grad) {
                pa.ensure_grad();
                gemm_nt(o.grad->data(), pb.data->data(), pa.grad->data(), n, m, k);
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                gemm_tn(pa.data->data(), o.grad->data(), pb.grad->data(), k, n, m);
            }
        });
    }
    return out;
}

// A(n,k) * B(m,k)^T.
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
    const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
    if (b.cols() != k) throw std::invalid_argument("matmul_nt: inner dim mismatch");
    Tensor<T> out = Tensor<T>::zeros({n, m});
    gemm_nt(a.data->data(), b.data->data(), out.data->data(), n, k, m);
    if (detail::track(a, b)) {
        detail::attach<T>(out, {a, b}, [n, k, m](Tensor<T>& o) {
            auto& pa = o.node->parents[0];
            auto& pb = o.node->parents[1];
            if (pa.requires_grad) {
                pa.ensure_grad();
                gemm_nn(o.grad->data(), pb.data->data(), pa.grad->data(), n, m, k);
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                gemm_tn(o.grad->data(), pa.data->data(), pb.grad->data(), m, n, k);
            }
        });
    }
    return out;
}

// ----------------------------- activations -----------------------------

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
    Tensor<T> out = Tensor<T>::zeros(x.shape);
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) {
        const double v = static_cast<double>((*x.data)[i]);
        (*out.data)[i] = static_cast<T>(0.5 * v * (1.0 + std::erf(v * 0.7071067811865476)));
    }
    if (detail::track(x)) {
        detail::attach<T>(out, {x}, [](Tensor<T>& o) {
            auto& p = o.node->parents[0];
            p.ensure_grad();
            const auto& og = *o.grad;
            for (std::size_t i = 0; i < og.size(); ++i) {
                const double v = static_cast<double>((*p.data)[i]);
                const double cdf = 0.5 * (1.0 + std::erf(v * 0.7071067811865476));
                const double pdf = std::exp(-0.5 * v * v) * 0.3989422804014327;
                (*p.grad)[i] += og[i] * static_cast<T>(cdf + v * pdf);
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
    Tensor<T> out = Tensor<T>::zeros(x.shape);
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) {
        const T v = (*x.data)[i];
        (*out.data)[i] = v > T(0) ? v : T(0);
    }
    if (detail::track(x)) {
        detail::attach<T>(out, {x}, [](Tensor<T>& o) {
            auto& p = o.node->parents[0];
            p.ensure_grad();
            const auto& og = *o.grad;
            for (std::size_t i = 0; i < og.size(); ++i)
                if ((*p.data)[i] > T(0)) (*p.grad)[i] += og[i];
        });
    }
    return out;
}

// ----------------------------- row-wise normalizations -----------------------------

template <typename T>
Tensor<T> layer_norm_rows(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                          T eps = T(1e-12)) {
    const std::size_t n = x.rows(), d = x.cols();
    if (gamma.numel() != d || beta.numel() != d)
        throw std::invalid_argument("layer_norm: gamma/beta width mismatch");
    Tensor<T> out = Tensor<T>::zeros(x.shape);
    auto xhat = std::make_shared<std::vector<T>>(n * d);
    auto rstd = std::make_shared<std::vector<T>>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const T* row = x.data->data() + i * d;
        T mu = T(0);
        for (std::size_t j = 0; j < d; ++j) mu += row[j];
        mu /= static_cast<T>(d);
        T var = T(0);
        for (std::size_t j = 0; j < d; ++j) {
            const T c = row[j] - mu;
            var += c * c;
        }
        var /= static_cast<T>(d);
        const T r = T(1) / std::sqrt(var + eps);
        (*rstd)[i] = r;
        for (std::size_t j = 0; j < d; ++j) {
            const T h = (row[j] - mu) * r;
            (*xhat)[i * d + j] = h;
            (*out.data)[i * d + j] = h * (*gamma.data)[j] + (*beta.data)[j];
        }
    }
    if (detail::track(x, gamma, beta)) {
        detail::attach<T>(out, {x, gamma, beta}, [n, d, xhat, rstd](Tensor<T>& o) {
            auto& px = o.node->parents[0];
            auto& pg = o.node->parents[1];
            auto& pb = o.node->parents[2];
            const auto& og = *o.grad;
            if (pg.requires_grad) pg.ensure_grad();
            if (pb.requires_grad) pb.ensure_grad();
            if (px.requires_grad) px.ensure_grad();
            for (std::size_t i = 0; i < n; ++i) {
                const T* go = og.data() + i * d;
                const T* h = xhat->data() + i * d;
                if (pg.requires_grad)
                    for (std::size_t j = 0; j < d; ++j) (*pg.grad)[j] += go[j] * h[j];
                if (pb.requires_grad)
                    for (std::size_t j = 0; j < d; ++j) (*pb.grad)[j] += go[j];
                if (px.requires_grad) {
                    T s1 = T(0), s2 = T(0);
                    for (std::size_t j = 0; j < d; ++j) {
                        const T gj = go[j] * (*pg.data)[j];
                        s1 += gj;
                        s2 += gj * h[j];
                    }
                    s1 /= static_cast<T>(d);
                    s2 /= static_cast<T>(d);
                    T* gx = px.grad->data() + i * d;
                    const T r = (*rstd)[i];
                    for (std::size_t j = 0; j < d; ++j) {
                        const T gj = go[j] * (*pg.data)[j];
                        gx[j] += r * (gj - s1 - h[j] * s2);
                    }
                }
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> l2_normalize_rows(const Tensor<T>& x) {
    const std::size_t n = x.rows(), d = x.cols();
    Tensor<T> out = Tensor<T>::zeros(x.shape);
    auto norms = std::make_shared<std::vector<T>>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const T* row = x.data->data() + i * d;
        T s = T(0);
        for (std::size_t j = 0; j < d; ++j) s += row[j] * row[j];
        const T nv = std::sqrt(s);
        if (!(nv > T(0))) throw std::domain_error("l2_normalize: zero-norm row");
        (*norms)[i] = nv;
        for (std::size_t j = 0; j < d; ++j) (*out.data)[i * d + j] = row[j] / nv;
    }
    if (detail::track(x)) {
        detail::attach<T>(out, {x}, [n, d, norms](Tensor<T>& o) {
            auto& p = o.node->parents[0];
            p.ensure_grad();
            const auto& og = *o.grad;
            for (std::size_t i = 0; i < n; ++i) {
                const T* y = o.data->data() + i * d;
                const T* go = og.data() + i * d;
                T dot = T(0);
                for (std::size_t j = 0; j < d; ++j) dot += go[j] * y[j];
                T* gx = p.grad->data() + i * d;
                const T inv = T(1) / (*norms)[i];
                for (std::size_t j = 0; j < d; ++j) gx[j] += (go[j] - y[j] * dot) * inv;
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x) {
    const std::size_t n = x.rows(), d = x.cols();
    Tensor<T> out = Tensor<T>::zeros(x.shape);
    for (std::size_t i = 0; i < n; ++i) {
        const T* row = x.data->data() + i * d;
        T* orow = out.data->data() + i * d;
        T mx = row[0];
        for (std::size_t j = 1; j < d; ++j) mx = std::max(mx, row[j]);
        T sum = T(0);
        for (std::size_t j = 0; j < d; ++j) {
            orow[j] = std::exp(row[j] - mx);
            sum += orow[j];
        }
        for (std::size_t j = 0; j < d; ++j) orow[j] /= sum;
    }
    if (detail::track(x)) {
        detail::attach<T>(out, {x}, [n, d](Tensor<T>& o) {
            auto& p = o.node->parents[0];
            p.ensure_grad();
            const auto& og = *o.grad;
            for (std::size_t i = 0; i < n; ++i) {
                const T* y = o.data->data() + i * d;
                const T* go = og.data() + i * d;
                T dot = T(0);
                for (std::size_t j = 0; j < d; ++j) dot += go[j] * y[j];
                T* gx = p.grad->data() + i * d;
                for (std::size_t j = 0; j < d; ++j) gx[j] += y[j] * (go[j] - dot);
            }
        });
    }
    return out;
}

// ----------------------------- gather / scatter -----------------------------

// Token + position embedding sum: out[p] = tok[ids[p]] + pos[positions[p]].
template <typename T>
Tensor<T> embed_sum(const Tensor<T>& tok, const Tensor<T>& pos, const std::vector<int>& ids,
                    const std::vector<int>& positions) {
    if (ids.size() != positions.size())
        throw std::invalid_argument("embed_sum: ids/positions length mismatch");
    const std::size_t len = ids.size(), d = tok.cols();
    Tensor<T> out = Tensor<T>::zeros({len, d});
    for (std::size_t p = 0; p < len; ++p) {
        const T* tr = tok.data->data() + static_cast<std::size_t>(ids[p]) * d;
        const T* pr = pos.data->data() + static_cast<std::size_t>(positions[p]) * d;
        T* orow = out.data->data() + p * d;
        for (std::size_t j = 0; j < d; ++j) orow[j] = tr[j] + pr[j];
    }
    if (detail::track(tok, pos)) {
        detail::attach<T>(out, {tok, pos}, [ids, positions, d](Tensor<T>& o) {
            auto& ptok = o.node->parents[0];
            auto& ppos = o.node->parents[1];
            const auto& og = *o.grad;
            if (ptok.requires_grad) ptok.ensure_grad();
            if (ppos.requires_grad) ppos.ensure_grad();
            for (std::size_t p = 0; p < ids.size(); ++p) {
                const T* go = og.data() + p * d;
                if (ptok.requires_grad) {
                    T* g = ptok.grad->data() + static_cast<std::size_t>(ids[p]) * d;
                    for (std::size_t j = 0; j < d; ++j) g[j] += go[j];
                }
                if (ppos.requires_grad) {
                    T* g = ppos.grad->data() + static_cast<std::size_t>(positions[p]) * d;
                    for (std::size_t j = 0; j < d; ++j) g[j] += go[j];
                }
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> select_rows(const Tensor<T>& x, const std::vector<int>& rows) {
    const std::size_t d = x.cols();
    Tensor<T> out = Tensor<T>::zeros({rows.size(), d});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const T* src = x.data->data() + static_cast<std::size_t>(rows[i]) * d;
        T* dst = out.data->data() + i * d;
        for (std::size_t j = 0; j < d; ++j) dst[j] = src[j];
    }
    if (detail::track(x)) {
        detail::attach<T>(out, {x}, [rows, d](Tensor<T>& o) {
            auto& p = o.node->parents[0];
            p.ensure_grad();
            const auto& og = *o.grad;
            for (std::size_t i = 0; i < rows.size(); ++i) {
                T* g = p.grad->data() + static_cast<std::size_t>(rows[i]) * d;
                const T* go = og.data() + i * d;
                for (std::size_t j = 0; j < d; ++j) g[j] += go[j];
            }
        });
    }
    return out;
}

// Vertical concatenation of matrices sharing a width.
template <typename T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: no parts");
    const std::size_t d = parts[0].cols();
    std::size_t total = 0;
    for (const auto& p : parts) {
        if (p.cols() != d) throw std::invalid_argument("concat_rows: width mismatch");
        total += p.rows();
    }
    Tensor<T> out = Tensor<T>::zeros({total, d});
    std::size_t off = 0;
    bool track_any = false;
    for (const auto& p : parts) {
        std::copy(p.data->begin(), p.data->end(), out.data->begin() + off);
        off += p.numel();
        track_any = track_any || p.requires_grad;
    }
    if (track_any && detail::no_grad_depth == 0) {
        detail::attach<T>(out, parts, [d](Tensor<T>& o) {
            const auto& og = *o.grad;
            std::size_t off = 0;
            for (auto& p : o.node->parents) {
                const std::size_t n = p.numel();
                if (p.requires_grad) {
                    p.ensure_grad();
                    for (std::size_t i = 0; i < n; ++i) (*p.grad)[i] += og[off + i];
                }
                off += n;
            }
        });
    }
    return out;
}

// Column mean over rows: (n,d) -> (1,d).
template <typename T>
Tensor<T> mean_rows(const Tensor<T>& x) {
    const std::size_t n = x.rows(), d = x.cols();
    if (n == 0) throw std::invalid_argument("mean_rows: empty input");
    Tensor<T> out = Tensor<T>::zeros({1, d});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) (*out.data)[j] += (*x.data)[i * d + j];
    for (std::size_t j = 0; j < d; ++j) (*out.data)[j] /= static_cast<T>(n);
    if (detail::track(x)) {
        detail::attach<T>(out, {x}, [n, d](Tensor<T>& o) {
            auto& p = o.node->parents[0];
            p.ensure_grad();
            const auto& og = *o.grad;
            const T inv = T(1) / static_cast<T>(n);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < d; ++j) (*p.grad)[i * d + j] += og[j] * inv;
        });
    }
    return out;
}

// ----------------------------- fused attention -----------------------------

// Multi-head scaled dot-product self-attention over one sequence.
// Q, K, V: (len, d); d split into n_heads blocks. Softmax probabilities are
// saved for the backward pass.
template <typename T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                    std::size_t n_heads) {
    const std::size_t len = q.rows(), d = q.cols();
    if (k.rows() != len || v.rows() != len || k.cols() != d || v.cols() != d)
        throw std::invalid_argument("attention: shape mismatch");
    if (d % n_heads != 0) throw std::invalid_argument("attention: d % n_heads != 0");
    const std::size_t dh = d / n_heads;
    const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(dh));

    Tensor<T> out = Tensor<T>::zeros({len, d});
    auto probs = std::make_shared<std::vector<T>>(n_heads * len * len);

    std::vector<T> scores(len);
    for (std::size_t h = 0; h < n_heads; ++h) {
        const std::size_t off = h * dh;
        for (std::size_t i = 0; i < len; ++i) {
            const T* qi = q.data->data() + i * d + off;
            T mx = -std::numeric_limits<T>::infinity();
            for (std::size_t j = 0; j < len; ++j) {
                const T* kj = k.data->data() + j * d + off;
                T acc = T(0);
                for (std::size_t p = 0; p < dh; ++p) acc += qi[p] * kj[p];
                scores[j] = acc * inv_sqrt;
                mx = std::max(mx, scores[j]);
            }
            T sum = T(0);
            T* prow = probs->data() + (h * len + i) * len;
            for (std::size_t j = 0; j < len; ++j) {
                prow[j] = std::exp(scores[j] - mx);
                sum += prow[j];
            }
            for (std::size_t j = 0; j < len; ++j) prow[j] /= sum;
            T* orow = out.data->data() + i * d + off;
            for (std::size_t j = 0; j < len; ++j) {
                const T pj = prow[j];
                if (pj == T(0)) continue;
                const T* vj = v.data->data() + j * d + off;
                for (std::size_t p = 0; p < dh; ++p) orow[p] += pj * vj[p];
            }
        }
    }

    if (detail::track(q, k, v)) {
        detail::attach<T>(out, {q, k, v}, [len, d, dh, n_heads, inv_sqrt, probs](Tensor<T>& o) {
            auto& pq = o.node->parents[0];
            auto& pk = o.node->parents[1];
            auto& pv = o.node->parents[2];
            pq.ensure_grad();
            pk.ensure_grad();
            pv.ensure_grad();
            const auto& og = *o.grad;
            std::vector<T> dp(len), ds(len);
            for (std::size_t h = 0; h < n_heads; ++h) {
                const std::size_t off = h * dh;
                for (std::size_t i = 0; i < len; ++i) {
                    const T* go = og.data() + i * d + off;
                    const T* prow = probs->data() + (h * len + i) * len;
                    // dV and dP
                    for (std::size_t j = 0; j < len; ++j) {
                        const T* vj = pv.data->data() + j * d + off;
                        T acc = T(0);
                        for (std::size_t p = 0; p < dh; ++p) acc += go[p] * vj[p];
                        dp[j] = acc;
                        if (prow[j] != T(0)) {
                            T* gv = pv.grad->data() + j * d + off;
                            for (std::size_t p = 0; p < dh; ++p) gv[p] += prow[j] * go[p];
                        }
                    }
                    // softmax backward
                    T dot = T(0);
                    for (std::size_t j = 0; j < len; ++j) dot += dp[j] * prow[j];
                    for (std::size_t j = 0; j < len; ++j)
                        ds[j] = prow[j] * (dp[j] - dot) * inv_sqrt;
                    // dQ_i += ds_j * K_j ; dK_j += ds_j * Q_i
                    T* gq = pq.grad->data() + i * d + off;
                    const T* qi = pq.data->data() + i * d + off;
                    for (std::size_t j = 0; j < len; ++j) {
                        if (ds[j] == T(0)) continue;
                        const T* kj = pk.data->data() + j * d + off;
                        T* gk = pk.grad->data() + j * d + off;
                        for (std::size_t p = 0; p < dh; ++p) {
                            gq[p] += ds[j] * kj[p];
                            gk[p] += ds[j] * qi[p];
                        }
                    }
                }
            }
        });
    }
    return out;
}

// ----------------------------- losses -----------------------------

// Mean cross-entropy over rows of a logit matrix. Row i's target class is
// targets[i]. Softmax probabilities are cached for the backward pass.
template <typename T>
Tensor<T> cross_entropy_rows(const Tensor<T>& logits, const std::vector<int>& targets) {
    const std::size_t n = logits.rows(), d = logits.cols();
    if (targets.size() != n) throw std::invalid_argument("cross_entropy: target count mismatch");
    auto probs = std::make_shared<std::vector<T>>(n * d);
    T total = T(0);
    for (std::size_t i = 0; i < n; ++i) {
        const T* row = logits.data->data() + i * d;
        T mx = row[0];
        for (std::size_t j = 1; j < d; ++j) mx = std::max(mx, row[j]);
        T sum = T(0);
        T* prow = probs->data() + i * d;
        for (std::size_t j = 0; j < d; ++j) {
            prow[j] = std::exp(row[j] - mx);
            sum += prow[j];
        }
        for (std::size_t j = 0; j < d; ++j) prow[j] /= sum;
        total += std::log(sum) + mx - row[targets[i]];
    }
    Tensor<T> out = Tensor<T>::from({1}, {total / static_cast<T>(n)});
    if (detail::track(logits)) {
        detail::attach<T>(out, {logits}, [n, d, targets, probs](Tensor<T>& o) {
            auto& p = o.node->parents[0];
            p.ensure_grad();
            const T go = (*o.grad)[0] / static_cast<T>(n);
            for (std::size_t i = 0; i < n; ++i) {
                T* g = p.grad->data() + i * d;
                const T* prow = probs->data() + i * d;
                for (std::size_t j = 0; j < d; ++j) g[j] += go * prow[j];
                g[targets[i]] -= go;
            }
        });
    }
    return out;
}

}  // namespace mse::num
