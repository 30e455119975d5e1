#include "mselab/numerics/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mse::num {

std::vector<double> softmax(std::span<const double> z) {
    if (z.empty()) throw std::invalid_argument("softmax: empty vector");
    double mx = z[0];
    for (double v : z) mx = std::max(mx, v);
    std::vector<double> out(z.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        out[i] = std::exp(z[i] - mx);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

std::vector<double> sparsemax(std::span<const double> z) {
    if (z.empty()) throw std::invalid_argument("sparsemax: empty vector");
    const std::size_t n = z.size();
    std::vector<double> sorted(z.begin(), z.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<double>());

    // Largest k with 1 + k*z_(k) > cumsum_(k).
    double cumsum = 0.0, cumsum_k = 0.0;
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
        cumsum += sorted[i];
        if (1.0 + static_cast<double>(i + 1) * sorted[i] > cumsum) {
            k = i + 1;
            cumsum_k = cumsum;
        }
    }
    const double tau = (cumsum_k - 1.0) / static_cast<double>(k);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = std::max(0.0, z[i] - tau);
    return out;
}

namespace {

template <typename T>
double cosine_impl(std::span<const T> a, std::span<const T> b) {
    if (a.size() != b.size()) throw std::invalid_argument("cosine: length mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * static_cast<double>(b[i]);
        na += static_cast<double>(a[i]) * static_cast<double>(a[i]);
        nb += static_cast<double>(b[i]) * static_cast<double>(b[i]);
    }
    if (na == 0.0 || nb == 0.0) throw std::domain_error("cosine: zero-norm vector");
    // sqrt of the product, not product of sqrts: keeps cosines of equal
    // rationals bit-identical (exact tie preservation for rank metrics).
    return dot / std::sqrt(na * nb);
}

template <typename T>
Tensor<double> cosine_matrix_impl(const Tensor<T>& a, const Tensor<T>& b) {
    const std::size_t n = a.rows(), m = b.rows(), d = a.cols();
    if (b.cols() != d) throw std::invalid_argument("cosine_matrix: dim mismatch");
    std::vector<double> sq_a(n), sq_b(m);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double v = static_cast<double>(a.at(i, j));
            s += v * v;
        }
        if (s == 0.0)
            throw std::domain_error("cosine_matrix: zero-norm row " + std::to_string(i) +
                                    " in left matrix");
        sq_a[i] = s;
    }
    for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double v = static_cast<double>(b.at(i, j));
            s += v * v;
        }
        if (s == 0.0)
            throw std::domain_error("cosine_matrix: zero-norm row " + std::to_string(i) +
                                    " in right matrix");
        sq_b[i] = s;
    }
    Tensor<double> out = Tensor<double>::zeros({n, m});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            double dot = 0.0;
            for (std::size_t p = 0; p < d; ++p)
                dot += static_cast<double>(a.at(i, p)) * static_cast<double>(b.at(j, p));
            out.at(i, j) = dot / std::sqrt(sq_a[i] * sq_b[j]);
        }
    }
    return out;
}

}  // namespace

double cosine(std::span<const float> a, std::span<const float> b) { return cosine_impl(a, b); }
double cosine(std::span<const double> a, std::span<const double> b) { return cosine_impl(a, b); }

Tensor<double> cosine_matrix(const Tensor<float>& a, const Tensor<float>& b) {
    return cosine_matrix_impl(a, b);
}
Tensor<double> cosine_matrix(const Tensor<double>& a, const Tensor<double>& b) {
    return cosine_matrix_impl(a, b);
}

}  // namespace mse::num
