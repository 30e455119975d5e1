#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "mselab/numerics/tensor.hpp"

namespace mse::num {

// Bias-corrected Adam. Moment buffers are stored per parameter in the order
// the parameter list was registered with.
template <typename T>
struct AdamState {
    T lr = T(1e-3);
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T eps = T(1e-8);
    long t = 0;
    std::vector<std::vector<T>> m, v;

    void init(const std::vector<Tensor<T>*>& params) {
        m.clear();
        v.clear();
        for (const Tensor<T>* p : params) {
            m.emplace_back(p->numel(), T(0));
            v.emplace_back(p->numel(), T(0));
        }
        t = 0;
    }
};

// One update step reading each parameter's grad buffer. Parameters without an
// allocated grad are treated as zero-gradient.
template <typename T>
void adam_step(const std::vector<Tensor<T>*>& params, AdamState<T>& state) {
    if (state.m.size() != params.size())
        throw std::invalid_argument("adam_step: state not initialized for this parameter list");
    state.t += 1;
    const T bc1 = T(1) - std::pow(state.beta1, static_cast<T>(state.t));
    const T bc2 = T(1) - std::pow(state.beta2, static_cast<T>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor<T>& p = *params[i];
        if (state.m[i].size() != p.numel())
            throw std::invalid_argument("adam_step: parameter shape changed");
        auto& m = state.m[i];
        auto& v = state.v[i];
        auto& x = *p.data;
        const std::vector<T>* g = p.grad ? p.grad.get() : nullptr;
        for (std::size_t j = 0; j < x.size(); ++j) {
            const T gj = g ? (*g)[j] : T(0);
            m[j] = state.beta1 * m[j] + (T(1) - state.beta1) * gj;
            v[j] = state.beta2 * v[j] + (T(1) - state.beta2) * gj * gj;
            const T mhat = m[j] / bc1;
            const T vhat = v[j] / bc2;
            x[j] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

// Global-norm gradient clip; returns the pre-clip norm.
template <typename T>
double clip_global_norm(const std::vector<Tensor<T>*>& params, double max_norm) {
    double sq = 0.0;
    for (Tensor<T>* p : params) {
        if (!p->grad) continue;
        for (T g : *p->grad) sq += static_cast<double>(g) * static_cast<double>(g);
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const T s = static_cast<T>(max_norm / norm);
        for (Tensor<T>* p : params) {
            if (!p->grad) continue;
            for (T& g : *p->grad) g *= s;
        }
    }
    return norm;
}

}  // namespace mse::num
