#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "mselab/numerics/tensor.hpp"

namespace mse::num {

// Central-difference verification of reverse-mode gradients, in double.
// `loss_builder` must rebuild the forward graph from the current parameter
// values on every call. Returns max over parameter elements of
// |analytic - numeric| / max(1, |analytic|).
inline double grad_check(const std::function<Tensor<double>()>& loss_builder,
                         const std::vector<Tensor<double>*>& params, double h = 1e-5) {
    for (Tensor<double>* p : params) p->zero_grad();
    Tensor<double> loss = loss_builder();
    if (!std::isfinite(loss.scalar())) throw std::domain_error("grad_check: non-finite loss");
    backward(loss);

    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (Tensor<double>* p : params) {
        if (p->grad)
            analytic.push_back(*p->grad);
        else
            analytic.emplace_back(p->numel(), 0.0);
    }

    double worst = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& x = *params[pi]->data;
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double keep = x[j];
            x[j] = keep + h;
            const double up = loss_builder().scalar();
            x[j] = keep - h;
            const double down = loss_builder().scalar();
            x[j] = keep;
            if (!std::isfinite(up) || !std::isfinite(down))
                throw std::domain_error("grad_check: non-finite loss");
            const double numeric = (up - down) / (2.0 * h);
            const double a = analytic[pi][j];
            const double rel = std::abs(a - numeric) / std::max(1.0, std::abs(a));
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

}  // namespace mse::num
