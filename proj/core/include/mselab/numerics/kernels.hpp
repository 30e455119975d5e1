#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mselab/numerics/tensor.hpp"

namespace mse::num {

// Stable softmax of a single score vector.
std::vector<double> softmax(std::span<const double> z);

// Euclidean projection of z onto the probability simplex, computed with the
// exact sort-and-threshold rule. Throws on empty input.
std::vector<double> sparsemax(std::span<const double> z);

// Cosine of two equal-length vectors, accumulated in double.
double cosine(std::span<const float> a, std::span<const float> b);
double cosine(std::span<const double> a, std::span<const double> b);

// Pairwise cosine of the rows of A (n,d) and B (m,d). Throws on a zero-norm
// row, naming the offending matrix and row.
Tensor<double> cosine_matrix(const Tensor<float>& a, const Tensor<float>& b);
Tensor<double> cosine_matrix(const Tensor<double>& a, const Tensor<double>& b);

}  // namespace mse::num
