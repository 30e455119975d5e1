#pragma once

#include <span>

namespace mse::eval {

// Spearman rank correlation: Pearson correlation of average ranks, ties
// assigned their mean rank. Throws "undefined correlation" on mismatched
// lengths, fewer than 3 points, or a constant sequence.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace mse::eval
