#pragma once

#include <vector>

namespace rubric {

/// Fractional ranks, 1-based; tied values share the mean of their positions.
std::vector<double> fractional_ranks(const std::vector<double>& values);

/// Pearson correlation of the fractional ranks. Throws ValidationError on a
/// length mismatch or n < 2, UndefinedCorrelationError on a constant input.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

/// Kendall tau-b (tie corrected), O(n log n). Same errors as spearman.
double kendall_tau(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace rubric
