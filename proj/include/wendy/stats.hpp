#pragma once

#include <span>
#include <vector>

#include "wendy/core.hpp"

namespace wendy::stats {

struct SWResult {
  double W = 1.0;
  double p = 1.0;
};

/// Shapiro-Wilk normality test using Royston's approximation (AS R94).
/// Valid for 3 <= n <= 5000.
[[nodiscard]] SWResult shapiro_wilk(std::span<const double> sample);

/// Finite-difference weights for the order-th derivative at `center` using
/// the given distinct nodes (Fornberg's recurrence).
[[nodiscard]] Vector fd_weights(int order, std::span<const double> stencil, double center);

/// Two-segment piecewise-linear changepoint. Returns the index k that starts
/// the second segment, i.e. the fit uses [0, k) and [k, n). Both segments
/// hold at least two points; near-ties go to the smaller k.
[[nodiscard]] int changepoint(std::span<const double> series);
[[nodiscard]] int changepoint(std::span<const double> x, std::span<const double> series);

/// Total SSE of the two-segment fit with the second segment starting at k.
[[nodiscard]] double two_segment_sse(std::span<const double> x, std::span<const double> series, int k);

[[nodiscard]] double normal_quantile(double p);
[[nodiscard]] double normal_cdf(double z);

[[nodiscard]] double median(std::vector<double> values);
[[nodiscard]] double mean(std::span<const double> values);

}  // namespace wendy::stats
