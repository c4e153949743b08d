#pragma once

#include <utility>
#include <vector>

#include <Eigen/Core>

#include "wendy/core.hpp"
#include "wendy/testfn.hpp"
#include "wendy/weakform.hpp"

namespace wendy {

struct IRLSOptions {
  /// Covariance relaxation C = (1 - alpha) L L^T + alpha I.
  double alpha = 1e-10;
  double tau_fp = 1e-6;
  double tau_sw = 1e-4;
  int n0 = 10;
  int max_its = 100;
  /// Relaxation used once if the Cholesky factorisation of C fails.
  double alpha_retry = 1e-6;

  void validate() const;
};

/// High-order finite-difference filter used to estimate the noise level.
struct NoiseFilter {
  Vector f;

  /// Sixth-derivative central weights on 15 points, scaled to unit l2 norm.
  static NoiseFilter standard();
};

/// sigma_hat = ||f * U||_F / sqrt(N_valid d), valid-mode convolution per column.
[[nodiscard]] double estimate_sigma(const Dataset& ds, const NoiseFilter& filter = NoiseFilter::standard());

/// Weak-form ordinary least squares via column-pivoted QR.
/// Throws RankDeficientG naming the dependent columns.
[[nodiscard]] Vector ols_solve(const WeakSystem& sys);

/// Permutation P with P vec(E) = vec(E^T) for an rows x cols matrix E.
[[nodiscard]] Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic> vec_transpose_permutation(int rows, int cols);

/// First-order map from vec(noise) to the weak-form residual,
/// (K d) x ((M+1) d). Uses the quadrature-weighted test functions so that
/// it linearises G(U) w - b(U) exactly as assembled.
[[nodiscard]] Matrix build_L(const Vector& w, const Dataset& ds, const FeatureLibrary& lib, const TestBasis& basis);

/// (1 - alpha) L L^T + alpha I, assembled block by block without forming L.
[[nodiscard]] Matrix residual_covariance(const Vector& w, const Dataset& ds, const FeatureLibrary& lib,
                                         const TestBasis& basis, double alpha);

/// SC from the stopping rule: true means keep iterating. `n` is the index of
/// w_prev. The Shapiro-Wilk clause passes while n <= n0.
struct StopCheck {
  bool keep_going = true;
  StopReason reason = StopReason::FixedPoint;
  double relative_change = 0.0;
  double sw_pvalue = 1.0;
};
[[nodiscard]] StopCheck stopping_criteria(const Vector& w_next, const Vector& w_prev, const Vector& whitened_residual,
                                          int n, const IRLSOptions& opts);

/// Shapiro-Wilk p-value of a residual vector, standardised and strided down
/// to at most 5000 entries. Degenerate residuals count as normal (p = 1).
[[nodiscard]] double residual_normality(const Vector& r);

[[nodiscard]] EstimationResult irls(const WeakSystem& sys, const Dataset& ds, const FeatureLibrary& lib,
                                    const TestBasis& basis, const IRLSOptions& opts = {});

struct ParameterCovariance {
  Matrix S;
  Vector stdx;
};

/// S = sigma^2 G^+ C G^+^T with G^+ the least-squares pseudo-inverse.
[[nodiscard]] ParameterCovariance parameter_covariance(const WeakSystem& sys, const Matrix& C_hat, double sigma_hat);

/// Per-parameter (lo, hi) = w_hat -+ z stdx with z the (1+level)/2 normal quantile.
[[nodiscard]] std::vector<std::pair<double, double>> confidence_intervals(const EstimationResult& result,
                                                                          double level = 0.95);

enum class EstimatorKind { OLS, WENDy };

struct WendyOptions {
  TestFunctionOptions testfn;
  IRLSOptions irls;
  EstimatorKind estimator = EstimatorKind::WENDy;
};

struct WendyFit {
  EstimationResult result;
  TestBasis basis;
};

/// Full pipeline: validation, test functions, weak system, estimator.
[[nodiscard]] WendyFit estimate(const Dataset& ds, const FeatureLibrary& lib, const WendyOptions& opts = {});

}  // namespace wendy
