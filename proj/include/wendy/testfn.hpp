#pragma once

#include <optional>
#include <vector>

#include "wendy/core.hpp"

namespace wendy {

/// C-infinity bump exp(-eta / (1 - (t/a)^2)) supported on |t| < a = m_t * dt.
struct BumpParams {
  double eta = 9.0;
  int m_t = 1;
  double dt = 1.0;

  [[nodiscard]] double radius() const noexcept { return m_t * dt; }
};

struct TestFunctionOptions {
  double eta = 9.0;
  /// Coarsening factor for the integration-error estimator, 2 < s < 4.
  double s = 3.0;
  /// Spacing (in samples) between consecutive test-function centers.
  int stride = 1;
  int num_radius_candidates = 50;
  /// Number of dyadic scales m, 2m, 4m, ... stacked into the basis.
  int num_levels = 4;
  /// Skip radius selection and use this minimum radius.
  std::optional<int> min_radius;

  void validate() const;
};

/// Unnormalised bump exp(-eta / (1 - x^2)) on |x| < 1, zero elsewhere.
[[nodiscard]] double bump_shape(double x, double eta);

/// C such that the on-grid samples of C * bump_shape have unit l2 norm.
[[nodiscard]] double bump_normalizer(const BumpParams& p);

[[nodiscard]] double bump_eval(double t, double center, const BumpParams& p);

/// Analytic time derivative of bump_eval.
[[nodiscard]] double bump_derivative(double t, double center, const BumpParams& p);

/// Unit-norm samples of the bump centred on grid index `center` (length M+1).
[[nodiscard]] Vector bump_vector(const TimeGrid& grid, int center, const BumpParams& p);

/// Centres whose full support [c - m_t, c + m_t] lies inside the grid.
[[nodiscard]] std::vector<int> interior_centers(int M, int m_t, int stride);

/// Per-centre, per-state values of the single-mode integration error
/// estimate -(4 pi n / sqrt(T)) Im F_n[phi_k U_i], n = floor(M / s).
/// Result is (number of centres) x d.
[[nodiscard]] Matrix integration_error_terms(const Dataset& ds, int m_t, double s, double eta = 9.0,
                                             int stride = 1);

/// Root-mean-square of integration_error_terms over centres (summed over states).
[[nodiscard]] double integration_error_estimate(const Dataset& ds, int m_t, double s, double eta = 9.0,
                                                int stride = 1);

/// Expected value of integration_error_estimate^2 for pure white noise of
/// standard deviation sigma.
[[nodiscard]] double integration_error_noise_floor(const Dataset& ds, int m_t, double s, double sigma,
                                                   double eta = 9.0, int stride = 1);

/// Log-spaced integer radii in [2, floor(M/4)], deduplicated.
[[nodiscard]] std::vector<int> radius_candidates(int M, int count);

struct RadiusSelection {
  std::vector<int> radii;
  std::vector<double> errors;
  int changepoint_index = 0;
  int min_radius = 2;
  bool noise_dominated = false;
};

[[nodiscard]] RadiusSelection select_min_radius(const Dataset& ds, const TestFunctionOptions& opts = {});

struct TestBasis {
  /// K x (M+1), orthonormal rows.
  Matrix Phi;
  Matrix Phi_dot;
  /// Phi and Phi_dot with trapezoidal quadrature weights folded into the columns.
  Matrix Phi_q;
  Matrix Phi_dot_q;
  int K = 0;
  int min_radius = 0;
  std::vector<int> radii_used;
  Vector singular_values;
};

[[nodiscard]] TestBasis build_orthonormal_basis(const TimeGrid& grid, int min_radius,
                                                const TestFunctionOptions& opts = {});

/// Radius selection followed by basis construction.
[[nodiscard]] TestBasis build_test_basis(const Dataset& ds, const TestFunctionOptions& opts = {});

/// Spectral derivative of each row, treating rows as periodic on [0, T).
[[nodiscard]] Matrix fourier_diff(const Matrix& Phi, double T);

}  // namespace wendy
