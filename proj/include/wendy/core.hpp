#pragma once

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "wendy/error.hpp"

namespace wendy {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Uniform sampling t_m = t0 + m * dt for m = 0..M.
class TimeGrid {
 public:
  TimeGrid(double t0, double dt, int num_samples);

  /// Grid spanning [t0, t0 + T] with M intervals.
  static TimeGrid over(double t0, double T, int M);

  [[nodiscard]] double t0() const noexcept { return t0_; }
  [[nodiscard]] double dt() const noexcept { return dt_; }
  [[nodiscard]] int num_samples() const noexcept { return n_; }
  [[nodiscard]] int M() const noexcept { return n_ - 1; }
  [[nodiscard]] double T() const noexcept { return dt_ * (n_ - 1); }
  [[nodiscard]] double t(int m) const noexcept { return t0_ + m * dt_; }
  [[nodiscard]] Vector times() const;

 private:
  double t0_;
  double dt_;
  int n_;
};

/// State observations: row m holds u(t_m), one column per state.
struct Dataset {
  TimeGrid grid;
  Matrix U;

  Dataset(TimeGrid g, Matrix u);
  [[nodiscard]] int dim() const noexcept { return static_cast<int>(U.cols()); }
};

using StateView = std::span<const double>;
using GradientOut = std::span<double>;

/// One scalar feature f(u) of the state together with its gradient.
struct Feature {
  std::string name;
  std::function<double(StateView)> f;
  std::function<void(StateView, GradientOut)> grad;
};

/// A set of J distinct features plus, for every equation i, the list of
/// features that appear on its right-hand side. The parameter vector
/// concatenates the per-equation coefficient lists in equation order.
///
/// A shared library (every equation uses every feature) yields J*d
/// parameters laid out as vec(W) with W the J x d coefficient matrix.
class FeatureLibrary {
 public:
  FeatureLibrary(int d, std::vector<Feature> features, std::vector<std::vector<int>> terms);

  static FeatureLibrary shared(int d, std::vector<Feature> features);

  [[nodiscard]] int dim() const noexcept { return d_; }
  [[nodiscard]] int num_features() const noexcept { return static_cast<int>(features_.size()); }
  [[nodiscard]] int num_params() const noexcept { return offsets_.back(); }
  [[nodiscard]] bool is_shared() const noexcept;

  [[nodiscard]] const Feature& feature(int j) const { return features_.at(j); }
  [[nodiscard]] const std::vector<int>& terms(int eq) const { return terms_.at(eq); }
  [[nodiscard]] int param_offset(int eq) const { return offsets_.at(eq); }

  /// Human-readable label "du<i>/dt: <feature>" for parameter p.
  [[nodiscard]] std::string param_label(int p) const;

  /// Theta(U): (M+1) x J matrix of feature evaluations.
  [[nodiscard]] Matrix theta(const Matrix& U) const;

  /// Gradients of every feature at every row of U. Entry j is (M+1) x d.
  [[nodiscard]] std::vector<Matrix> theta_grad(const Matrix& U) const;

  /// J x d coefficient matrix with zeros for features absent from an equation.
  [[nodiscard]] Matrix coefficients(const Vector& w) const;

  /// Inverse of coefficients(): gathers the active entries of W.
  [[nodiscard]] Vector params_from(const Matrix& W) const;

  /// Restrict each equation to the features flagged in mask (J x d).
  [[nodiscard]] FeatureLibrary masked(const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>& mask) const;

 private:
  int d_;
  std::vector<Feature> features_;
  std::vector<std::vector<int>> terms_;
  std::vector<int> offsets_;
};

/// mat(w): J x d matricization, column i holding the coefficients of equation i.
[[nodiscard]] Matrix mat(const Vector& w, int J, int d);
[[nodiscard]] Vector vec(const Matrix& W);

enum class StopReason { FixedPoint, MaxIterations, ShapiroWilkReject };

[[nodiscard]] std::string_view to_string(StopReason r);

struct IterationRecord {
  Vector w;
  double relative_change = 0.0;
  double sw_pvalue = 1.0;
};

struct EstimationResult {
  Vector w_hat;
  Vector w_ols;
  Matrix C_hat;
  double sigma_hat = 0.0;
  Matrix S;
  Vector stdx;
  int n_iters = 0;
  StopReason stop_reason = StopReason::FixedPoint;
  double alpha_used = 0.0;
  /// Whitened residual C^{-1/2}(G w_hat - b) at exit.
  Vector residual;
  std::vector<IterationRecord> trace;
};

/// Checks dimensions, finiteness of U and of every feature evaluated on U.
void validate_dataset(const Dataset& ds, const FeatureLibrary& lib);

}  // namespace wendy
