#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "wendy/estimator.hpp"
#include "wendy/integrate.hpp"
#include "wendy/models.hpp"

namespace wendy {

/// ||w_hat - w_star|| / ||w_star||.
[[nodiscard]] double metric_E2(const Vector& w_hat, const Vector& w_star);

/// Relative forward-simulation error against `truth`, simulated from the
/// first truth sample on the truth grid. Solver failure yields +inf.
[[nodiscard]] double metric_EFS(const Vector& w_hat, const ModelSpec& spec, const Dataset& truth,
                                const IntegratorOptions& opts = {});

/// Residual callback for least squares. Returns false when r(w) cannot be
/// evaluated (e.g. the simulation diverged).
using ResidualFn = std::function<bool(const Vector& w, Vector& r)>;

struct LMOptions {
  int max_evals = 2000;
  int max_iter = 500;
  /// Stop when ||step|| < min_step * (1 + ||w||).
  double min_step = 1e-8;
  double lambda0 = 1e-3;
  /// Forward-difference step max(fd_step, fd_step * |w_j|).
  double fd_step = 1e-7;

  void validate() const;
};

struct LMResult {
  Vector w;
  /// 0.5 * ||r(w)||^2
  double cost = 0.0;
  int n_evals = 0;
  int n_iters = 0;
  std::string status;
};

/// Levenberg-Marquardt with Marquardt diagonal scaling and a
/// forward-difference Jacobian. Throws InitialPointInfeasible.
[[nodiscard]] LMResult lm_optimize(const ResidualFn& residual, const Vector& w0, const LMOptions& opts = {});

enum class FsnlsStrategy { Batch5, WendyInit };

struct FsnlsOptions {
  LMOptions lm;
  double sim_tol = 1e-6;
  long sim_max_steps = 200'000;
  int n_starts = 5;
  /// Initial guesses have standard deviation spread * |w_star_j|.
  double spread = 0.25;
  bool gaussian_init = false;

  void validate() const;
};

struct FsnlsResult {
  Vector w;
  double cost = 0.0;
  int n_evals = 0;
  int n_iters = 0;
  int failed_starts = 0;
};

/// Forward-solver nonlinear least squares on vec(sim(w) - U) with the true
/// initial condition. Batch5 keeps the best of n_starts random starts drawn
/// around w_star; WendyInit starts from w_init. Throws AllStartsFailed.
[[nodiscard]] FsnlsResult fsnls(const ModelSpec& spec, const Dataset& data, FsnlsStrategy strategy,
                                const Vector& w_init, std::uint64_t seed, const FsnlsOptions& opts = {});

/// Initial guesses for Batch5.
[[nodiscard]] std::vector<Vector> fsnls_starts(const Vector& w_star, std::uint64_t seed, const FsnlsOptions& opts);

struct ExperimentConfig {
  std::string model = "logistic";
  std::vector<double> noise_ratios = {0.1};
  /// Powers of two applied to the model's finest grid.
  std::vector<int> subsample_factors = {1};
  int n_trials = 20;
  std::uint64_t seed_base = 0;
  /// Subset of {ols, wendy, fsnls, wendy_fsnls}.
  std::vector<std::string> estimators = {"ols", "wendy"};
  /// Used for truth generation and the forward-simulation metric.
  IntegratorOptions integrator;
  WendyOptions wendy;
  FsnlsOptions fsnls;

  void validate() const;
};

struct TrialRecord {
  std::string model;
  int M = 0;
  double sigma_nr = 0.0;
  int trial = 0;
  std::uint64_t seed = 0;
  std::string estimator;
  double E2 = 0.0;
  double EFS = 0.0;
  double walltime_seconds = 0.0;
  int n_iters = 0;
  std::string stop_reason;
  bool diverged = false;
  /// Shapiro-Wilk p-value of the estimator's residual (weak-form
  /// estimators only; NaN otherwise).
  double sw_pvalue = 0.0;
  int min_radius = 0;
  int K = 0;
  /// Covariance relaxation actually used (differs from the configured
  /// value only after a Cholesky retry).
  double alpha_used = 0.0;
};

struct CellSummary {
  std::string model;
  int M = 0;
  double sigma_nr = 0.0;
  std::string estimator;
  int n_trials = 0;
  int n_failed = 0;
  double failure_rate = 0.0;
  double mean_E2 = 0.0;
  double median_E2 = 0.0;
  double mean_EFS = 0.0;
  double median_EFS = 0.0;
  double mean_walltime = 0.0;
  double median_walltime = 0.0;
  double mean_iters = 0.0;
  /// 100 * (1 - median E2 / median E2 of OLS) for the same cell, when OLS ran.
  std::optional<double> pct_drop_E2_vs_ols;
};

/// Runs every (noise, factor, trial) with `jobs` worker threads (0 = all
/// cores). Output order is canonical: factor, noise, trial, estimator.
[[nodiscard]] std::vector<TrialRecord> run_experiment(const ExperimentConfig& cfg, int jobs = 0);

[[nodiscard]] std::vector<CellSummary> summarize(const std::vector<TrialRecord>& records);

[[nodiscard]] std::string trials_csv(const std::vector<TrialRecord>& records);
/// Deterministic summary (no timing) as JSON text.
[[nodiscard]] std::string summary_json(const std::vector<CellSummary>& cells, const ExperimentConfig& cfg);
/// model,M,sigma_nr,estimator,metric,value rows, including timing.
[[nodiscard]] std::string long_csv(const std::vector<CellSummary>& cells);

}  // namespace wendy
