#pragma once

#include <functional>

#include "wendy/core.hpp"

namespace wendy {

enum class IntegratorMethod { ExplicitRK45, StiffImplicit };

struct IntegratorOptions {
  double rel_tol = 1e-12;
  double abs_tol = 1e-12;
  IntegratorMethod method = IntegratorMethod::ExplicitRK45;
  long max_steps = 2'000'000;
  /// When > 0 the explicit method takes steps of exactly this size with no
  /// error control (used for order-of-accuracy checks).
  double fixed_step = 0.0;
  /// Any state component exceeding this magnitude aborts the solve.
  double blowup_threshold = 1e12;

  void validate() const;
};

/// Autonomous right-hand side du/dt = f(u), with optional Jacobian df/du.
struct OdeSystem {
  int dim = 0;
  std::function<void(const Vector& u, Vector& du)> rhs;
  std::function<void(const Vector& u, Matrix& jac)> jacobian;
};

/// du/dt = Theta(u) W built from a feature library and a parameter vector.
[[nodiscard]] OdeSystem make_system(const FeatureLibrary& lib, const Vector& w);

/// Integrates from u0 at grid.t0() and returns the trajectory sampled at
/// every grid point. Throws StepSizeUnderflow, MaxStepsExceeded or
/// SolutionBlowUp when the candidate dynamics cannot be followed.
[[nodiscard]] Dataset solve(const OdeSystem& sys, const Vector& u0, const TimeGrid& grid,
                            const IntegratorOptions& opts = {});

[[nodiscard]] Dataset solve(const FeatureLibrary& lib, const Vector& w, const Vector& u0,
                            const TimeGrid& grid, const IntegratorOptions& opts = {});

/// sqrt(mean(U_ij^2)).
[[nodiscard]] double rms_norm(const Matrix& U);

}  // namespace wendy
