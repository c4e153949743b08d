#pragma once

#include "wendy/core.hpp"
#include "wendy/testfn.hpp"

namespace wendy {

/// Composite trapezoid weights (dt/2, dt, ..., dt, dt/2), length M+1.
[[nodiscard]] Vector quadrature_weights(int M, double dt);

/// Weak-form linear system G w ~ b. G is block diagonal: block i holds
/// Phi_q Theta(U) restricted to the features of equation i.
struct WeakSystem {
  Matrix G;
  Vector b;
  int K = 0;
  int d = 0;
  int M = 0;
  /// Number of parameters (columns of G).
  int P = 0;
};

[[nodiscard]] WeakSystem assemble(const Dataset& ds, const FeatureLibrary& lib, const TestBasis& basis);

}  // namespace wendy
