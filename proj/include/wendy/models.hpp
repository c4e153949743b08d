#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "wendy/core.hpp"
#include "wendy/integrate.hpp"

namespace wendy {

struct ModelSpec {
  std::string name;
  std::string title;
  /// Equations written out with coefficient symbols w1, w2, ...
  std::vector<std::string> equations;
  FeatureLibrary lib;
  Vector w_star;
  Vector u0;
  double T = 0.0;
  int finest_M = 0;
  double rms_ref = 0.0;
  /// Solver used when this model is fitted by forward simulation.
  IntegratorMethod fit_method = IntegratorMethod::ExplicitRK45;
  std::string notes;

  [[nodiscard]] int dim() const { return lib.dim(); }
};

/// Canonical catalog names in display order.
[[nodiscard]] std::vector<std::string> model_names();

/// Looks up a model by name or short alias (lv, fhn, hr). Throws UnknownModel.
[[nodiscard]] ModelSpec catalog(std::string_view name);

/// Noise-free trajectory on [0, T] with M intervals, solved at tol 1e-12.
/// When M divides the finest grid the finest solution is subsampled.
[[nodiscard]] Dataset generate_truth(const ModelSpec& spec, int M);
[[nodiscard]] Dataset generate_truth(const ModelSpec& spec);

/// U + eps with eps iid N(0, (sigma_nr * rms(U))^2).
[[nodiscard]] Dataset add_noise(const Dataset& truth, double sigma_nr, std::uint64_t seed);

/// Keeps every factor-th sample starting at t0. Throws IndivisibleFactor.
[[nodiscard]] Dataset subsample(const Dataset& ds, int factor);

}  // namespace wendy
