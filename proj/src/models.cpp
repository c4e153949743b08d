#include "wendy/models.hpp"

#include <random>

#include "wendy/library_spec.hpp"

namespace wendy {

namespace {

Vector vecof(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

ModelSpec logistic() {
  ModelSpec m{.name = "logistic",
              .title = "Logistic growth",
              .equations = {"du1/dt = w1*u1 + w2*u1^2"},
              .lib = library_from_terms(1, {{"u1", "u1^2"}}),
              .w_star = vecof({1.0, -1.0}),
              .u0 = vecof({0.01}),
              .T = 10.0,
              .finest_M = 512,
              .rms_ref = 0.66,
              .notes = "Closed-form solution u(t) = u0 e^t / (1 + u0 (e^t - 1))."};
  return m;
}

ModelSpec lotka_volterra() {
  ModelSpec m{.name = "lotka_volterra",
              .title = "Lotka-Volterra",
              .equations = {"du1/dt = w1*u1 + w2*u1*u2", "du2/dt = w3*u2 + w4*u1*u2"},
              .lib = library_from_terms(2, {{"u1", "u1*u2"}, {"u2", "u1*u2"}}),
              .w_star = vecof({3.0, -1.0, -6.0, 1.0}),
              .u0 = vecof({1.0, 1.0}),
              .T = 5.0,
              .finest_M = 1024,
              .rms_ref = 6.8,
              .notes = "Predator-prey oscillation; roughly two periods on [0, T]."};
  return m;
}

ModelSpec fitzhugh_nagumo() {
  ModelSpec m{.name = "fitzhugh_nagumo",
              .title = "FitzHugh-Nagumo",
              .equations = {"du1/dt = w1*u1 + w2*u1^3 + w3*u2", "du2/dt = w4*u1 + w5 + w6*u2"},
              .lib = library_from_terms(2, {{"u1", "u1^3", "u2"}, {"u1", "1", "u2"}}),
              .w_star = vecof({3.0, -3.0, 3.0, -1.0 / 3.0, 17.0 / 150.0, 1.0 / 15.0}),
              .u0 = vecof({0.0, 0.1}),
              .T = 25.0,
              .finest_M = 1024,
              .rms_ref = 0.68,
              .fit_method = IntegratorMethod::StiffImplicit,
              .notes = "Relaxation oscillations with sharp transitions."};
  return m;
}

ModelSpec hindmarsh_rose() {
  ModelSpec m{.name = "hindmarsh_rose",
              .title = "Hindmarsh-Rose",
              .equations = {"du1/dt = w1*u2 + w2*u1^3 + w3*u1^2 + w4*u3", "du2/dt = w5 + w6*u1^2 + w7*u2",
                            "du3/dt = w8*u1 + w9 + w10*u3"},
              .lib = library_from_terms(3, {{"u2", "u1^3", "u1^2", "u3"}, {"1", "u1^2", "u2"}, {"u1", "1", "u3"}}),
              .w_star = vecof({10.0, -10.0, 30.0, -10.0, 10.0, -50.0, -10.0, 0.04, 0.0319, -0.01}),
              .u0 = vecof({-1.31, -7.6, -0.2}),
              .T = 10.0,
              .finest_M = 1024,
              .rms_ref = 2.8,
              .fit_method = IntegratorMethod::StiffImplicit,
              .notes = "The slow third component varies little over [0, T]; small noise can make its "
                       "coefficients practically unidentifiable."};
  return m;
}

ModelSpec ptb() {
  ModelSpec m{.name = "ptb",
              .title = "Protein transduction benchmark",
              .equations = {"du1/dt = w1*u1 + w2*u1*u3 + w3*u4", "du2/dt = w4*u1",
                            "du3/dt = w5*u1*u3 + w6*u4 + w7*u5/(0.3+u5)", "du4/dt = w8*u1*u3 + w9*u4",
                            "du5/dt = w10*u4 + w11*u5/(0.3+u5)"},
              .lib = library_from_terms(5, {{"u1", "u1*u3", "u4"},
                                            {"u1"},
                                            {"u1*u3", "u4", "u5/(0.3+u5)"},
                                            {"u1*u3", "u4"},
                                            {"u4", "u5/(0.3+u5)"}}),
              .w_star = vecof({-0.07, -0.6, 0.35, 0.07, -0.6, 0.05, 0.017, 0.6, -0.35, 0.3, -0.017}),
              .u0 = vecof({1.0, 0.0, 1.0, 0.0, 1.0}),
              .T = 25.0,
              .finest_M = 1024,
              .rms_ref = 0.81,
              .notes = "The Hill term u5/(0.3+u5) is undefined at u5 = -0.3."};
  return m;
}

}  // namespace

std::vector<std::string> model_names() {
  return {"logistic", "lotka_volterra", "fitzhugh_nagumo", "hindmarsh_rose", "ptb"};
}

ModelSpec catalog(std::string_view name) {
  if (name == "logistic" || name == "logistic_growth") return logistic();
  if (name == "lotka_volterra" || name == "lv") return lotka_volterra();
  if (name == "fitzhugh_nagumo" || name == "fhn") return fitzhugh_nagumo();
  if (name == "hindmarsh_rose" || name == "hr") return hindmarsh_rose();
  if (name == "ptb") return ptb();
  throw Error(ErrorCode::UnknownModel, "unknown model '" + std::string(name) + "'");
}

Dataset generate_truth(const ModelSpec& spec, int M) {
  if (M < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 intervals");
  IntegratorOptions opts;
  opts.rel_tol = 1e-12;
  opts.abs_tol = 1e-12;
  if (spec.finest_M % M == 0) {
    const Dataset fine = solve(spec.lib, spec.w_star, spec.u0, TimeGrid::over(0.0, spec.T, spec.finest_M), opts);
    return subsample(fine, spec.finest_M / M);
  }
  return solve(spec.lib, spec.w_star, spec.u0, TimeGrid::over(0.0, spec.T, M), opts);
}

Dataset generate_truth(const ModelSpec& spec) { return generate_truth(spec, spec.finest_M); }

Dataset add_noise(const Dataset& truth, double sigma_nr, std::uint64_t seed) {
  if (!(sigma_nr >= 0.0) || !std::isfinite(sigma_nr)) {
    throw Error(ErrorCode::InvalidArgument, "noise ratio must be non-negative");
  }
  Dataset out = truth;
  if (sigma_nr == 0.0) return out;
  const double sigma = sigma_nr * rms_norm(truth.U);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, sigma);
  // Column-major fill so the draw order matches vec(U).
  for (Eigen::Index i = 0; i < out.U.cols(); ++i) {
    for (Eigen::Index m = 0; m < out.U.rows(); ++m) out.U(m, i) += nd(rng);
  }
  return out;
}

Dataset subsample(const Dataset& ds, int factor) {
  const int M = ds.grid.M();
  if (factor < 1 || M % factor != 0) {
    throw Error(ErrorCode::IndivisibleFactor,
                "subsampling factor " + std::to_string(factor) + " does not divide M = " + std::to_string(M));
  }
  if (M / factor < 2) throw Error(ErrorCode::IndivisibleFactor, "subsampling leaves fewer than 3 samples");
  const int n = M / factor + 1;
  Matrix U(n, ds.U.cols());
  for (int m = 0; m < n; ++m) U.row(m) = ds.U.row(m * factor);
  return Dataset(TimeGrid(ds.grid.t0(), ds.grid.dt() * factor, n), std::move(U));
}

}  // namespace wendy
