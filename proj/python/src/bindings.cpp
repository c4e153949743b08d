#include <cmath>
#include <optional>
#include <string>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "wendy/bench.hpp"
#include "wendy/config.hpp"
#include "wendy/estimator.hpp"
#include "wendy/library_spec.hpp"
#include "wendy/models.hpp"

namespace py = pybind11;
using namespace wendy;

namespace {

py::dict model_dict(const ModelSpec& s) {
  py::list labels;
  for (int p = 0; p < s.lib.num_params(); ++p) labels.append(s.lib.param_label(p));
  py::dict d;
  d["name"] = s.name;
  d["title"] = s.title;
  d["dim"] = s.dim();
  d["equations"] = s.equations;
  d["param_labels"] = labels;
  d["w_star"] = Vector(s.w_star);
  d["u0"] = Vector(s.u0);
  d["T"] = s.T;
  d["finest_M"] = s.finest_M;
  d["rms_ref"] = s.rms_ref;
  d["fit_solver"] = to_string(s.fit_method);
  d["notes"] = s.notes;
  return d;
}

Dataset dataset_from_arrays(const Vector& t, const Matrix& U) {
  if (t.size() < 2) throw Error(ErrorCode::TooFewSamples, "need at least two samples");
  if (U.rows() != t.size()) throw Error(ErrorCode::DimensionMismatch, "U must have one row per time point");
  const int M = static_cast<int>(t.size()) - 1;
  const double dt = (t(M) - t(0)) / M;
  if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorCode::NonUniformGrid, "time points must increase");
  for (int m = 0; m <= M; ++m) {
    if (std::abs(t(m) - (t(0) + m * dt)) > 1e-9 * dt) {
      throw Error(ErrorCode::NonUniformGrid, "time points are not uniformly spaced");
    }
  }
  return Dataset(TimeGrid(t(0), dt, M + 1), U);
}

py::dict estimate_py(const Vector& t, const Matrix& U, const std::optional<std::string>& model,
                     const std::optional<std::string>& library, const std::string& estimator,
                     std::optional<double> alpha, std::optional<int> min_radius, double ci_level,
                     const std::optional<std::string>& config) {
  if (model.has_value() == library.has_value()) {
    throw Error(ErrorCode::InvalidArgument, "give exactly one of model or library");
  }
  RunConfig cfg = config ? parse_run_config(*config) : RunConfig{};
  WendyOptions& w = cfg.experiment.wendy;
  if (alpha) w.irls.alpha = *alpha;
  if (min_radius) w.testfn.min_radius = *min_radius;
  cfg.ci_level = ci_level;
  if (estimator == "ols") {
    w.estimator = EstimatorKind::OLS;
  } else if (estimator == "wendy") {
    w.estimator = EstimatorKind::WENDy;
  } else {
    throw Error(ErrorCode::InvalidArgument, "estimator must be ols or wendy");
  }
  cfg.validate();

  const Dataset ds = dataset_from_arrays(t, U);
  std::optional<ModelSpec> spec;
  if (model) spec = catalog(*model);
  const FeatureLibrary lib = spec ? spec->lib : library_from_json(*library);

  WendyFit fit = [&] {
    py::gil_scoped_release release;
    return estimate(ds, lib, w);
  }();
  const EstimationResult& r = fit.result;
  const auto ci = confidence_intervals(r, cfg.ci_level);
  Matrix ci_m(r.w_hat.size(), 2);
  py::list labels;
  for (Eigen::Index p = 0; p < r.w_hat.size(); ++p) {
    ci_m(p, 0) = ci[static_cast<std::size_t>(p)].first;
    ci_m(p, 1) = ci[static_cast<std::size_t>(p)].second;
    labels.append(lib.param_label(static_cast<int>(p)));
  }

  py::dict d;
  d["estimator"] = estimator;
  d["param_labels"] = labels;
  d["w_hat"] = r.w_hat;
  d["w_ols"] = r.w_ols;
  d["stdx"] = r.stdx;
  d["S"] = r.S;
  d["ci"] = ci_m;
  d["ci_level"] = cfg.ci_level;
  d["sigma_hat"] = r.sigma_hat;
  d["n_iters"] = r.n_iters;
  d["stop_reason"] = std::string(to_string(r.stop_reason));
  d["alpha_used"] = r.alpha_used;
  d["min_radius"] = fit.basis.min_radius;
  d["K"] = fit.basis.K;
  if (spec) {
    d["model"] = spec->name;
    d["w_star"] = Vector(spec->w_star);
    d["E2"] = metric_E2(r.w_hat, spec->w_star);
  }
  return d;
}

py::tuple simulate_py(const std::string& name, std::optional<int> M, double sigma_nr, std::uint64_t seed) {
  const ModelSpec spec = catalog(name);
  Dataset truth = [&] {
    py::gil_scoped_release release;
    return M ? generate_truth(spec, *M) : generate_truth(spec);
  }();
  Dataset noisy = add_noise(truth, sigma_nr, seed);
  return py::make_tuple(noisy.grid.times(), noisy.U, truth.U);
}

py::dict trial_dict(const TrialRecord& r) {
  py::dict d;
  d["model"] = r.model;
  d["M"] = r.M;
  d["sigma_nr"] = r.sigma_nr;
  d["trial"] = r.trial;
  d["seed"] = r.seed;
  d["estimator"] = r.estimator;
  d["E2"] = r.E2;
  d["EFS"] = r.EFS;
  d["walltime_seconds"] = r.walltime_seconds;
  d["n_iters"] = r.n_iters;
  d["stop_reason"] = r.stop_reason;
  d["diverged"] = r.diverged;
  d["sw_pvalue"] = r.sw_pvalue;
  d["min_radius"] = r.min_radius;
  d["K"] = r.K;
  d["alpha_used"] = r.alpha_used;
  return d;
}

py::dict run_experiment_py(const std::string& config, int jobs) {
  const RunConfig cfg = parse_run_config(config);
  std::vector<TrialRecord> records;
  std::vector<CellSummary> cells;
  {
    py::gil_scoped_release release;
    records = run_experiment(cfg.experiment, jobs);
    cells = summarize(records);
  }
  py::list trials;
  for (const auto& r : records) trials.append(trial_dict(r));
  py::dict d;
  d["trials"] = trials;
  d["trials_csv"] = trials_csv(records);
  d["summary_json"] = summary_json(cells, cfg.experiment);
  d["long_csv"] = long_csv(cells);
  return d;
}

}  // namespace

PYBIND11_MODULE(_wendy, m) {
  m.doc() = "Weak-form estimation of ODE parameters";

  // Leaked on purpose: must outlive interpreter teardown.
  static auto* exc = new py::exception<Error>(m, "WendyError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object obj = py::handle(exc->ptr())(py::str(std::string(to_string(e.code())) + ": " + e.what()));
      obj.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(exc->ptr(), obj.ptr());
    }
  });

  m.def("models", [] {
    py::list out;
    for (const auto& n : model_names()) out.append(model_dict(catalog(n)));
    return out;
  }, "Catalog entries as dictionaries.");
  m.def("model", [](const std::string& name) { return model_dict(catalog(name)); }, py::arg("name"),
        "One catalog entry by name or alias.");
  m.def("simulate", &simulate_py, py::arg("model"), py::arg("M") = py::none(), py::arg("sigma_nr") = 0.0,
        py::arg("seed") = 0,
        "Returns (t, U_noisy, U_truth) for a catalog model on M intervals (default: finest grid).");
  m.def("estimate", &estimate_py, py::arg("t"), py::arg("U"), py::kw_only(), py::arg("model") = py::none(),
        py::arg("library") = py::none(), py::arg("estimator") = "wendy", py::arg("alpha") = py::none(),
        py::arg("min_radius") = py::none(), py::arg("ci_level") = 0.95, py::arg("config") = py::none(),
        "Estimates parameters from uniformly sampled data. `library` is a JSON feature library.");
  m.def("run_experiment", &run_experiment_py, py::arg("config") = "{}", py::arg("jobs") = 1,
        "Runs a benchmark described by a JSON config and returns records and serialised outputs.");
}
