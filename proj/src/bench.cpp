#include "wendy/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <Eigen/Cholesky>
#include <json.hpp>

#include "wendy/stats.hpp"

namespace wendy {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool eval(const ResidualFn& fn, const Vector& w, Vector& r) {
  if (!fn(w, r)) return false;
  return r.allFinite();
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

nlohmann::json num(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace

double metric_E2(const Vector& w_hat, const Vector& w_star) {
  if (w_hat.size() != w_star.size()) throw Error(ErrorCode::DimensionMismatch, "E2 needs equal-length vectors");
  const double den = w_star.norm();
  if (!(den > 0.0)) throw Error(ErrorCode::InvalidArgument, "E2 undefined for w_star = 0");
  return (w_hat - w_star).norm() / den;
}

double metric_EFS(const Vector& w_hat, const ModelSpec& spec, const Dataset& truth, const IntegratorOptions& opts) {
  if (!w_hat.allFinite()) return kInf;
  try {
    const Vector u0 = truth.U.row(0).transpose();
    const Dataset sim = solve(spec.lib, w_hat, u0, truth.grid, opts);
    const double den = truth.U.norm();
    return (sim.U - truth.U).norm() / den;
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::StepSizeUnderflow:
      case ErrorCode::MaxStepsExceeded:
      case ErrorCode::SolutionBlowUp:
      case ErrorCode::NonFiniteData:
      case ErrorCode::DomainViolation:
        return kInf;
      default:
        throw;
    }
  }
}

void LMOptions::validate() const {
  if (max_evals < 1 || max_iter < 1) throw Error(ErrorCode::InvalidArgument, "LM limits must be positive");
  if (!(min_step > 0.0)) throw Error(ErrorCode::InvalidArgument, "LM min_step must be positive");
  if (!(lambda0 > 0.0)) throw Error(ErrorCode::InvalidArgument, "LM lambda0 must be positive");
  if (!(fd_step > 0.0)) throw Error(ErrorCode::InvalidArgument, "LM fd_step must be positive");
}

LMResult lm_optimize(const ResidualFn& residual, const Vector& w0, const LMOptions& opts) {
  opts.validate();
  LMResult res;
  res.w = w0;
  Vector r;
  res.n_evals = 1;
  if (!w0.allFinite() || !eval(residual, w0, r)) {
    throw Error(ErrorCode::InitialPointInfeasible, "residual cannot be evaluated at the initial point");
  }
  res.cost = 0.5 * r.squaredNorm();
  const Eigen::Index p = w0.size();
  double lambda = opts.lambda0;
  res.status = "max_iterations";

  Matrix J(r.size(), p);
  Vector rp;
  bool need_jac = true;
  while (res.n_iters < opts.max_iter) {
    if (need_jac) {
      if (res.n_evals + p > opts.max_evals) {
        res.status = "max_evaluations";
        break;
      }
      bool ok = true;
      for (Eigen::Index j = 0; j < p && ok; ++j) {
        const double h = std::max(opts.fd_step, opts.fd_step * std::abs(res.w(j)));
        Vector wp = res.w;
        wp(j) += h;
        ++res.n_evals;
        if (eval(residual, wp, rp)) {
          J.col(j) = (rp - r) / h;
          continue;
        }
        wp(j) = res.w(j) - h;
        ++res.n_evals;
        if (eval(residual, wp, rp)) {
          J.col(j) = (r - rp) / h;
        } else {
          ok = false;
        }
      }
      if (!ok) {
        res.status = "jacobian_failed";
        break;
      }
      need_jac = false;
    }
    ++res.n_iters;
    const Matrix A = J.transpose() * J;
    const Vector g = J.transpose() * r;
    Vector D = A.diagonal();
    for (Eigen::Index j = 0; j < p; ++j) {
      if (!(D(j) > 0.0)) D(j) = 1.0;
    }
    bool accepted = false;
    bool converged = false;
    while (!accepted) {
      Matrix Ad = A;
      Ad.diagonal() += lambda * D;
      const Vector step = Ad.ldlt().solve(-g);
      if (!step.allFinite()) {
        lambda *= 10.0;
      } else {
        const Vector wn = res.w + step;
        if (res.n_evals >= opts.max_evals) {
          res.status = "max_evaluations";
          return res;
        }
        ++res.n_evals;
        if (eval(residual, wn, rp) && 0.5 * rp.squaredNorm() < res.cost) {
          const double cost = 0.5 * rp.squaredNorm();
          res.w = wn;
          r = rp;
          res.cost = cost;
          lambda = std::max(lambda / 10.0, 1e-12);
          accepted = true;
          need_jac = true;
          converged = step.norm() < opts.min_step * (1.0 + res.w.norm());
        } else {
          lambda *= 10.0;
          if (step.norm() < opts.min_step * (1.0 + res.w.norm())) {
            // Even the damped step is negligible: no further progress possible.
            res.status = "step_tolerance";
            return res;
          }
        }
      }
      if (lambda > 1e16) {
        res.status = "damping_overflow";
        return res;
      }
    }
    if (converged) {
      res.status = "step_tolerance";
      break;
    }
  }
  return res;
}

void FsnlsOptions::validate() const {
  lm.validate();
  if (!(sim_tol > 0.0 && sim_tol < 1.0)) throw Error(ErrorCode::InvalidArgument, "sim_tol must lie in (0, 1)");
  if (sim_max_steps < 1) throw Error(ErrorCode::InvalidArgument, "sim_max_steps must be positive");
  if (n_starts < 1) throw Error(ErrorCode::InvalidArgument, "n_starts must be >= 1");
  if (!(spread >= 0.0)) throw Error(ErrorCode::InvalidArgument, "spread must be non-negative");
}

std::vector<Vector> fsnls_starts(const Vector& w_star, std::uint64_t seed, const FsnlsOptions& opts) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x5eedu};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<Vector> starts;
  for (int s = 0; s < opts.n_starts; ++s) {
    Vector w(w_star.size());
    for (Eigen::Index j = 0; j < w.size(); ++j) {
      const double sd = opts.spread * std::abs(w_star(j));
      w(j) = w_star(j) + (opts.gaussian_init ? sd * nd(rng) : sd * std::sqrt(3.0) * uni(rng));
    }
    starts.push_back(std::move(w));
  }
  return starts;
}

FsnlsResult fsnls(const ModelSpec& spec, const Dataset& data, FsnlsStrategy strategy, const Vector& w_init,
                  std::uint64_t seed, const FsnlsOptions& opts) {
  opts.validate();
  if (data.dim() != spec.dim()) throw Error(ErrorCode::DimensionMismatch, "data dimension does not match the model");
  IntegratorOptions io;
  io.rel_tol = opts.sim_tol;
  io.abs_tol = opts.sim_tol;
  io.method = spec.fit_method;
  io.max_steps = opts.sim_max_steps;
  const Vector u0 = spec.u0;
  const Vector target = vec(data.U);
  ResidualFn fn = [&](const Vector& w, Vector& r) {
    try {
      const Dataset sim = solve(spec.lib, w, u0, data.grid, io);
      r = vec(sim.U) - target;
      return true;
    } catch (const Error&) {
      return false;
    }
  };

  std::vector<Vector> starts;
  if (strategy == FsnlsStrategy::Batch5) {
    starts = fsnls_starts(spec.w_star, seed, opts);
  } else {
    if (w_init.size() != spec.w_star.size()) {
      throw Error(ErrorCode::DimensionMismatch, "initial guess has the wrong length");
    }
    starts.push_back(w_init);
  }

  FsnlsResult best;
  best.cost = kInf;
  bool any = false;
  for (const Vector& w0 : starts) {
    try {
      const LMResult lm = lm_optimize(fn, w0, opts.lm);
      best.n_evals += lm.n_evals;
      best.n_iters += lm.n_iters;
      if (lm.cost < best.cost) {
        best.cost = lm.cost;
        best.w = lm.w;
        any = true;
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InitialPointInfeasible) throw;
      ++best.failed_starts;
    }
  }
  if (!any) throw Error(ErrorCode::AllStartsFailed, "every FSNLS start failed to simulate");
  return best;
}

void ExperimentConfig::validate() const {
  (void)catalog(model);
  if (noise_ratios.empty()) throw Error(ErrorCode::ConfigError, "noise_ratios must not be empty");
  for (double s : noise_ratios) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw Error(ErrorCode::ConfigError, "noise ratios must be non-negative");
  }
  if (subsample_factors.empty()) throw Error(ErrorCode::ConfigError, "subsample_factors must not be empty");
  const int finest = catalog(model).finest_M;
  for (int f : subsample_factors) {
    if (f < 1 || (f & (f - 1)) != 0) throw Error(ErrorCode::ConfigError, "subsample factors must be powers of two");
    if (finest % f != 0 || finest / f < 16) throw Error(ErrorCode::ConfigError, "subsample factor too large for the model grid");
  }
  if (n_trials < 1) throw Error(ErrorCode::ConfigError, "n_trials must be >= 1");
  if (estimators.empty()) throw Error(ErrorCode::ConfigError, "estimators must not be empty");
  static const std::set<std::string> known{"ols", "wendy", "fsnls", "wendy_fsnls"};
  std::set<std::string> seen;
  for (const auto& e : estimators) {
    if (!known.count(e)) throw Error(ErrorCode::ConfigError, "unknown estimator '" + e + "'");
    if (!seen.insert(e).second) throw Error(ErrorCode::ConfigError, "estimator '" + e + "' listed twice");
  }
  integrator.validate();
  wendy.testfn.validate();
  wendy.irls.validate();
  fsnls.validate();
}

namespace {

struct Cell {
  int factor;
  double sigma_nr;
};

TrialRecord base_record(const ModelSpec& spec, const Dataset& data, double sigma_nr, int trial, std::uint64_t seed,
                        const std::string& est) {
  TrialRecord r;
  r.model = spec.name;
  r.M = data.grid.M();
  r.sigma_nr = sigma_nr;
  r.trial = trial;
  r.seed = seed;
  r.estimator = est;
  r.sw_pvalue = std::numeric_limits<double>::quiet_NaN();
  return r;
}

void mark_failed(TrialRecord& r, const std::string& why) {
  r.E2 = kInf;
  r.EFS = kInf;
  r.diverged = true;
  r.stop_reason = why;
}

std::vector<TrialRecord> run_trial(const ExperimentConfig& cfg, const ModelSpec& spec, const Dataset& truth,
                                   double sigma_nr, int trial) {
  const std::uint64_t seed = cfg.seed_base + static_cast<std::uint64_t>(trial);
  const Dataset data = add_noise(truth, sigma_nr, seed);
  auto wants = [&](const char* e) { return std::find(cfg.estimators.begin(), cfg.estimators.end(), e) != cfg.estimators.end(); };
  const bool need_wendy = wants("wendy") || wants("wendy_fsnls");

  std::map<std::string, TrialRecord> out;
  for (const auto& e : cfg.estimators) out.emplace(e, base_record(spec, data, sigma_nr, trial, seed, e));

  // Shared test-function construction, timed once and charged to both
  // weak-form estimators.
  std::optional<TestBasis> basis;
  std::optional<WeakSystem> sys;
  double t_basis = 0.0;
  std::string weak_error;
  if (wants("ols") || need_wendy) {
    const auto t0 = Clock::now();
    try {
      validate_dataset(data, spec.lib);
      basis = build_test_basis(data, cfg.wendy.testfn);
      sys = assemble(data, spec.lib, *basis);
    } catch (const Error& e) {
      weak_error = "error:" + std::string(to_string(e.code()));
    }
    t_basis = seconds_since(t0);
  }

  if (wants("ols")) {
    TrialRecord& r = out.at("ols");
    if (!sys) {
      mark_failed(r, weak_error);
    } else {
      try {
        const auto t0 = Clock::now();
        const Vector w = ols_solve(*sys);
        r.walltime_seconds = t_basis + seconds_since(t0);
        r.E2 = metric_E2(w, spec.w_star);
        r.EFS = metric_EFS(w, spec, truth, cfg.integrator);
        r.diverged = !std::isfinite(r.EFS);
        r.stop_reason = "ols";
        r.alpha_used = 1.0;
        r.sw_pvalue = residual_normality(sys->G * w - sys->b);
        r.min_radius = basis->min_radius;
        r.K = basis->K;
      } catch (const Error& e) {
        mark_failed(r, "error:" + std::string(to_string(e.code())));
      }
    }
  }

  std::optional<Vector> w_wendy;
  double t_wendy = 0.0;
  if (need_wendy && sys) {
    TrialRecord tmp = base_record(spec, data, sigma_nr, trial, seed, "wendy");
    try {
      const auto t0 = Clock::now();
      const EstimationResult res = irls(*sys, data, spec.lib, *basis, cfg.wendy.irls);
      t_wendy = t_basis + seconds_since(t0);
      w_wendy = res.w_hat;
      tmp.walltime_seconds = t_wendy;
      tmp.E2 = metric_E2(res.w_hat, spec.w_star);
      tmp.EFS = metric_EFS(res.w_hat, spec, truth, cfg.integrator);
      tmp.diverged = !std::isfinite(tmp.EFS);
      tmp.n_iters = res.n_iters;
      tmp.stop_reason = std::string(to_string(res.stop_reason));
      tmp.alpha_used = res.alpha_used;
      tmp.sw_pvalue = residual_normality(res.residual);
      tmp.min_radius = basis->min_radius;
      tmp.K = basis->K;
    } catch (const Error& e) {
      mark_failed(tmp, "error:" + std::string(to_string(e.code())));
    }
    if (wants("wendy")) out.at("wendy") = tmp;
  } else if (need_wendy && wants("wendy")) {
    mark_failed(out.at("wendy"), weak_error);
  }

  auto run_fsnls = [&](TrialRecord& r, FsnlsStrategy strategy, const Vector& w_init, double extra_time) {
    try {
      const auto t0 = Clock::now();
      const FsnlsResult fr = fsnls(spec, data, strategy, w_init, seed, cfg.fsnls);
      r.walltime_seconds = extra_time + seconds_since(t0);
      r.E2 = metric_E2(fr.w, spec.w_star);
      r.EFS = metric_EFS(fr.w, spec, truth, cfg.integrator);
      r.diverged = !std::isfinite(r.EFS);
      r.n_iters = fr.n_iters;
      r.stop_reason = "lm";
    } catch (const Error& e) {
      mark_failed(r, "error:" + std::string(to_string(e.code())));
    }
  };
  if (wants("fsnls")) run_fsnls(out.at("fsnls"), FsnlsStrategy::Batch5, Vector(), 0.0);
  if (wants("wendy_fsnls")) {
    if (w_wendy) {
      run_fsnls(out.at("wendy_fsnls"), FsnlsStrategy::WendyInit, *w_wendy, t_wendy);
    } else {
      mark_failed(out.at("wendy_fsnls"), weak_error.empty() ? "error:wendy_failed" : weak_error);
    }
  }

  std::vector<TrialRecord> recs;
  for (const auto& e : cfg.estimators) recs.push_back(out.at(e));
  return recs;
}

}  // namespace

std::vector<TrialRecord> run_experiment(const ExperimentConfig& cfg, int jobs) {
  cfg.validate();
  const ModelSpec spec = catalog(cfg.model);
  const Dataset fine = solve(spec.lib, spec.w_star, spec.u0, TimeGrid::over(0.0, spec.T, spec.finest_M), cfg.integrator);

  std::vector<Cell> cells;
  for (int f : cfg.subsample_factors) {
    for (double s : cfg.noise_ratios) cells.push_back({f, s});
  }
  std::vector<Dataset> truths;
  for (int f : cfg.subsample_factors) truths.push_back(subsample(fine, f));

  const std::size_t n_tasks = cells.size() * static_cast<std::size_t>(cfg.n_trials);
  std::vector<std::vector<TrialRecord>> results(n_tasks);
  std::vector<std::string> errors(n_tasks);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= n_tasks) return;
      const std::size_t c = k / static_cast<std::size_t>(cfg.n_trials);
      const int trial = static_cast<int>(k % static_cast<std::size_t>(cfg.n_trials));
      const std::size_t fi = c / cfg.noise_ratios.size();
      try {
        results[k] = run_trial(cfg, spec, truths[fi], cells[c].sigma_nr, trial);
      } catch (const std::exception& e) {
        errors[k] = e.what();
      }
    }
  };
  int n_threads = jobs > 0 ? jobs : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  n_threads = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(n_threads), std::max<std::size_t>(n_tasks, 1)));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw std::runtime_error("trial failed: " + e);
  }
  std::vector<TrialRecord> all;
  for (auto& r : results) all.insert(all.end(), r.begin(), r.end());
  return all;
}

std::vector<CellSummary> summarize(const std::vector<TrialRecord>& records) {
  // Keyed by (M, sigma, estimator) but emitted in first-seen order.
  std::vector<CellSummary> cells;
  std::vector<std::vector<const TrialRecord*>> members;
  for (const auto& r : records) {
    std::size_t k = 0;
    for (; k < cells.size(); ++k) {
      if (cells[k].model == r.model && cells[k].M == r.M && cells[k].sigma_nr == r.sigma_nr &&
          cells[k].estimator == r.estimator) {
        break;
      }
    }
    if (k == cells.size()) {
      CellSummary c;
      c.model = r.model;
      c.M = r.M;
      c.sigma_nr = r.sigma_nr;
      c.estimator = r.estimator;
      cells.push_back(c);
      members.emplace_back();
    }
    members[k].push_back(&r);
  }
  for (std::size_t k = 0; k < cells.size(); ++k) {
    CellSummary& c = cells[k];
    std::vector<double> e2, efs, wall, its;
    for (const TrialRecord* r : members[k]) {
      ++c.n_trials;
      if (r->diverged) ++c.n_failed;
      if (std::isfinite(r->E2) && !r->diverged) e2.push_back(r->E2);
      if (std::isfinite(r->EFS)) efs.push_back(r->EFS);
      wall.push_back(r->walltime_seconds);
      its.push_back(r->n_iters);
    }
    c.failure_rate = static_cast<double>(c.n_failed) / c.n_trials;
    c.mean_E2 = stats::mean(e2);
    c.median_E2 = stats::median(e2);
    c.mean_EFS = stats::mean(efs);
    c.median_EFS = stats::median(efs);
    c.mean_walltime = stats::mean(wall);
    c.median_walltime = stats::median(wall);
    c.mean_iters = stats::mean(its);
  }
  for (auto& c : cells) {
    for (const auto& o : cells) {
      if (o.estimator == "ols" && o.model == c.model && o.M == c.M && o.sigma_nr == c.sigma_nr &&
          std::isfinite(o.median_E2) && o.median_E2 > 0.0 && std::isfinite(c.median_E2)) {
        c.pct_drop_E2_vs_ols = 100.0 * (1.0 - c.median_E2 / o.median_E2);
      }
    }
  }
  return cells;
}

std::string trials_csv(const std::vector<TrialRecord>& records) {
  std::ostringstream os;
  os << "model,M,sigma_nr,trial,seed,estimator,E2,EFS,walltime_seconds,n_iters,stop_reason,diverged,sw_pvalue,"
        "min_radius,K,alpha_used\n";
  for (const auto& r : records) {
    os << r.model << ',' << r.M << ',' << fmt(r.sigma_nr) << ',' << r.trial << ',' << r.seed << ',' << r.estimator
       << ',' << fmt(r.E2) << ',' << fmt(r.EFS) << ',' << fmt(r.walltime_seconds) << ',' << r.n_iters << ','
       << r.stop_reason << ',' << (r.diverged ? 1 : 0) << ',' << fmt(r.sw_pvalue) << ',' << r.min_radius << ','
       << r.K << ',' << fmt(r.alpha_used) << '\n';
  }
  return os.str();
}

std::string summary_json(const std::vector<CellSummary>& cells, const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["model"] = cfg.model;
  j["n_trials"] = cfg.n_trials;
  j["seed_base"] = cfg.seed_base;
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : cells) {
    nlohmann::json o;
    o["model"] = c.model;
    o["M"] = c.M;
    o["sigma_nr"] = c.sigma_nr;
    o["estimator"] = c.estimator;
    o["n_trials"] = c.n_trials;
    o["n_failed"] = c.n_failed;
    o["failure_rate"] = c.failure_rate;
    o["mean_E2"] = num(c.mean_E2);
    o["median_E2"] = num(c.median_E2);
    o["mean_EFS"] = num(c.mean_EFS);
    o["median_EFS"] = num(c.median_EFS);
    o["mean_iters"] = num(c.mean_iters);
    o["pct_drop_E2_vs_ols"] = c.pct_drop_E2_vs_ols ? num(*c.pct_drop_E2_vs_ols) : nlohmann::json(nullptr);
    arr.push_back(o);
  }
  j["cells"] = arr;
  return j.dump(2) + "\n";
}

std::string long_csv(const std::vector<CellSummary>& cells) {
  std::ostringstream os;
  os << "model,M,sigma_nr,estimator,metric,value\n";
  for (const auto& c : cells) {
    auto row = [&](const char* metric, double v) {
      os << c.model << ',' << c.M << ',' << fmt(c.sigma_nr) << ',' << c.estimator << ',' << metric << ',' << fmt(v)
         << '\n';
    };
    row("mean_E2", c.mean_E2);
    row("median_E2", c.median_E2);
    row("mean_EFS", c.mean_EFS);
    row("median_EFS", c.median_EFS);
    row("mean_walltime", c.mean_walltime);
    row("median_walltime", c.median_walltime);
    row("failure_rate", c.failure_rate);
    row("mean_iters", c.mean_iters);
    if (c.pct_drop_E2_vs_ols) row("pct_drop_E2_vs_ols", *c.pct_drop_E2_vs_ols);
  }
  return os.str();
}

}  // namespace wendy
