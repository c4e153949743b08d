#include <cmath>
#include <json.hpp>
#include <sstream>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "wendy/bench.hpp"
#include "wendy/stats.hpp"

using namespace wendy;
using namespace wendy::testing;

TEST(MetricE2, Examples) {
  Vector w(3);
  w << 1, -2, 2;
  EXPECT_EQ(metric_E2(w, w), 0.0);
  EXPECT_DOUBLE_EQ(metric_E2(2 * w, w), 1.0);
  Vector p = w;
  p(0) += 0.3;
  EXPECT_DOUBLE_EQ(metric_E2(p, w), 0.3 / 3.0);
  EXPECT_WENDY_ERROR(metric_E2(Vector::Ones(2), w), ErrorCode::DimensionMismatch);
}

TEST(MetricEFS, TruthGivesSolverFloor) {
  const ModelSpec lv = catalog("lv");
  const Dataset truth = generate_truth(lv, 256);
  EXPECT_LE(metric_EFS(lv.w_star, lv, truth), 1e-8);
}

TEST(MetricEFS, LogisticAgainstClosedForm) {
  const ModelSpec spec = catalog("logistic");
  const Dataset truth = generate_truth(spec, 512);
  Vector w(2);
  w << 1.0, -1.1;
  const double efs = metric_EFS(w, spec, truth);
  // both trajectories in closed form
  double num = 0.0, den = 0.0;
  for (int m = 0; m <= 512; ++m) {
    const double t = truth.grid.t(m);
    const double a = logistic_exact(t, 0.01);
    const double b = logistic_exact(t, 0.01, 1.0, -1.1);
    num += (a - b) * (a - b);
    den += a * a;
  }
  EXPECT_GT(efs, 0.0);
  EXPECT_NEAR(efs, std::sqrt(num / den), 1e-8);
}

TEST(MetricEFS, UnstableDynamicsDiverge) {
  // u' = u + u^2 from 0.01 blows up near t = ln(101) < T
  const ModelSpec logistic = catalog("logistic");
  const Dataset truth = generate_truth(logistic, 256);
  Vector w(2);
  w << 1.0, 1.0;
  EXPECT_TRUE(std::isinf(metric_EFS(w, logistic, truth)));
}

TEST(LevenbergMarquardt, LinearResidual) {
  const Matrix A = gaussian_matrix(20, 3, 1);
  const Vector c = gaussian_matrix(20, 1, 2);
  const LMResult r = lm_optimize([&](const Vector& w, Vector& out) {
    out = A * w - c;
    return true;
  }, Vector::Zero(3));
  const Vector ls = A.colPivHouseholderQr().solve(c);
  EXPECT_LE((r.w - ls).norm(), 1e-6 * ls.norm());
  EXPECT_LE(r.n_iters, 10);
}

TEST(LevenbergMarquardt, Rosenbrock) {
  Vector w0(2);
  w0 << -1.2, 1.0;
  const LMResult r = lm_optimize([](const Vector& w, Vector& out) {
    out.resize(2);
    out << 10.0 * (w(1) - w(0) * w(0)), 1.0 - w(0);
    return true;
  }, w0);
  EXPECT_LT(std::sqrt(2.0 * r.cost), 1e-8);
  EXPECT_NEAR(r.w(0), 1.0, 1e-6);
  EXPECT_NEAR(r.w(1), 1.0, 1e-6);
}

TEST(LevenbergMarquardt, InfeasibleStart) {
  EXPECT_WENDY_ERROR(lm_optimize([](const Vector&, Vector&) { return false; }, Vector::Zero(2)),
                     ErrorCode::InitialPointInfeasible);
}

TEST(LevenbergMarquardt, RespectsEvaluationBudget) {
  LMOptions o;
  o.max_evals = 10;
  int calls = 0;
  Vector w0(2);
  w0 << -1.2, 1.0;
  const LMResult r = lm_optimize([&](const Vector& w, Vector& out) {
    ++calls;
    out.resize(2);
    out << 10.0 * (w(1) - w(0) * w(0)), 1.0 - w(0);
    return true;
  }, w0, o);
  EXPECT_LE(r.n_evals, 10 + 2);
  EXPECT_EQ(r.n_evals, calls);
}

TEST(Fsnls, StartsHaveCorrectSignAndSpread) {
  const ModelSpec hr = catalog("hr");
  FsnlsOptions o;
  const auto a = fsnls_starts(hr.w_star, 7, o);
  const auto b = fsnls_starts(hr.w_star, 7, o);
  ASSERT_EQ(a.size(), 5u);
  for (size_t s = 0; s < a.size(); ++s) {
    EXPECT_TRUE(a[s] == b[s]);
    for (int j = 0; j < hr.w_star.size(); ++j) {
      const double half = 0.25 * std::sqrt(3.0) * std::abs(hr.w_star(j));
      EXPECT_LE(std::abs(a[s](j) - hr.w_star(j)), half);
      EXPECT_GT(a[s](j) * hr.w_star(j), 0.0);
    }
  }
  EXPECT_FALSE(fsnls_starts(hr.w_star, 8, o)[0] == a[0]);
}

TEST(Fsnls, StartsMatchTargetStandardDeviation) {
  const Vector w = Vector::Ones(1);
  FsnlsOptions o;
  o.n_starts = 20000;
  for (bool gauss : {false, true}) {
    o.gaussian_init = gauss;
    const auto s = fsnls_starts(w, 3, o);
    double ss = 0;
    for (const auto& v : s) ss += std::pow(v(0) - 1.0, 2);
    EXPECT_NEAR(std::sqrt(ss / s.size()), 0.25, 0.01);
  }
}

TEST(Fsnls, NoiselessLotkaVolterraBatch) {
  const ModelSpec lv = catalog("lv");
  const Dataset truth = generate_truth(lv, 256);
  const FsnlsResult r = fsnls(lv, truth, FsnlsStrategy::Batch5, Vector(), 1);
  EXPECT_LE(metric_E2(r.w, lv.w_star), 1e-4);
}

TEST(Fsnls, StartingAtTruthStaysThere) {
  const ModelSpec lv = catalog("lv");
  const Dataset truth = generate_truth(lv, 256);
  const FsnlsResult r = fsnls(lv, truth, FsnlsStrategy::WendyInit, lv.w_star, 0);
  EXPECT_LE(metric_E2(r.w, lv.w_star), 1e-5);
}

TEST(Fsnls, WrongInitLength) {
  const ModelSpec lv = catalog("lv");
  EXPECT_WENDY_ERROR(fsnls(lv, generate_truth(lv, 64), FsnlsStrategy::WendyInit, Vector::Ones(3), 0),
                     ErrorCode::DimensionMismatch);
}

TEST(Experiment, ConfigValidation) {
  ExperimentConfig c;
  c.n_trials = 0;
  EXPECT_WENDY_ERROR(c.validate(), ErrorCode::ConfigError);
  c = {};
  c.estimators = {"ols", "magic"};
  EXPECT_WENDY_ERROR(c.validate(), ErrorCode::ConfigError);
  c = {};
  c.subsample_factors = {3};
  EXPECT_WENDY_ERROR(c.validate(), ErrorCode::ConfigError);
  c = {};
  c.model = "nope";
  EXPECT_WENDY_ERROR(c.validate(), ErrorCode::UnknownModel);
}

TEST(Experiment, NoiselessRecovery) {
  ExperimentConfig c;
  c.model = "lv";
  c.noise_ratios = {0.0};
  c.subsample_factors = {4};
  c.n_trials = 1;
  const auto rec = run_experiment(c, 1);
  ASSERT_EQ(rec.size(), 2u);
  for (const auto& r : rec) {
    EXPECT_EQ(r.M, 256);
    EXPECT_LE(r.E2, 1e-3) << r.estimator;
    EXPECT_FALSE(r.diverged);
  }
}

TEST(Experiment, DeterministicAcrossThreadCounts) {
  ExperimentConfig c;
  c.model = "logistic";
  c.noise_ratios = {0.05, 0.2};
  c.subsample_factors = {1, 2};
  c.n_trials = 3;
  c.seed_base = 11;
  const auto a = run_experiment(c, 1);
  const auto b = run_experiment(c, 4);
  ASSERT_EQ(a.size(), b.size());
  ASSERT_EQ(a.size(), 2u * 2u * 3u * 2u);
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].M, b[i].M);
    EXPECT_EQ(a[i].sigma_nr, b[i].sigma_nr);
    EXPECT_EQ(a[i].estimator, b[i].estimator);
    EXPECT_EQ(a[i].seed, b[i].seed);
    EXPECT_EQ(a[i].E2, b[i].E2);
    EXPECT_EQ(a[i].EFS, b[i].EFS);
  }
  EXPECT_EQ(summary_json(summarize(a), c), summary_json(summarize(b), c));
  // canonical order: factor, noise, trial, estimator
  EXPECT_EQ(a[0].M, 512);
  EXPECT_EQ(a[0].estimator, "ols");
  EXPECT_EQ(a[1].estimator, "wendy");
  EXPECT_EQ(a[2].trial, 1);
  EXPECT_EQ(a[2].seed, 12u);
  EXPECT_EQ(a.back().M, 256);
}

TEST(Experiment, AggregatesMatchRawRows) {
  ExperimentConfig c;
  c.model = "lv";
  c.noise_ratios = {0.1};
  c.subsample_factors = {4};
  c.n_trials = 5;
  const auto rec = run_experiment(c, 0);
  const auto cells = summarize(rec);
  ASSERT_EQ(cells.size(), 2u);
  for (const auto& cell : cells) {
    std::vector<double> e2, wall;
    for (const auto& r : rec) {
      if (r.estimator != cell.estimator) continue;
      e2.push_back(r.E2);
      wall.push_back(r.walltime_seconds);
    }
    EXPECT_EQ(cell.n_trials, 5);
    EXPECT_DOUBLE_EQ(cell.median_E2, stats::median(e2));
    EXPECT_DOUBLE_EQ(cell.mean_E2, stats::mean(e2));
    EXPECT_DOUBLE_EQ(cell.median_walltime, stats::median(wall));
  }
  ASSERT_TRUE(cells[1].pct_drop_E2_vs_ols.has_value());
  EXPECT_DOUBLE_EQ(*cells[1].pct_drop_E2_vs_ols, 100.0 * (1.0 - cells[1].median_E2 / cells[0].median_E2));
}

TEST(Experiment, FailedTrialsExcludedFromMedians) {
  std::vector<TrialRecord> rec(4);
  for (int i = 0; i < 4; ++i) {
    rec[i].model = "lv";
    rec[i].M = 256;
    rec[i].sigma_nr = 0.1;
    rec[i].estimator = "fsnls";
    rec[i].E2 = i + 1.0;
    rec[i].EFS = i + 1.0;
  }
  rec[3].E2 = rec[3].EFS = std::numeric_limits<double>::infinity();
  rec[3].diverged = true;
  const auto cells = summarize(rec);
  ASSERT_EQ(cells.size(), 1u);
  EXPECT_EQ(cells[0].n_failed, 1);
  EXPECT_DOUBLE_EQ(cells[0].failure_rate, 0.25);
  EXPECT_DOUBLE_EQ(cells[0].median_E2, 2.0);
  EXPECT_FALSE(cells[0].pct_drop_E2_vs_ols.has_value());
}

TEST(Experiment, OutputFormats) {
  ExperimentConfig c;
  c.noise_ratios = {0.1};
  c.n_trials = 2;
  const auto rec = run_experiment(c, 2);
  const auto cells = summarize(rec);

  std::istringstream tcsv(trials_csv(rec));
  std::string line;
  std::getline(tcsv, line);
  EXPECT_EQ(line.rfind("model,M,sigma_nr,trial,seed,estimator,E2,EFS,walltime_seconds,n_iters,stop_reason", 0), 0u);
  int rows = 0;
  while (std::getline(tcsv, line)) ++rows;
  EXPECT_EQ(rows, 4);

  std::istringstream lcsv(long_csv(cells));
  std::getline(lcsv, line);
  EXPECT_EQ(line, "model,M,sigma_nr,estimator,metric,value");
  bool saw_drop = false, saw_wall = false;
  while (std::getline(lcsv, line)) {
    saw_drop |= line.find(",pct_drop_E2_vs_ols,") != std::string::npos;
    saw_wall |= line.find(",median_walltime,") != std::string::npos;
  }
  EXPECT_TRUE(saw_drop);
  EXPECT_TRUE(saw_wall);

  const auto j = nlohmann::json::parse(summary_json(cells, c));
  EXPECT_EQ(j["schema_version"], 1);
  ASSERT_EQ(j["cells"].size(), 2u);
  EXPECT_TRUE(j["cells"][1].contains("pct_drop_E2_vs_ols"));
  EXPECT_FALSE(j["cells"][1].contains("median_walltime"));
}
