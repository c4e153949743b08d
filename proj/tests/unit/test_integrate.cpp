#include <gtest/gtest.h>

#include "helpers.hpp"
#include "wendy/integrate.hpp"
#include "wendy/models.hpp"

using namespace wendy;
using namespace wendy::testing;

namespace {

Vector logistic_w() {
  Vector w(2);
  w << 1.0, -1.0;
  return w;
}

double logistic_error(const IntegratorOptions& opts, int M = 64) {
  const TimeGrid g = TimeGrid::over(0.0, 10.0, M);
  const Dataset sol = solve(logistic_library(), logistic_w(), Vector::Constant(1, 0.01), g, opts);
  double err = 0.0;
  for (int m = 0; m <= M; ++m) err = std::max(err, std::abs(sol.U(m, 0) - logistic_exact(g.t(m), 0.01)));
  return err;
}

}  // namespace

TEST(Solve, LogisticMatchesClosedForm) {
  const TimeGrid g = TimeGrid::over(0.0, 10.0, 512);
  const Dataset sol = solve(logistic_library(), logistic_w(), Vector::Constant(1, 0.01), g);
  const double want = 0.01 * std::exp(10.0) / (1.0 + 0.01 * (std::exp(10.0) - 1.0));
  EXPECT_NEAR(sol.U(512, 0), want, 1e-10);
  EXPECT_NEAR(want, 0.99553, 5e-6);
  EXPECT_LT(logistic_error({}), 1e-10);
}

TEST(Solve, ZeroFieldIsConstant) {
  const ModelSpec spec = catalog("ptb");
  const Dataset sol = solve(spec.lib, Vector::Zero(spec.lib.num_params()), spec.u0, TimeGrid::over(0, 5, 50));
  for (int m = 0; m <= 50; ++m) EXPECT_TRUE(sol.U.row(m).transpose().isApprox(spec.u0, 1e-15));
}

TEST(Solve, LotkaVolterraRms) {
  const ModelSpec lv = catalog("lv");
  const Dataset sol = solve(lv.lib, lv.w_star, lv.u0, TimeGrid::over(0, lv.T, 1024));
  EXPECT_NEAR(rms_norm(sol.U), 6.8, 0.02 * 6.8);
}

TEST(Solve, StiffMethodMatchesClosedForm) {
  IntegratorOptions o;
  o.method = IntegratorMethod::StiffImplicit;
  o.rel_tol = 1e-8;
  o.abs_tol = 1e-10;
  EXPECT_LT(logistic_error(o), 1e-5);
}

TEST(Solve, StiffAndExplicitAgreeOnFitzHughNagumo) {
  const ModelSpec fhn = catalog("fhn");
  const TimeGrid g = TimeGrid::over(0, fhn.T, 256);
  IntegratorOptions o;
  o.rel_tol = 1e-9;
  o.abs_tol = 1e-9;
  const Dataset a = solve(fhn.lib, fhn.w_star, fhn.u0, g, o);
  o.method = IntegratorMethod::StiffImplicit;
  const Dataset b = solve(fhn.lib, fhn.w_star, fhn.u0, g, o);
  EXPECT_LT((a.U - b.U).norm() / a.U.norm(), 1e-5);
}

TEST(Solve, FifthOrderConvergence) {
  IntegratorOptions o;
  o.fixed_step = 0.1;
  const double e1 = logistic_error(o, 10);
  o.fixed_step = 0.05;
  const double e2 = logistic_error(o, 10);
  const double ratio = e1 / e2;
  EXPECT_GT(ratio, 32.0 * 0.75);
  EXPECT_LT(ratio, 32.0 * 1.35);
}

TEST(Solve, TighterToleranceDoesNotHurt) {
  for (double tol : {1e-4, 1e-6, 1e-8, 1e-10}) {
    IntegratorOptions loose;
    loose.rel_tol = loose.abs_tol = tol;
    IntegratorOptions tight;
    tight.rel_tol = tight.abs_tol = tol / 10;
    EXPECT_LE(logistic_error(tight), 2.0 * logistic_error(loose) + 1e-15) << tol;
  }
}

TEST(Solve, BlowUpIsReported) {
  // u' = u^2 from u(0)=1 blows up at t=1
  const FeatureLibrary lib = library_from_terms(1, {{"u1^2"}});
  bool thrown = false;
  try {
    (void)solve(lib, Vector::Ones(1), Vector::Ones(1), TimeGrid::over(0, 2, 20));
  } catch (const Error& e) {
    thrown = true;
    EXPECT_TRUE(e.code() == ErrorCode::SolutionBlowUp || e.code() == ErrorCode::StepSizeUnderflow ||
                e.code() == ErrorCode::MaxStepsExceeded);
  }
  EXPECT_TRUE(thrown);
}

TEST(Solve, MaxStepsExceeded) {
  IntegratorOptions o;
  o.max_steps = 5;
  EXPECT_WENDY_ERROR(logistic_error(o), ErrorCode::MaxStepsExceeded);
}

TEST(Solve, DimensionMismatch) {
  EXPECT_WENDY_ERROR(solve(logistic_library(), logistic_w(), Vector::Ones(2), TimeGrid::over(0, 1, 4)),
                     ErrorCode::DimensionMismatch);
}

TEST(RmsNorm, OnesAndLogistic) {
  EXPECT_DOUBLE_EQ(rms_norm(Matrix::Ones(4, 2)), 1.0);
  const ModelSpec s = catalog("logistic");
  EXPECT_NEAR(rms_norm(generate_truth(s, 512).U), 0.66, 0.02 * 0.66);
}
