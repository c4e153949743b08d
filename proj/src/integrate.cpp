#include "wendy/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace wendy {

void IntegratorOptions::validate() const {
  if (!(rel_tol > 0.0 && rel_tol < 1.0) || !(abs_tol > 0.0 && abs_tol < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "integrator tolerances must lie in (0, 1)");
  }
  if (max_steps <= 0) throw Error(ErrorCode::InvalidArgument, "max_steps must be positive");
  if (fixed_step < 0.0) throw Error(ErrorCode::InvalidArgument, "fixed_step must be >= 0");
}

OdeSystem make_system(const FeatureLibrary& lib, const Vector& w) {
  // W is J x d; du_i/dt = sum_j f_j(u) W(j, i).
  const Matrix W = lib.coefficients(w);
  const int d = lib.dim();
  const int J = lib.num_features();
  std::vector<int> active;
  for (int j = 0; j < J; ++j) {
    if (W.row(j).cwiseAbs().maxCoeff() != 0.0) active.push_back(j);
  }

  OdeSystem sys;
  sys.dim = d;
  sys.rhs = [lib, W, active](const Vector& u, Vector& du) {
    du.setZero();
    const StateView s(u.data(), static_cast<std::size_t>(u.size()));
    for (int j : active) du += lib.feature(j).f(s) * W.row(j).transpose();
  };
  sys.jacobian = [lib, W, active, d](const Vector& u, Matrix& jac) {
    jac.setZero(d, d);
    Vector g(d);
    const StateView s(u.data(), static_cast<std::size_t>(u.size()));
    for (int j : active) {
      g.setZero();
      lib.feature(j).grad(s, GradientOut(g.data(), static_cast<std::size_t>(d)));
      jac.noalias() += W.row(j).transpose() * g.transpose();
    }
  };
  return sys;
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
// Continuous extension (Hairer & Wanner, DOPRI5 dense output).
constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                 d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                 d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

struct OutputCursor {
  const TimeGrid& grid;
  Matrix& U;
  int next = 1;

  [[nodiscard]] bool done() const { return next >= grid.num_samples(); }
};

bool near_time(double a, double b) {
  return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b));
}

[[noreturn]] void fail(ErrorCode code, const char* what, double t) {
  std::ostringstream os;
  os << what << " at t=" << t;
  throw Error(code, os.str());
}

void check_blowup(const Vector& y, double t, const IntegratorOptions& opts) {
  if (y.cwiseAbs().maxCoeff() > opts.blowup_threshold) fail(ErrorCode::SolutionBlowUp, "solution blew up", t);
}

double weighted_rms(const Vector& err, const Vector& y0, const Vector& y1, const IntegratorOptions& opts) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < err.size(); ++i) {
    const double sc = opts.abs_tol + opts.rel_tol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    acc += (err[i] / sc) * (err[i] / sc);
  }
  return std::sqrt(acc / static_cast<double>(err.size()));
}

double initial_step(const OdeSystem& sys, const Vector& y0, const Vector& f0, double span, int order,
                    const IntegratorOptions& opts) {
  const Vector sc = (opts.abs_tol + opts.rel_tol * y0.cwiseAbs().array()).matrix();
  const double dnf = std::sqrt((f0.array() / sc.array()).square().mean());
  const double dny = std::sqrt((y0.array() / sc.array()).square().mean());
  double h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : 0.01 * dny / dnf;
  h = std::min(h, span);
  Vector y1 = y0 + h * f0;
  Vector f1(y0.size());
  sys.rhs(y1, f1);
  const double der2 = std::sqrt(((f1 - f0).array() / sc.array()).square().mean()) / h;
  const double der = std::max(der2, dnf);
  const double h1 = der <= 1e-15 ? std::max(1e-6, h * 1e-3) : std::pow(0.01 / der, 1.0 / (order + 1));
  return std::min({100.0 * h, h1, span});
}

void solve_dopri(const OdeSystem& sys, const Vector& u0, OutputCursor& out, const IntegratorOptions& opts) {
  const int n = sys.dim;
  const double t_end = out.grid.t(out.grid.M());
  double t = out.grid.t0();
  Vector y = u0;
  Vector k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n), err(n);
  sys.rhs(y, k1);

  const bool fixed = opts.fixed_step > 0.0;
  double h = fixed ? opts.fixed_step : initial_step(sys, y, k1, t_end - t, 5, opts);
  long steps = 0;

  while (!out.done()) {
    if (++steps > opts.max_steps) fail(ErrorCode::MaxStepsExceeded, "step budget exhausted", t);
    bool last = false;
    if (t + h >= t_end || near_time(t + h, t_end)) {
      h = t_end - t;
      last = true;
    }
    if (h <= 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t))) {
      fail(ErrorCode::StepSizeUnderflow, "step size underflow", t);
    }

    ytmp = y + h * a21 * k1;
    sys.rhs(ytmp, k2);
    ytmp = y + h * (a31 * k1 + a32 * k2);
    sys.rhs(ytmp, k3);
    ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    sys.rhs(ytmp, k4);
    ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    sys.rhs(ytmp, k5);
    ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    sys.rhs(ytmp, k6);
    ynew = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    sys.rhs(ynew, k7);

    const bool finite = ynew.allFinite() && k7.allFinite();
    double enorm = 0.0;
    if (!fixed) {
      err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      enorm = finite ? weighted_rms(err, y, ynew, opts) : std::numeric_limits<double>::infinity();
    } else if (!finite) {
      fail(ErrorCode::SolutionBlowUp, "non-finite state", t);
    }

    if (fixed || enorm <= 1.0) {
      const double t_new = last ? t_end : t + h;
      // Emit every grid point inside (t, t_new].
      const Vector ydiff = ynew - y;
      const Vector bspl = h * k1 - ydiff;
      Vector rc5;
      bool have_rc5 = false;
      while (!out.done()) {
        const double tg = out.grid.t(out.next);
        if (tg > t_new && !near_time(tg, t_new)) break;
        if (near_time(tg, t_new)) {
          out.U.row(out.next) = ynew.transpose();
        } else {
          if (!have_rc5) {
            rc5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
            have_rc5 = true;
          }
          const double th = (tg - t) / h;
          const double th1 = 1.0 - th;
          const Vector rc4 = ydiff - h * k7 - bspl;
          out.U.row(out.next) = (y + th * (ydiff + th1 * (bspl + th * (rc4 + th1 * rc5)))).transpose();
        }
        ++out.next;
      }
      t = t_new;
      y = ynew;
      k1 = k7;
      check_blowup(y, t, opts);
      if (!fixed) {
        const double fac = enorm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(enorm, -0.2), 0.2, 5.0);
        h *= fac;
      }
    } else {
      const double fac = std::isfinite(enorm) ? std::clamp(0.9 * std::pow(enorm, -0.2), 0.1, 1.0) : 0.1;
      h *= fac;
    }
  }
}

// Rosenbrock 2(3) W-method of Shampine & Reichelt; L-stable.
void solve_rosenbrock(const OdeSystem& sys, const Vector& u0, OutputCursor& out, const IntegratorOptions& opts) {
  if (!sys.jacobian) throw Error(ErrorCode::InvalidArgument, "stiff method requires a Jacobian");
  const int n = sys.dim;
  const double gamma = 1.0 / (2.0 + std::sqrt(2.0));
  const double e32 = 6.0 + std::sqrt(2.0);
  const double t_end = out.grid.t(out.grid.M());
  double t = out.grid.t0();
  Vector y = u0;
  Vector f0(n), f1(n), f2(n), k1(n), k2(n), k3(n), ynew(n), err(n);
  Matrix jac(n, n);
  const Matrix eye = Matrix::Identity(n, n);
  sys.rhs(y, f0);

  double h = initial_step(sys, y, f0, t_end - t, 2, opts);
  long steps = 0;
  bool jac_current = false;

  while (!out.done()) {
    if (++steps > opts.max_steps) fail(ErrorCode::MaxStepsExceeded, "step budget exhausted", t);
    bool last = false;
    if (t + h >= t_end || near_time(t + h, t_end)) {
      h = t_end - t;
      last = true;
    }
    if (h <= 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t))) {
      fail(ErrorCode::StepSizeUnderflow, "step size underflow", t);
    }
    if (!jac_current) {
      sys.jacobian(y, jac);
      jac_current = true;
    }
    const Eigen::PartialPivLU<Matrix> lu(eye - h * gamma * jac);
    k1 = lu.solve(f0);
    sys.rhs(y + 0.5 * h * k1, f1);
    k2 = lu.solve(f1 - k1) + k1;
    ynew = y + h * k2;
    sys.rhs(ynew, f2);
    k3 = lu.solve(f2 - e32 * (k2 - f1) - 2.0 * (k1 - f0));
    err = (h / 6.0) * (k1 - 2.0 * k2 + k3);

    const bool finite = ynew.allFinite() && f2.allFinite() && err.allFinite();
    const double enorm = finite ? weighted_rms(err, y, ynew, opts) : std::numeric_limits<double>::infinity();

    if (enorm <= 1.0) {
      const double t_new = last ? t_end : t + h;
      while (!out.done()) {
        const double tg = out.grid.t(out.next);
        if (tg > t_new && !near_time(tg, t_new)) break;
        if (near_time(tg, t_new)) {
          out.U.row(out.next) = ynew.transpose();
        } else {
          // Cubic Hermite through (y, f0) and (ynew, f2).
          const double s = (tg - t) / h;
          const double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
          const double h10 = s * (1 - s) * (1 - s);
          const double h01 = s * s * (3 - 2 * s);
          const double h11 = s * s * (s - 1);
          out.U.row(out.next) = (h00 * y + h10 * h * f0 + h01 * ynew + h11 * h * f2).transpose();
        }
        ++out.next;
      }
      t = t_new;
      y = ynew;
      f0 = f2;
      jac_current = false;
      check_blowup(y, t, opts);
      const double fac = enorm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(enorm, -1.0 / 3.0), 0.2, 5.0);
      h *= fac;
    } else {
      const double fac =
          std::isfinite(enorm) ? std::clamp(0.9 * std::pow(enorm, -1.0 / 3.0), 0.1, 1.0) : 0.1;
      h *= fac;
    }
  }
}

}  // namespace

Dataset solve(const OdeSystem& sys, const Vector& u0, const TimeGrid& grid, const IntegratorOptions& opts) {
  opts.validate();
  if (u0.size() != sys.dim) throw Error(ErrorCode::DimensionMismatch, "initial condition has wrong length");
  if (!u0.allFinite()) throw Error(ErrorCode::NonFiniteData, "initial condition is not finite");
  Matrix U(grid.num_samples(), sys.dim);
  U.row(0) = u0.transpose();
  OutputCursor out{grid, U};
  if (opts.method == IntegratorMethod::ExplicitRK45) {
    solve_dopri(sys, u0, out, opts);
  } else {
    solve_rosenbrock(sys, u0, out, opts);
  }
  return Dataset(grid, std::move(U));
}

Dataset solve(const FeatureLibrary& lib, const Vector& w, const Vector& u0, const TimeGrid& grid,
              const IntegratorOptions& opts) {
  return solve(make_system(lib, w), u0, grid, opts);
}

double rms_norm(const Matrix& U) {
  if (U.size() == 0) throw Error(ErrorCode::InvalidArgument, "rms of an empty matrix");
  return std::sqrt(U.squaredNorm() / static_cast<double>(U.size()));
}

}  // namespace wendy
