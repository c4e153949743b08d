#include "wendy/testfn.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <set>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/FFT>

#include "wendy/estimator.hpp"
#include "wendy/stats.hpp"

namespace wendy {

namespace {

constexpr double kPi = std::numbers::pi;

void check_bump(const BumpParams& p) {
  if (!(p.eta > 0.0) || !std::isfinite(p.eta)) throw Error(ErrorCode::InvalidArgument, "bump eta must be positive");
  if (p.m_t < 1) throw Error(ErrorCode::InvalidArgument, "bump radius must be at least one grid step");
  if (!(p.dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "bump dt must be positive");
}

// Unit-norm bump samples at offsets -m_t..m_t (length 2 m_t + 1).
Vector bump_stencil(int m_t, double eta) {
  Vector v(2 * m_t + 1);
  for (int j = -m_t; j <= m_t; ++j) v(j + m_t) = bump_shape(static_cast<double>(j) / m_t, eta);
  const double nrm = v.norm();
  if (!(nrm > 0.0)) throw Error(ErrorCode::InvalidArgument, "bump has no interior samples");
  return v / nrm;
}

struct ModeTable {
  int n = 0;
  Vector sin_tab;  // sin(2 pi n m / M), m = 0..M (entry M unused by the sum)
};

ModeTable mode_table(int M, double s) {
  ModeTable t;
  t.n = static_cast<int>(std::floor(M / s));
  t.sin_tab.resize(M + 1);
  for (int m = 0; m <= M; ++m) {
    // Reduce the argument exactly in integers before calling sin.
    const long long r = (static_cast<long long>(t.n) * m) % M;
    t.sin_tab(m) = std::sin(2.0 * kPi * static_cast<double>(r) / M);
  }
  t.sin_tab(M) = 0.0;
  return t;
}

void check_radius(int M, int m_t) {
  if (m_t < 1) throw Error(ErrorCode::InvalidArgument, "radius must be at least one grid step");
  if (2 * m_t > M) throw Error(ErrorCode::RadiusTooLarge, "test function support exceeds the time domain");
}

}  // namespace

void TestFunctionOptions::validate() const {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw Error(ErrorCode::InvalidArgument, "eta must be positive");
  if (!(s > 2.0 && s < 4.0)) throw Error(ErrorCode::InvalidArgument, "coarsening factor s must lie in (2, 4)");
  if (stride < 1) throw Error(ErrorCode::InvalidArgument, "stride must be >= 1");
  if (num_radius_candidates < 4) throw Error(ErrorCode::InvalidArgument, "need at least 4 radius candidates");
  if (num_levels < 1) throw Error(ErrorCode::InvalidArgument, "need at least one test-function level");
  if (min_radius && *min_radius < 1) throw Error(ErrorCode::InvalidArgument, "min_radius must be >= 1");
}

double bump_shape(double x, double eta) {
  const double q = 1.0 - x * x;
  if (!(q > 0.0)) return 0.0;
  return std::exp(-eta / q);
}

double bump_normalizer(const BumpParams& p) {
  check_bump(p);
  double ss = 0.0;
  for (int j = -p.m_t; j <= p.m_t; ++j) {
    const double v = bump_shape(static_cast<double>(j) / p.m_t, p.eta);
    ss += v * v;
  }
  return 1.0 / std::sqrt(ss);
}

double bump_eval(double t, double center, const BumpParams& p) {
  return bump_normalizer(p) * bump_shape((t - center) / p.radius(), p.eta);
}

double bump_derivative(double t, double center, const BumpParams& p) {
  const double a = p.radius();
  const double x = (t - center) / a;
  const double q = 1.0 - x * x;
  if (!(q > 0.0)) return 0.0;
  const double psi = bump_normalizer(p) * std::exp(-p.eta / q);
  return psi * (-2.0 * p.eta * x / (q * q)) / a;
}

Vector bump_vector(const TimeGrid& grid, int center, const BumpParams& p) {
  check_bump(p);
  const int M = grid.M();
  if (center < 0 || center > M) throw Error(ErrorCode::InvalidArgument, "bump center outside the grid");
  Vector v = Vector::Zero(M + 1);
  const Vector st = bump_stencil(p.m_t, p.eta);
  for (int j = -p.m_t; j <= p.m_t; ++j) {
    const int m = center + j;
    if (m >= 0 && m <= M) v(m) = st(j + p.m_t);
  }
  // Renormalise in case part of the support fell off the grid.
  const double nrm = v.norm();
  if (nrm > 0.0) v /= nrm;
  return v;
}

std::vector<int> interior_centers(int M, int m_t, int stride) {
  std::vector<int> c;
  if (stride < 1) throw Error(ErrorCode::InvalidArgument, "stride must be >= 1");
  for (int k = m_t; k <= M - m_t; k += stride) c.push_back(k);
  return c;
}

Matrix integration_error_terms(const Dataset& ds, int m_t, double s, double eta, int stride) {
  const int M = ds.grid.M();
  check_radius(M, m_t);
  const ModeTable mt = mode_table(M, s);
  const Vector st = bump_stencil(m_t, eta);
  const std::vector<int> centers = interior_centers(M, m_t, stride);
  const int d = ds.dim();
  const double scale = 4.0 * kPi * mt.n / M;

  Matrix e(static_cast<Eigen::Index>(centers.size()), d);
  for (std::size_t k = 0; k < centers.size(); ++k) {
    const int lo = centers[k] - m_t;
    for (int i = 0; i < d; ++i) {
      double acc = 0.0;
      // The periodic DFT sums m = 0..M-1; sample M is the wrap of sample 0.
      for (int j = 0; j <= 2 * m_t; ++j) {
        const int m = lo + j;
        if (m >= M) break;
        acc += st(j) * ds.U(m, i) * mt.sin_tab(m);
      }
      e(static_cast<Eigen::Index>(k), i) = scale * acc;
    }
  }
  return e;
}

double integration_error_estimate(const Dataset& ds, int m_t, double s, double eta, int stride) {
  const Matrix e = integration_error_terms(ds, m_t, s, eta, stride);
  return std::sqrt(e.squaredNorm() / static_cast<double>(e.rows()));
}

double integration_error_noise_floor(const Dataset& ds, int m_t, double s, double sigma, double eta,
                                     int stride) {
  const int M = ds.grid.M();
  check_radius(M, m_t);
  const ModeTable mt = mode_table(M, s);
  const Vector st = bump_stencil(m_t, eta);
  const std::vector<int> centers = interior_centers(M, m_t, stride);
  const double scale = 4.0 * kPi * mt.n / M;
  double total = 0.0;
  for (int c : centers) {
    double acc = 0.0;
    for (int j = 0; j <= 2 * m_t; ++j) {
      const int m = c - m_t + j;
      if (m >= M) break;
      acc += st(j) * st(j) * mt.sin_tab(m) * mt.sin_tab(m);
    }
    total += acc;
  }
  const double var = sigma * sigma * scale * scale * total / static_cast<double>(centers.size());
  return std::sqrt(ds.dim() * var);
}

std::vector<int> radius_candidates(int M, int count) {
  const int hi = M / 4;
  if (hi < 2) throw Error(ErrorCode::InvalidArgument, "grid too short for radius selection");
  std::set<int> r;
  if (count <= 1) return {2};
  const double l0 = std::log(2.0), l1 = std::log(static_cast<double>(hi));
  for (int i = 0; i < count; ++i) {
    const double x = l0 + (l1 - l0) * i / (count - 1);
    r.insert(std::clamp(static_cast<int>(std::lround(std::exp(x))), 2, hi));
  }
  return {r.begin(), r.end()};
}

RadiusSelection select_min_radius(const Dataset& ds, const TestFunctionOptions& opts) {
  opts.validate();
  const int M = ds.grid.M();
  if (M < 16) throw Error(ErrorCode::InvalidArgument, "radius selection needs at least 16 intervals");
  const int upper = std::max(2, M / 8);

  RadiusSelection sel;
  const std::vector<int> cand = radius_candidates(M, opts.num_radius_candidates);
  std::vector<double> logr, loge;
  std::vector<int> kept;
  for (std::size_t i = 0; i < cand.size(); ++i) {
    const double e = integration_error_estimate(ds, cand[i], opts.s, opts.eta, opts.stride);
    sel.radii.push_back(cand[i]);
    sel.errors.push_back(e);
    if (std::isfinite(e) && e > 0.0) {
      kept.push_back(static_cast<int>(i));
      logr.push_back(std::log(static_cast<double>(cand[i])));
      loge.push_back(std::log(e));
    }
  }
  if (logr.size() < 4) throw Error(ErrorCode::DegenerateSeries, "integration error estimate is degenerate");

  // If the smallest radius is already at the noise floor there is no
  // integration-error regime to detect.
  const double sigma = estimate_sigma(ds);
  const double floor0 = integration_error_noise_floor(ds, cand.front(), opts.s, sigma, opts.eta, opts.stride);
  if (sel.errors.front() <= 2.0 * floor0) {
    sel.noise_dominated = true;
    sel.changepoint_index = 0;
    sel.min_radius = std::clamp(cand.front(), 2, upper);
    return sel;
  }

  const int idx = kept[static_cast<std::size_t>(stats::changepoint(logr, loge))];
  sel.changepoint_index = idx;
  sel.min_radius = std::clamp(cand[static_cast<std::size_t>(idx)], 2, upper);
  return sel;
}

Matrix fourier_diff(const Matrix& Phi, double T) {
  if (!(T > 0.0)) throw Error(ErrorCode::InvalidArgument, "fourier_diff needs T > 0");
  const Eigen::Index cols = Phi.cols();
  if (cols < 3) throw Error(ErrorCode::InvalidArgument, "fourier_diff needs at least 3 samples");
  const int M = static_cast<int>(cols) - 1;
  Eigen::FFT<double> fft;
  std::vector<double> row(M);
  std::vector<std::complex<double>> spec;
  std::vector<double> back;
  Matrix out(Phi.rows(), cols);
  for (Eigen::Index r = 0; r < Phi.rows(); ++r) {
    for (int m = 0; m < M; ++m) row[m] = Phi(r, m);
    fft.fwd(spec, row);
    // spec holds the full M-length spectrum for real input.
    spec.resize(M);
    for (int n = 0; n < M; ++n) {
      double k;
      if (2 * n < M) k = n;
      else if (2 * n > M) k = n - M;
      else k = 0.0;
      spec[n] *= std::complex<double>(0.0, 2.0 * kPi * k / T);
    }
    fft.inv(back, spec);
    for (int m = 0; m < M; ++m) out(r, m) = back[m];
    out(r, M) = back[0];
  }
  return out;
}

TestBasis build_orthonormal_basis(const TimeGrid& grid, int min_radius, const TestFunctionOptions& opts) {
  opts.validate();
  const int M = grid.M();
  if (min_radius < 1) throw Error(ErrorCode::InvalidArgument, "min_radius must be >= 1");
  check_radius(M, min_radius);

  TestBasis basis;
  basis.min_radius = min_radius;
  const int n = M + 1;
  Matrix gram = Matrix::Zero(n, n);
  for (int l = 0; l < opts.num_levels; ++l) {
    const int r = min_radius << l;
    if (2 * r > M) break;
    basis.radii_used.push_back(r);
    const Vector st = bump_stencil(r, opts.eta);
    const Matrix outer = st * st.transpose();
    const int w = 2 * r + 1;
    for (int c : interior_centers(M, r, opts.stride)) gram.block(c - r, c - r, w, w) += outer;
  }

  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  if (eig.info() != Eigen::Success) throw Error(ErrorCode::RankDeficient, "eigen-decomposition of test functions failed");
  // Ascending eigenvalues; flip to descending singular values.
  const Vector lam = eig.eigenvalues().reverse();
  Vector sv = lam.cwiseMax(0.0).cwiseSqrt();
  const double s1 = sv.size() > 0 ? sv(0) : 0.0;
  if (!(s1 > 0.0)) throw Error(ErrorCode::RankDeficient, "test-function matrix is zero");
  const double tol = std::sqrt(std::numeric_limits<double>::epsilon()) * s1;
  int rank = 0;
  while (rank < sv.size() && sv(rank) > tol) ++rank;
  if (rank == 0 || (sv.head(rank).array() < 1e-14 * s1).all()) {
    throw Error(ErrorCode::RankDeficient, "all singular values are negligible");
  }
  basis.singular_values = sv.head(rank);

  int K = rank;
  if (rank >= 4) {
    std::vector<double> cum(rank);
    double acc = 0.0;
    for (int i = 0; i < rank; ++i) cum[i] = (acc += sv(i));
    K = stats::changepoint(cum);
  }
  basis.K = K;

  const Matrix& V = eig.eigenvectors();
  basis.Phi.resize(K, n);
  for (int k = 0; k < K; ++k) {
    Vector v = V.col(n - 1 - k);
    // Fix the sign so the basis is reproducible across platforms.
    Eigen::Index imax;
    v.cwiseAbs().maxCoeff(&imax);
    if (v(imax) < 0.0) v = -v;
    basis.Phi.row(k) = v.transpose();
  }
  basis.Phi_dot = fourier_diff(basis.Phi, grid.T());

  Vector q = Vector::Constant(n, grid.dt());
  q(0) *= 0.5;
  q(n - 1) *= 0.5;
  basis.Phi_q = basis.Phi * q.asDiagonal();
  basis.Phi_dot_q = basis.Phi_dot * q.asDiagonal();
  return basis;
}

TestBasis build_test_basis(const Dataset& ds, const TestFunctionOptions& opts) {
  opts.validate();
  int m = 0;
  if (opts.min_radius) {
    m = *opts.min_radius;
  } else {
    m = select_min_radius(ds, opts).min_radius;
  }
  return build_orthonormal_basis(ds.grid, m, opts);
}

}  // namespace wendy
