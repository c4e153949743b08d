#include "wendy/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "wendy/stats.hpp"

namespace wendy {

namespace {

constexpr double kRankThreshold = 1e-12;

Eigen::ColPivHouseholderQR<Matrix> factor_G(const Matrix& G) {
  if (G.rows() < G.cols()) {
    throw Error(ErrorCode::RankDeficientG, "weak system has fewer rows than parameters");
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(G);
  qr.setThreshold(kRankThreshold);
  if (qr.rank() < G.cols()) {
    const auto& perm = qr.colsPermutation().indices();
    std::vector<int> dep;
    for (Eigen::Index k = qr.rank(); k < G.cols(); ++k) dep.push_back(perm(k));
    std::sort(dep.begin(), dep.end());
    std::ostringstream os;
    os << "weak system matrix G is rank deficient; dependent columns:";
    for (int c : dep) os << ' ' << c;
    throw Error(ErrorCode::RankDeficientG, os.str());
  }
  return qr;
}

// g(m) = sum over equation i's terms of w_j * d f_j / d u_l at row m.
Vector gradient_weight(const Vector& w, const FeatureLibrary& lib, const std::vector<Matrix>& grads, int i, int l) {
  const auto& terms = lib.terms(i);
  const int off = lib.param_offset(i);
  Vector g = Vector::Zero(grads.empty() ? 0 : grads[0].rows());
  for (std::size_t jj = 0; jj < terms.size(); ++jj) {
    const double c = w(off + static_cast<Eigen::Index>(jj));
    if (c != 0.0) g.noalias() += c * grads[static_cast<std::size_t>(terms[jj])].col(l);
  }
  return g;
}

// Block A_il of L, or an empty matrix when it vanishes identically.
Matrix L_block(const Vector& g, const TestBasis& basis, bool diag) {
  const bool has_g = !g.isZero(0.0);
  if (!has_g && !diag) return {};
  Matrix A = has_g ? Matrix(basis.Phi_q * g.asDiagonal()) : Matrix::Zero(basis.Phi_q.rows(), basis.Phi_q.cols());
  if (diag) A += basis.Phi_dot_q;
  return A;
}

void check_w(const Vector& w, const FeatureLibrary& lib) {
  if (w.size() != lib.num_params()) throw Error(ErrorCode::DimensionMismatch, "parameter vector length mismatch");
}

}  // namespace

void IRLSOptions::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in [0, 1]");
  if (!(alpha_retry > 0.0 && alpha_retry <= 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha_retry must lie in (0, 1]");
  if (!(tau_fp >= 0.0)) throw Error(ErrorCode::InvalidArgument, "tau_fp must be non-negative");
  if (!(tau_sw >= 0.0 && tau_sw < 1.0)) throw Error(ErrorCode::InvalidArgument, "tau_sw must lie in [0, 1)");
  if (n0 < 0) throw Error(ErrorCode::InvalidArgument, "n0 must be non-negative");
  if (max_its < 1) throw Error(ErrorCode::InvalidArgument, "max_its must be >= 1");
}

NoiseFilter NoiseFilter::standard() {
  std::vector<double> nodes(15);
  std::iota(nodes.begin(), nodes.end(), -7.0);
  NoiseFilter nf;
  nf.f = stats::fd_weights(6, nodes, 0.0);
  nf.f /= nf.f.norm();
  return nf;
}

double estimate_sigma(const Dataset& ds, const NoiseFilter& filter) {
  const Eigen::Index n = ds.U.rows();
  const Eigen::Index w = filter.f.size();
  if (w == 0) throw Error(ErrorCode::InvalidArgument, "empty noise filter");
  if (n < w) throw Error(ErrorCode::TooFewSamples, "too few samples to estimate the noise level");
  const Eigen::Index nvalid = n - w + 1;
  double ss = 0.0;
  for (Eigen::Index i = 0; i < ds.U.cols(); ++i) {
    for (Eigen::Index m = 0; m < nvalid; ++m) {
      const double v = ds.U.col(i).segment(m, w).dot(filter.f.reverse());
      ss += v * v;
    }
  }
  return std::sqrt(ss / static_cast<double>(nvalid * ds.U.cols()));
}

Vector ols_solve(const WeakSystem& sys) {
  if (sys.G.rows() != sys.b.size()) throw Error(ErrorCode::DimensionMismatch, "G and b row counts differ");
  return factor_G(sys.G).solve(sys.b);
}

Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic> vec_transpose_permutation(int rows, int cols) {
  // Entry (r, c) sits at r + c*rows in vec(E) and at c + r*cols in vec(E^T).
  Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic> P(rows * cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) P.indices()(r + c * rows) = c + r * cols;
  }
  return P;
}

Matrix build_L(const Vector& w, const Dataset& ds, const FeatureLibrary& lib, const TestBasis& basis) {
  check_w(w, lib);
  const int d = lib.dim();
  const Eigen::Index K = basis.Phi_q.rows();
  const Eigen::Index n = ds.U.rows();
  const std::vector<Matrix> grads = lib.theta_grad(ds.U);
  Matrix L = Matrix::Zero(K * d, n * d);
  for (int i = 0; i < d; ++i) {
    for (int l = 0; l < d; ++l) {
      const Matrix A = L_block(gradient_weight(w, lib, grads, i, l), basis, i == l);
      if (A.size() > 0) L.block(i * K, l * n, K, n) = A;
    }
  }
  return L;
}

Matrix residual_covariance(const Vector& w, const Dataset& ds, const FeatureLibrary& lib, const TestBasis& basis,
                           double alpha) {
  check_w(w, lib);
  const int d = lib.dim();
  const Eigen::Index K = basis.Phi_q.rows();
  const Eigen::Index Kd = K * d;
  Matrix C = Matrix::Zero(Kd, Kd);
  if (alpha < 1.0) {
    const std::vector<Matrix> grads = lib.theta_grad(ds.U);
    const Eigen::Index n = ds.U.rows();
    for (int l = 0; l < d; ++l) {
      // Stack the nonzero blocks in column l and add B B^T to the matching rows.
      std::vector<int> rows;
      std::vector<Matrix> blocks;
      for (int i = 0; i < d; ++i) {
        Matrix A = L_block(gradient_weight(w, lib, grads, i, l), basis, i == l);
        if (A.size() > 0) {
          rows.push_back(i);
          blocks.push_back(std::move(A));
        }
      }
      Matrix B(static_cast<Eigen::Index>(rows.size()) * K, n);
      for (std::size_t r = 0; r < rows.size(); ++r) B.middleRows(static_cast<Eigen::Index>(r) * K, K) = blocks[r];
      Matrix BB = Matrix::Zero(B.rows(), B.rows());
      BB.selfadjointView<Eigen::Lower>().rankUpdate(B);
      BB.triangularView<Eigen::StrictlyUpper>() = BB.transpose();
      for (std::size_t a = 0; a < rows.size(); ++a) {
        for (std::size_t b = 0; b < rows.size(); ++b) {
          C.block(rows[a] * K, rows[b] * K, K, K) +=
              BB.block(static_cast<Eigen::Index>(a) * K, static_cast<Eigen::Index>(b) * K, K, K);
        }
      }
    }
    C *= (1.0 - alpha);
  }
  C.diagonal().array() += alpha;
  return C;
}

double residual_normality(const Vector& r) {
  const Eigen::Index n = r.size();
  if (n < 3) return 1.0;
  std::vector<double> x;
  if (n <= 5000) {
    x.assign(r.data(), r.data() + n);
  } else {
    const double step = static_cast<double>(n) / 5000.0;
    x.reserve(5000);
    for (int k = 0; k < 5000; ++k) x.push_back(r(static_cast<Eigen::Index>(std::floor(k * step))));
  }
  const double mu = stats::mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - mu) * (v - mu);
  const double sd = std::sqrt(ss / static_cast<double>(x.size() - 1));
  if (!(sd > 0.0) || !std::isfinite(sd)) return 1.0;
  for (double& v : x) v = (v - mu) / sd;
  try {
    return stats::shapiro_wilk(x).p;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::DegenerateSample) return 1.0;
    throw;
  }
}

StopCheck stopping_criteria(const Vector& w_next, const Vector& w_prev, const Vector& whitened_residual, int n,
                            const IRLSOptions& opts) {
  StopCheck sc;
  const double denom = w_prev.norm();
  const double diff = (w_next - w_prev).norm();
  sc.relative_change = denom > 0.0 ? diff / denom : diff;
  sc.sw_pvalue = n > opts.n0 ? residual_normality(whitened_residual) : 1.0;
  const bool moving = sc.relative_change > opts.tau_fp;
  const bool below_cap = n < opts.max_its;
  const bool normal = sc.sw_pvalue > opts.tau_sw;
  sc.keep_going = moving && below_cap && normal;
  if (!moving) sc.reason = StopReason::FixedPoint;
  else if (!normal) sc.reason = StopReason::ShapiroWilkReject;
  else if (!below_cap) sc.reason = StopReason::MaxIterations;
  return sc;
}

ParameterCovariance parameter_covariance(const WeakSystem& sys, const Matrix& C_hat, double sigma_hat) {
  const Eigen::Index rows = sys.G.rows();
  if (C_hat.rows() != rows || C_hat.cols() != rows) {
    throw Error(ErrorCode::DimensionMismatch, "covariance size does not match the weak system");
  }
  const auto qr = factor_G(sys.G);
  // G^+ = (G^T G)^{-1} G^T = P R^{-1} Q1^T.
  const Eigen::Index p = sys.G.cols();
  const Matrix R = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  Matrix Q1 = qr.householderQ() * Matrix::Identity(rows, p);
  Matrix X = R.triangularView<Eigen::Upper>().solve(Q1.transpose());  // p x rows
  Matrix Gp = qr.colsPermutation() * X;
  ParameterCovariance pc;
  pc.S = sigma_hat * sigma_hat * (Gp * C_hat * Gp.transpose());
  pc.S = 0.5 * (pc.S + pc.S.transpose()).eval();
  pc.stdx = pc.S.diagonal().cwiseMax(0.0).cwiseSqrt();
  return pc;
}

std::vector<std::pair<double, double>> confidence_intervals(const EstimationResult& result, double level) {
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorCode::InvalidArgument, "confidence level must lie in (0, 1)");
  if (result.stdx.size() != result.w_hat.size()) {
    throw Error(ErrorCode::DimensionMismatch, "stdx and w_hat lengths differ");
  }
  const double z = stats::normal_quantile(0.5 * (1.0 + level));
  std::vector<std::pair<double, double>> ci;
  ci.reserve(static_cast<std::size_t>(result.w_hat.size()));
  for (Eigen::Index j = 0; j < result.w_hat.size(); ++j) {
    ci.emplace_back(result.w_hat(j) - z * result.stdx(j), result.w_hat(j) + z * result.stdx(j));
  }
  return ci;
}

namespace {

struct WeightedStep {
  Vector w;
  Vector residual;  // whitened
};

// Solve min || R^{-1} (G w - b) || with C = R R^T. Returns false if C is not SPD.
bool weighted_step(const WeakSystem& sys, const Matrix& C, WeightedStep& out) {
  Eigen::LLT<Matrix> llt(C);
  if (llt.info() != Eigen::Success) return false;
  const auto Lc = llt.matrixL();
  const Matrix Gw = Lc.solve(sys.G);
  const Vector bw = Lc.solve(sys.b);
  if (!Gw.allFinite() || !bw.allFinite()) return false;
  out.w = factor_G(Gw).solve(bw);
  out.residual = Gw * out.w - bw;
  return true;
}

}  // namespace

EstimationResult irls(const WeakSystem& sys, const Dataset& ds, const FeatureLibrary& lib, const TestBasis& basis,
                      const IRLSOptions& opts) {
  opts.validate();
  EstimationResult res;
  res.w_ols = ols_solve(sys);
  res.alpha_used = opts.alpha;

  auto covariance = [&](const Vector& w) { return residual_covariance(w, ds, lib, basis, res.alpha_used); };

  Vector w = res.w_ols;
  Matrix C;
  WeightedStep step;
  int n = 0;
  bool retried = false;
  for (;;) {
    C = covariance(w);
    if (!weighted_step(sys, C, step)) {
      if (retried || res.alpha_used >= opts.alpha_retry) {
        throw Error(ErrorCode::CholeskyFailure, "residual covariance is not positive definite");
      }
      retried = true;
      res.alpha_used = opts.alpha_retry;
      continue;
    }
    const StopCheck sc = stopping_criteria(step.w, w, step.residual, n, opts);
    res.trace.push_back({step.w, sc.relative_change, sc.sw_pvalue});
    w = step.w;
    ++n;
    if (!sc.keep_going) {
      res.stop_reason = sc.reason;
      break;
    }
  }
  res.w_hat = w;
  res.n_iters = n;
  res.residual = step.residual;
  res.C_hat = covariance(res.w_hat);
  res.sigma_hat = estimate_sigma(ds);
  ParameterCovariance pc = parameter_covariance(sys, res.C_hat, res.sigma_hat);
  res.S = std::move(pc.S);
  res.stdx = std::move(pc.stdx);
  return res;
}

WendyFit estimate(const Dataset& ds, const FeatureLibrary& lib, const WendyOptions& opts) {
  validate_dataset(ds, lib);
  opts.irls.validate();
  WendyFit fit;
  fit.basis = build_test_basis(ds, opts.testfn);
  const WeakSystem sys = assemble(ds, lib, fit.basis);
  if (opts.estimator == EstimatorKind::WENDy) {
    fit.result = irls(sys, ds, lib, fit.basis, opts.irls);
    return fit;
  }
  EstimationResult& r = fit.result;
  r.w_ols = ols_solve(sys);
  r.w_hat = r.w_ols;
  r.n_iters = 0;
  r.stop_reason = StopReason::FixedPoint;
  r.alpha_used = 1.0;
  r.C_hat = Matrix::Identity(sys.G.rows(), sys.G.rows());
  r.residual = sys.G * r.w_hat - sys.b;
  r.sigma_hat = estimate_sigma(ds);
  ParameterCovariance pc = parameter_covariance(sys, r.C_hat, r.sigma_hat);
  r.S = std::move(pc.S);
  r.stdx = std::move(pc.stdx);
  return fit;
}

}  // namespace wendy
