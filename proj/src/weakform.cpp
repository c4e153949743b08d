#include "wendy/weakform.hpp"

namespace wendy {

Vector quadrature_weights(int M, double dt) {
  if (M < 2) throw Error(ErrorCode::InvalidArgument, "quadrature needs M >= 2");
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "quadrature needs dt > 0");
  Vector q = Vector::Constant(M + 1, dt);
  q(0) = 0.5 * dt;
  q(M) = 0.5 * dt;
  return q;
}

WeakSystem assemble(const Dataset& ds, const FeatureLibrary& lib, const TestBasis& basis) {
  const int d = lib.dim();
  if (ds.dim() != d) throw Error(ErrorCode::DimensionMismatch, "library dimension does not match the data");
  if (basis.Phi_q.cols() != ds.U.rows() || basis.Phi_dot_q.cols() != ds.U.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "test functions are defined on a different grid");
  }
  const int K = static_cast<int>(basis.Phi_q.rows());
  const Matrix PhiTheta = basis.Phi_q * lib.theta(ds.U);
  const Matrix PhiDotU = basis.Phi_dot_q * ds.U;

  WeakSystem sys;
  sys.K = K;
  sys.d = d;
  sys.M = ds.grid.M();
  sys.P = lib.num_params();
  sys.G = Matrix::Zero(static_cast<Eigen::Index>(K) * d, sys.P);
  sys.b.resize(static_cast<Eigen::Index>(K) * d);
  for (int i = 0; i < d; ++i) {
    const auto& terms = lib.terms(i);
    const int off = lib.param_offset(i);
    for (std::size_t j = 0; j < terms.size(); ++j) {
      sys.G.block(static_cast<Eigen::Index>(i) * K, off + static_cast<Eigen::Index>(j), K, 1) = PhiTheta.col(terms[j]);
    }
    sys.b.segment(static_cast<Eigen::Index>(i) * K, K) = -PhiDotU.col(i);
  }
  return sys;
}

}  // namespace wendy
