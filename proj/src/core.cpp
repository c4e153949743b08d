#include "wendy/core.hpp"

#include <cmath>
#include <sstream>
#include <utility>

namespace wendy {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFiniteData: return "NonFiniteData";
    case ErrorCode::DomainViolation: return "DomainViolation";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::StepSizeUnderflow: return "StepSizeUnderflow";
    case ErrorCode::MaxStepsExceeded: return "MaxStepsExceeded";
    case ErrorCode::SolutionBlowUp: return "SolutionBlowUp";
    case ErrorCode::RadiusTooLarge: return "RadiusTooLarge";
    case ErrorCode::DegenerateSeries: return "DegenerateSeries";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::RankDeficientG: return "RankDeficientG";
    case ErrorCode::SampleTooSmall: return "SampleTooSmall";
    case ErrorCode::SampleTooLarge: return "SampleTooLarge";
    case ErrorCode::DegenerateSample: return "DegenerateSample";
    case ErrorCode::SeriesTooShort: return "SeriesTooShort";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::CholeskyFailure: return "CholeskyFailure";
    case ErrorCode::UnknownModel: return "UnknownModel";
    case ErrorCode::IndivisibleFactor: return "IndivisibleFactor";
    case ErrorCode::InitialPointInfeasible: return "InitialPointInfeasible";
    case ErrorCode::AllStartsFailed: return "AllStartsFailed";
    case ErrorCode::NonUniformGrid: return "NonUniformGrid";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IOError: return "IOError";
  }
  return "Unknown";
}

std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::FixedPoint: return "fixed_point";
    case StopReason::MaxIterations: return "max_iterations";
    case StopReason::ShapiroWilkReject: return "shapiro_wilk_reject";
  }
  return "unknown";
}

TimeGrid::TimeGrid(double t0, double dt, int num_samples) : t0_(t0), dt_(dt), n_(num_samples) {
  if (!(dt > 0.0) || !std::isfinite(dt) || !std::isfinite(t0)) {
    throw Error(ErrorCode::InvalidArgument, "time grid needs a finite dt > 0");
  }
  if (num_samples < 3) {
    throw Error(ErrorCode::InvalidArgument, "time grid needs M >= 2 (at least 3 samples)");
  }
}

TimeGrid TimeGrid::over(double t0, double T, int M) { return TimeGrid(t0, T / M, M + 1); }

Vector TimeGrid::times() const {
  Vector out(n_);
  for (int m = 0; m < n_; ++m) out[m] = t(m);
  return out;
}

Dataset::Dataset(TimeGrid g, Matrix u) : grid(g), U(std::move(u)) {
  if (U.rows() != grid.num_samples()) {
    std::ostringstream os;
    os << "dataset has " << U.rows() << " rows but the grid has " << grid.num_samples() << " samples";
    throw Error(ErrorCode::DimensionMismatch, os.str());
  }
}

FeatureLibrary::FeatureLibrary(int d, std::vector<Feature> features, std::vector<std::vector<int>> terms)
    : d_(d), features_(std::move(features)), terms_(std::move(terms)) {
  if (d < 1) throw Error(ErrorCode::InvalidArgument, "library dimension must be >= 1");
  if (features_.empty()) throw Error(ErrorCode::InvalidArgument, "library needs at least one feature");
  if (static_cast<int>(terms_.size()) != d) {
    throw Error(ErrorCode::DimensionMismatch, "library needs one term list per equation");
  }
  offsets_.assign(1, 0);
  for (const auto& eq : terms_) {
    for (int j : eq) {
      if (j < 0 || j >= num_features()) {
        throw Error(ErrorCode::InvalidArgument, "term references an unknown feature index");
      }
    }
    offsets_.push_back(offsets_.back() + static_cast<int>(eq.size()));
  }
  if (num_params() == 0) throw Error(ErrorCode::InvalidArgument, "library has no active terms");
}

FeatureLibrary FeatureLibrary::shared(int d, std::vector<Feature> features) {
  std::vector<int> all(features.size());
  for (std::size_t j = 0; j < all.size(); ++j) all[j] = static_cast<int>(j);
  return FeatureLibrary(d, std::move(features), std::vector<std::vector<int>>(d, all));
}

bool FeatureLibrary::is_shared() const noexcept {
  for (const auto& eq : terms_) {
    if (static_cast<int>(eq.size()) != num_features()) return false;
    for (int j = 0; j < num_features(); ++j) {
      if (eq[j] != j) return false;
    }
  }
  return true;
}

std::string FeatureLibrary::param_label(int p) const {
  for (int i = 0; i < d_; ++i) {
    if (p < offsets_[i + 1]) {
      return "du" + std::to_string(i + 1) + "/dt: " + features_[terms_[i][p - offsets_[i]]].name;
    }
  }
  throw Error(ErrorCode::InvalidArgument, "parameter index out of range");
}

Matrix FeatureLibrary::theta(const Matrix& U) const {
  if (U.cols() != d_) throw Error(ErrorCode::DimensionMismatch, "state matrix has wrong column count");
  const Eigen::Index n = U.rows();
  Matrix out(n, num_features());
  Vector row(d_);
  for (Eigen::Index m = 0; m < n; ++m) {
    row = U.row(m).transpose();
    const StateView u(row.data(), static_cast<std::size_t>(d_));
    for (int j = 0; j < num_features(); ++j) out(m, j) = features_[j].f(u);
  }
  return out;
}

std::vector<Matrix> FeatureLibrary::theta_grad(const Matrix& U) const {
  if (U.cols() != d_) throw Error(ErrorCode::DimensionMismatch, "state matrix has wrong column count");
  const Eigen::Index n = U.rows();
  std::vector<Matrix> out(num_features(), Matrix(n, d_));
  Vector row(d_);
  Vector g(d_);
  for (Eigen::Index m = 0; m < n; ++m) {
    row = U.row(m).transpose();
    const StateView u(row.data(), static_cast<std::size_t>(d_));
    for (int j = 0; j < num_features(); ++j) {
      g.setZero();
      features_[j].grad(u, GradientOut(g.data(), static_cast<std::size_t>(d_)));
      out[j].row(m) = g.transpose();
    }
  }
  return out;
}

Matrix FeatureLibrary::coefficients(const Vector& w) const {
  if (w.size() != num_params()) {
    throw Error(ErrorCode::DimensionMismatch, "parameter vector length does not match the library");
  }
  Matrix W = Matrix::Zero(num_features(), d_);
  for (int i = 0; i < d_; ++i) {
    for (std::size_t k = 0; k < terms_[i].size(); ++k) {
      W(terms_[i][k], i) += w[offsets_[i] + static_cast<int>(k)];
    }
  }
  return W;
}

Vector FeatureLibrary::params_from(const Matrix& W) const {
  if (W.rows() != num_features() || W.cols() != d_) {
    throw Error(ErrorCode::DimensionMismatch, "coefficient matrix has the wrong shape");
  }
  Vector w(num_params());
  for (int i = 0; i < d_; ++i) {
    for (std::size_t k = 0; k < terms_[i].size(); ++k) {
      w[offsets_[i] + static_cast<int>(k)] = W(terms_[i][k], i);
    }
  }
  return w;
}

FeatureLibrary FeatureLibrary::masked(const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>& mask) const {
  if (mask.rows() != num_features() || mask.cols() != d_) {
    throw Error(ErrorCode::DimensionMismatch, "feature mask must be J x d");
  }
  std::vector<std::vector<int>> terms(d_);
  for (int i = 0; i < d_; ++i) {
    for (int j : terms_[i]) {
      if (mask(j, i)) terms[i].push_back(j);
    }
  }
  return FeatureLibrary(d_, features_, std::move(terms));
}

Matrix mat(const Vector& w, int J, int d) {
  if (w.size() != static_cast<Eigen::Index>(J) * d) {
    throw Error(ErrorCode::DimensionMismatch, "mat: length is not J*d");
  }
  return Eigen::Map<const Matrix>(w.data(), J, d);
}

Vector vec(const Matrix& W) { return Eigen::Map<const Vector>(W.data(), W.size()); }

void validate_dataset(const Dataset& ds, const FeatureLibrary& lib) {
  if (ds.U.cols() != lib.dim()) {
    std::ostringstream os;
    os << "library expects d=" << lib.dim() << " states but data has " << ds.U.cols() << " columns";
    throw Error(ErrorCode::DimensionMismatch, os.str());
  }
  if (!ds.U.allFinite()) throw Error(ErrorCode::NonFiniteData, "data contains non-finite entries");
  const Matrix th = lib.theta(ds.U);
  for (Eigen::Index m = 0; m < th.rows(); ++m) {
    for (Eigen::Index j = 0; j < th.cols(); ++j) {
      if (!std::isfinite(th(m, j))) {
        std::ostringstream os;
        os << "feature '" << lib.feature(static_cast<int>(j)).name << "' is not finite at sample " << m;
        throw Error(ErrorCode::DomainViolation, os.str());
      }
    }
  }
}

}  // namespace wendy
