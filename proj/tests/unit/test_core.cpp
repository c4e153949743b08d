#include <gtest/gtest.h>

#include "helpers.hpp"
#include "wendy/estimator.hpp"
#include "wendy/library_spec.hpp"
#include "wendy/models.hpp"

using namespace wendy;
using namespace wendy::testing;

TEST(TimeGrid, OverSpansInterval) {
  const TimeGrid g = TimeGrid::over(0.0, 10.0, 512);
  EXPECT_EQ(g.num_samples(), 513);
  EXPECT_DOUBLE_EQ(g.dt(), 10.0 / 512);
  EXPECT_DOUBLE_EQ(g.T(), 10.0);
  EXPECT_DOUBLE_EQ(g.times()(512), 10.0);
}

TEST(TimeGrid, RejectsBadInput) {
  EXPECT_WENDY_ERROR(TimeGrid(0.0, 0.0, 10), ErrorCode::InvalidArgument);
  EXPECT_WENDY_ERROR(TimeGrid(0.0, 0.1, 2), ErrorCode::InvalidArgument);
}

TEST(Dataset, RowCountMustMatchGrid) {
  EXPECT_WENDY_ERROR(Dataset(TimeGrid::over(0, 1, 10), Matrix::Zero(10, 1)), ErrorCode::DimensionMismatch);
}

TEST(VecMat, RoundTrip) {
  for (int seed = 0; seed < 20; ++seed) {
    const int J = 1 + seed % 5;
    const int d = 1 + seed % 3;
    const Vector w = gaussian_matrix(J * d, 1, seed);
    const Vector back = vec(mat(w, J, d));
    ASSERT_EQ(back.size(), w.size());
    for (int i = 0; i < w.size(); ++i) EXPECT_EQ(back(i), w(i));
  }
}

TEST(VecMat, ColumnMajorLayout) {
  Vector w(6);
  w << 1, 2, 3, 4, 5, 6;
  const Matrix W = mat(w, 3, 2);
  EXPECT_EQ(W(0, 0), 1);
  EXPECT_EQ(W(2, 0), 3);
  EXPECT_EQ(W(0, 1), 4);
  EXPECT_EQ(W(2, 1), 6);
}

TEST(VecTransposePermutation, MapsVecToVecOfTranspose) {
  for (auto [r, c] : {std::pair{5, 2}, std::pair{1, 4}, std::pair{7, 3}, std::pair{3, 3}}) {
    const Matrix E = gaussian_matrix(r, c, 11 * r + c);
    const auto P = vec_transpose_permutation(r, c);
    const Matrix Et = E.transpose();
    const Vector lhs = P * vec(E);
    const Vector rhs = vec(Et);
    ASSERT_EQ(lhs.size(), rhs.size());
    for (int i = 0; i < lhs.size(); ++i) EXPECT_EQ(lhs(i), rhs(i));

    const Matrix D = P.toDenseMatrix().cast<double>();
    for (int i = 0; i < D.rows(); ++i) {
      EXPECT_EQ(D.row(i).sum(), 1.0);
      EXPECT_EQ(D.col(i).sum(), 1.0);
      EXPECT_EQ((D.row(i).array() == 0.0).count(), D.cols() - 1);
    }
  }
}

TEST(FeatureLibrary, SharedLayoutAndCoefficients) {
  const FeatureLibrary lib = FeatureLibrary::shared(2, {monomial({1, 0}), monomial({1, 1}), monomial({0, 1})});
  EXPECT_TRUE(lib.is_shared());
  EXPECT_EQ(lib.num_params(), 6);
  Vector w(6);
  w << 1, 2, 3, 4, 5, 6;
  const Matrix W = lib.coefficients(w);
  EXPECT_TRUE(W.isApprox(mat(w, 3, 2)));
  EXPECT_TRUE(lib.params_from(W).isApprox(w));
  EXPECT_EQ(lib.param_label(4), "du2/dt: u1*u2");
}

TEST(FeatureLibrary, PerEquationTermsZeroFillAbsentCoefficients) {
  const ModelSpec lv = catalog("lotka_volterra");
  const FeatureLibrary& lib = lv.lib;
  EXPECT_FALSE(lib.is_shared());
  EXPECT_EQ(lib.num_params(), 4);
  const Matrix W = lib.coefficients(lv.w_star);
  EXPECT_EQ(W.rows(), lib.num_features());
  // each column holds exactly the two active coefficients
  for (int i = 0; i < 2; ++i) EXPECT_EQ((W.col(i).array() != 0.0).count(), 2);
  EXPECT_TRUE(lib.params_from(W).isApprox(lv.w_star));
}

TEST(FeatureLibrary, MaskedDropsTerms) {
  const FeatureLibrary full = FeatureLibrary::shared(2, {monomial({1, 0}), monomial({0, 1})});
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> mask(2, 2);
  mask << true, false, false, true;
  const FeatureLibrary m = full.masked(mask);
  EXPECT_EQ(m.num_params(), 2);
  EXPECT_EQ(m.terms(0), std::vector<int>{0});
  EXPECT_EQ(m.terms(1), std::vector<int>{1});
}

TEST(FeatureLibrary, ThetaMatchesDirectEvaluation) {
  const FeatureLibrary lib = library_from_terms(2, {{"u1", "u1*u2^2"}, {"1", "u2"}});
  const Matrix U = gaussian_matrix(7, 2, 3);
  const Matrix Th = lib.theta(U);
  ASSERT_EQ(Th.cols(), lib.num_features());
  for (int m = 0; m < 7; ++m) {
    const double u1 = U(m, 0), u2 = U(m, 1);
    for (int j = 0; j < lib.num_features(); ++j) {
      const std::string& n = lib.feature(j).name;
      double want = 0.0;
      if (n == "u1") want = u1;
      else if (n == "u1*u2^2") want = u1 * u2 * u2;
      else if (n == "1") want = 1.0;
      else if (n == "u2") want = u2;
      else FAIL() << n;
      EXPECT_NEAR(Th(m, j), want, 1e-14);
    }
  }
}

TEST(ValidateDataset, ConsistentLogisticPasses) {
  const Dataset ds = dataset_from(TimeGrid::over(0, 10, 64), [](double t, int) { return logistic_exact(t, 0.01); }, 1);
  EXPECT_NO_THROW(validate_dataset(ds, logistic_library()));
}

TEST(ValidateDataset, DimensionMismatch) {
  const Dataset ds(TimeGrid::over(0, 1, 8), Matrix::Ones(9, 1));
  EXPECT_WENDY_ERROR(validate_dataset(ds, catalog("lv").lib), ErrorCode::DimensionMismatch);
}

TEST(ValidateDataset, PtbDenominatorZero) {
  Matrix U = Matrix::Constant(9, 5, 0.5);
  U(4, 4) = -0.3;
  const Dataset ds(TimeGrid::over(0, 1, 8), U);
  EXPECT_WENDY_ERROR(validate_dataset(ds, catalog("ptb").lib), ErrorCode::DomainViolation);
}

TEST(ValidateDataset, NonFinite) {
  Matrix U = Matrix::Ones(9, 1);
  U(3, 0) = std::nan("");
  EXPECT_WENDY_ERROR(validate_dataset(Dataset(TimeGrid::over(0, 1, 8), U), logistic_library()),
                     ErrorCode::NonFiniteData);
}
