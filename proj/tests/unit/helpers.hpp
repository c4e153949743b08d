#pragma once

#include <cmath>
#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "wendy/core.hpp"
#include "wendy/library_spec.hpp"

namespace wendy::testing {

// u' = a u + b u^2 from u(0) = u0, closed form
inline double logistic_exact(double t, double u0, double a = 1.0, double b = -1.0) {
  const double K = -a / b;
  const double e = std::exp(a * t);
  return K * u0 * e / (K + u0 * (e - 1.0));
}

inline Dataset dataset_from(const TimeGrid& g, const std::function<double(double, int)>& u, int d) {
  Matrix U(g.num_samples(), d);
  for (int m = 0; m < g.num_samples(); ++m) {
    for (int i = 0; i < d; ++i) U(m, i) = u(g.t(m), i);
  }
  return Dataset(g, U);
}

inline Matrix gaussian_matrix(int rows, int cols, std::uint64_t seed, double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, sd);
  Matrix A(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) A(i, j) = nd(rng);
  }
  return A;
}

inline FeatureLibrary logistic_library() { return library_from_terms(1, {{"u1", "u1^2"}}); }

#define EXPECT_WENDY_ERROR(stmt, expected_code)                            \
  do {                                                                     \
    bool thrown_ = false;                                                  \
    try {                                                                  \
      (void)(stmt);                                                        \
    } catch (const ::wendy::Error& e_) {                                   \
      thrown_ = true;                                                      \
      EXPECT_EQ(::wendy::to_string(e_.code()), ::wendy::to_string(expected_code)) << e_.what(); \
    }                                                                      \
    EXPECT_TRUE(thrown_) << "expected " << ::wendy::to_string(expected_code); \
  } while (0)

}  // namespace wendy::testing
