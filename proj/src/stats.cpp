#include "wendy/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <boost/math/distributions/normal.hpp>

namespace wendy::stats {

namespace {

// c[0] + c[1] x + c[2] x^2 + ...
template <std::size_t N>
double poly(const double (&c)[N], double x) {
  double r = 0.0;
  for (std::size_t i = N; i-- > 0;) r = r * x + c[i];
  return r;
}

}  // namespace

double normal_quantile(double p) {
  static const boost::math::normal_distribution<double> nd;
  return boost::math::quantile(nd, p);
}

double normal_cdf(double z) {
  static const boost::math::normal_distribution<double> nd;
  return boost::math::cdf(nd, z);
}

SWResult shapiro_wilk(std::span<const double> sample) {
  const std::size_t n = sample.size();
  if (n < 3) throw Error(ErrorCode::SampleTooSmall, "Shapiro-Wilk needs at least 3 observations");
  if (n > 5000) throw Error(ErrorCode::SampleTooLarge, "Shapiro-Wilk approximation is limited to n <= 5000");

  std::vector<double> x(sample.begin(), sample.end());
  for (double v : x) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteData, "Shapiro-Wilk sample is not finite");
  }
  std::sort(x.begin(), x.end());
  const double range = x.back() - x.front();
  const double scale = std::max(std::abs(x.front()), std::abs(x.back()));
  if (!(range > 1e-12 * scale) || range == 0.0) {
    throw Error(ErrorCode::DegenerateSample, "Shapiro-Wilk sample has zero variance");
  }

  constexpr double c1[] = {0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056};
  constexpr double c2[] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
  constexpr double c3[] = {0.544, -0.39978, 0.025054, -6.714e-4};
  constexpr double c4[] = {1.3822, -0.77857, 0.062767, -0.0020322};
  constexpr double c5[] = {-1.5861, -0.31082, -0.083751, 0.0038915};
  constexpr double c6[] = {-0.4803, -0.082676, 0.0030302};
  constexpr double g[] = {-2.273, 0.459};

  const std::size_t half = n / 2;
  const double an = static_cast<double>(n);
  std::vector<double> a(half);
  if (n == 3) {
    a[0] = std::sqrt(0.5);
  } else {
    std::vector<double> m(half);
    double summ2 = 0.0;
    for (std::size_t i = 0; i < half; ++i) {
      m[i] = normal_quantile((static_cast<double>(i + 1) - 0.375) / (an + 0.25));
      summ2 += m[i] * m[i];
    }
    summ2 *= 2.0;
    const double ssumm2 = std::sqrt(summ2);
    const double rsn = 1.0 / std::sqrt(an);
    const double a1 = poly(c1, rsn) - m[0] / ssumm2;
    std::size_t first_tail;
    double fac;
    if (n > 5) {
      const double a2 = -m[1] / ssumm2 + poly(c2, rsn);
      fac = std::sqrt((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
      a[1] = a2;
      first_tail = 2;
    } else {
      fac = std::sqrt((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1));
      first_tail = 1;
    }
    a[0] = a1;
    for (std::size_t i = first_tail; i < half; ++i) a[i] = -m[i] / fac;
  }

  // Work on range-scaled data to keep the sums well conditioned.
  const double mu = std::accumulate(x.begin(), x.end(), 0.0) / an;
  double ss = 0.0;
  for (double v : x) ss += ((v - mu) / range) * ((v - mu) / range);
  double b = 0.0;
  for (std::size_t i = 0; i < half; ++i) b += a[i] * (x[n - 1 - i] - x[i]) / range;
  double w = std::min(1.0, b * b / ss);
  const double w1 = 1.0 - w;

  SWResult res;
  res.W = w;
  if (n == 3) {
    constexpr double pi6 = 1.90985931710274;   // 6 / pi
    constexpr double stqr = 1.04719755119660;  // pi / 3
    res.p = std::clamp(pi6 * (std::asin(std::sqrt(w)) - stqr), 0.0, 1.0);
    return res;
  }
  if (w1 <= 0.0) {
    res.p = 1.0;
    return res;
  }
  double y = std::log(w1);
  double mean_y;
  double sd_y;
  if (n <= 11) {
    const double gamma = poly(g, an);
    if (y >= gamma) {
      res.p = 1e-99;
      return res;
    }
    y = -std::log(gamma - y);
    mean_y = poly(c3, an);
    sd_y = std::exp(poly(c4, an));
  } else {
    const double xx = std::log(an);
    mean_y = poly(c5, xx);
    sd_y = std::exp(poly(c6, xx));
  }
  res.p = std::clamp(1.0 - normal_cdf((y - mean_y) / sd_y), 0.0, 1.0);
  return res;
}

Vector fd_weights(int order, std::span<const double> stencil, double center) {
  const int n = static_cast<int>(stencil.size());
  if (order < 0 || order >= n) {
    throw Error(ErrorCode::InvalidArgument, "derivative order must be below the stencil size");
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (stencil[i] == stencil[j]) throw Error(ErrorCode::InvalidArgument, "stencil nodes must be distinct");
    }
  }
  Matrix c = Matrix::Zero(n, order + 1);
  double c1 = 1.0;
  double c4 = stencil[0] - center;
  c(0, 0) = 1.0;
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, order);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = stencil[i] - center;
    for (int j = 0; j < i; ++j) {
      const double c3 = stencil[i] - stencil[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) c(i, k) = c1 * (k * c(i - 1, k - 1) - c5 * c(i - 1, k)) / c2;
        c(i, 0) = -c1 * c5 * c(i - 1, 0) / c2;
      }
      for (int k = mn; k >= 1; --k) c(j, k) = (c4 * c(j, k) - k * c(j, k - 1)) / c3;
      c(j, 0) = c4 * c(j, 0) / c3;
    }
    c1 = c2;
  }
  return c.col(order);
}

double two_segment_sse(std::span<const double> x, std::span<const double> y, int k) {
  auto line_sse = [&](std::size_t lo, std::size_t hi) {
    const double cnt = static_cast<double>(hi - lo);
    double mx = 0.0, my = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      mx += x[i];
      my += y[i];
    }
    mx /= cnt;
    my /= cnt;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      const double dx = x[i] - mx, dy = y[i] - my;
      sxx += dx * dx;
      sxy += dx * dy;
      syy += dy * dy;
    }
    const double sse = sxx > 0.0 ? syy - sxy * sxy / sxx : syy;
    return std::max(sse, 0.0);
  };
  const auto split = static_cast<std::size_t>(k);
  return line_sse(0, split) + line_sse(split, y.size());
}

int changepoint(std::span<const double> x, std::span<const double> y) {
  const int n = static_cast<int>(y.size());
  if (n < 4) throw Error(ErrorCode::SeriesTooShort, "changepoint needs at least 4 points");
  if (x.size() != y.size()) throw Error(ErrorCode::DimensionMismatch, "changepoint abscissa length mismatch");
  double my = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(y[i]) || !std::isfinite(x[i])) {
      throw Error(ErrorCode::NonFiniteData, "changepoint series must be finite");
    }
    my += y[i];
  }
  my /= n;
  double total = 0.0;
  for (int i = 0; i < n; ++i) total += (y[i] - my) * (y[i] - my);
  const double tol = 1e-12 * total + std::numeric_limits<double>::min();

  std::vector<double> sse(n, std::numeric_limits<double>::infinity());
  double best = std::numeric_limits<double>::infinity();
  for (int k = 2; k <= n - 2; ++k) {
    sse[k] = two_segment_sse(x, y, k);
    best = std::min(best, sse[k]);
  }
  for (int k = 2; k <= n - 2; ++k) {
    if (sse[k] <= best + tol) return k;
  }
  return 2;
}

int changepoint(std::span<const double> series) {
  std::vector<double> x(series.size());
  std::iota(x.begin(), x.end(), 0.0);
  return changepoint(x, series);
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

double mean(std::span<const double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace wendy::stats
