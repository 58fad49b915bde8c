#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace toralmix {

using cplx = std::complex<double>;

inline constexpr double two_pi = 2.0 * std::numbers::pi;

// Error taxonomy.  Everything derives from std::runtime_error so callers that
// do not care can catch one type.
struct domain_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct escape_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct markov_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct fit_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct symmetry_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct regime_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct convergence_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Interval {
  double lo = 0.0;
  double hi = 1.0;

  double length() const { return hi - lo; }
  bool contains(double x) const { return x >= lo && x < hi; }
  double mid() const { return 0.5 * (lo + hi); }
};

// Representative in [0, 2pi).
template <class T>
T wrap_angle(T a) {
  const T tp = T(2) * std::numbers::pi_v<T>;
  T r = std::fmod(a, tp);
  if (r < 0) r += tp;
  if (r >= tp) r -= tp;
  return r;
}

template <class T>
T circular_distance(T a, T b) {
  const T r = wrap_angle(a - b);
  return std::min(r, T(2) * std::numbers::pi_v<T> - r);
}

inline double torus_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, circular_distance(a[i], b[i]));
  return d;
}

// Neumaier compensated sum.
template <class T>
class CompensatedSum {
 public:
  void add(T x) {
    const T t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      c_ += (sum_ - t) + x;
    else
      c_ += (x - t) + sum_;
    sum_ = t;
  }
  T value() const { return sum_ + c_; }

 private:
  T sum_{};
  T c_{};
};

// Gauss-Legendre nodes/weights on [-1,1], Newton on P_n.
inline const std::pair<std::vector<double>, std::vector<double>>& gauss_legendre(int n) {
  static thread_local std::vector<std::pair<std::vector<double>, std::vector<double>>> cache(33);
  if (n < 1 || n > 32) throw std::invalid_argument("gauss_legendre: order must be in [1,32]");
  auto& slot = cache[n];
  if (!slot.first.empty()) return slot;
  std::vector<double> x(n), w(n);
  for (int i = 0; i < n; ++i) {
    long double z = std::cos(std::numbers::pi_v<long double> * (i + 0.75L) / (n + 0.5L));
    long double dp = 0;
    for (int it = 0; it < 100; ++it) {
      long double p0 = 1, p1 = z;
      for (int k = 2; k <= n; ++k) {
        long double p2 = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1);
      long double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-19L) break;
    }
    long double p0 = 1, p1 = z;
    for (int k = 2; k <= n; ++k) {
      long double p2 = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (z * p1 - p0) / (z * z - 1);
    x[n - 1 - i] = static_cast<double>(z);
    w[n - 1 - i] = static_cast<double>(2 / ((1 - z * z) * dp * dp));
  }
  slot = {std::move(x), std::move(w)};
  return slot;
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;
  std::vector<double> residuals;
};

inline LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw fit_error("linear_fit: need at least two paired points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) mx += x[i], my += y[i];
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0, scale = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
    scale += x[i] * x[i];
  }
  if (!(sxx > 1e-24 * scale)) throw fit_error("linear_fit: degenerate abscissae (zero variance)");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.points = n;
  double ssr = 0;
  f.residuals.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    f.residuals[i] = y[i] - (f.intercept + f.slope * x[i]);
    ssr += f.residuals[i] * f.residuals[i];
  }
  f.r2 = syy > 0 ? 1.0 - ssr / syy : 1.0;
  return f;
}

// Inclusive window in abscissa units.
struct Window {
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
};

inline LinearFit loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys, Window window = {}) {
  if (xs.size() != ys.size()) throw fit_error("loglog_slope: xs and ys differ in length");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i] < window.lo || xs[i] > window.hi) continue;
    if (!(xs[i] > 0) || !(ys[i] > 0) || !std::isfinite(ys[i]))
      throw fit_error("loglog_slope: nonpositive or non-finite value at x=" + std::to_string(xs[i]));
    lx.push_back(std::log(xs[i]));
    ly.push_back(std::log(ys[i]));
  }
  if (lx.size() < 8) throw fit_error("loglog_slope: fewer than 8 points in window");
  return linear_fit(lx, ly);
}

// sup_{j>=i} |y_j|; turns an oscillating sequence into a monotone envelope.
inline std::vector<double> upper_envelope(const std::vector<double>& y) {
  std::vector<double> e(y.size());
  double run = 0.0;
  for (std::size_t i = y.size(); i-- > 0;) {
    run = std::max(run, std::abs(y[i]));
    e[i] = run;
  }
  return e;
}

inline double d_beta(double beta) {
  if (beta > 0 && beta < 1) return std::sin(beta * std::numbers::pi) / std::numbers::pi;
  if (beta == 1) return 1.0;
  throw regime_error("d_beta: defined for beta in (0,1]");
}

}  // namespace toralmix
