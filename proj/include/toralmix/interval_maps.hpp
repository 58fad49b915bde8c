#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "core.hpp"

namespace toralmix {

enum class MapFamily { LSV, Thaler, Doubling };

inline std::string family_name(MapFamily f) {
  switch (f) {
    case MapFamily::LSV: return "lsv";
    case MapFamily::Thaler: return "thaler";
    case MapFamily::Doubling: return "doubling";
  }
  return "?";
}

struct Branch {
  int id = 0;
  Interval domain;
  double image_lo = 0.0;
  double image_hi = 1.0;
  bool full = true;
};

// Piecewise increasing map of [0,1).  Immutable after construction.
class IntermittentMap {
 public:
  static IntermittentMap lsv(double gamma, double c1 = 2.0) {
    if (!(gamma > 0)) throw domain_error("lsv: gamma must be positive");
    if (!(c1 > 0 && c1 <= 2)) throw domain_error("lsv: c1 must lie in (0,2]");
    IntermittentMap m(MapFamily::LSV, gamma);
    m.c1_ = c1;
    m.c1g_ = std::pow(c1, gamma);
    const double top = 0.5 * (1.0 + std::pow(0.5 * c1, gamma));
    m.branches_.push_back({0, {0.0, 0.5}, 0.0, top, top >= 1.0});
    m.branches_.push_back({1, {0.5, 1.0}, 0.0, 1.0, true});
    return m;
  }

  static IntermittentMap thaler(double gamma, double c2) {
    if (!(gamma > 0)) throw domain_error("thaler: gamma must be positive");
    if (!(c2 > 0)) throw domain_error("thaler: c2 must be positive");
    IntermittentMap m(MapFamily::Thaler, gamma);
    m.c2_ = c2;
    const double total = 1.0 + c2;
    const int nb = static_cast<int>(std::ceil(total - 1e-12));
    double lo = 0.0;
    for (int j = 0; j < nb; ++j) {
      double hi = 1.0;
      if (j + 1 < nb) hi = m.thaler_level(j + 1.0);
      const bool full = (j + 1 < nb) || std::abs(total - nb) < 1e-12;
      const double img_hi = full ? 1.0 : total - j;
      m.branches_.push_back({j, {lo, hi}, 0.0, img_hi, full});
      lo = hi;
    }
    return m;
  }

  static IntermittentMap doubling() {
    IntermittentMap m(MapFamily::Doubling, 0.0);
    m.branches_.push_back({0, {0.0, 0.5}, 0.0, 1.0, true});
    m.branches_.push_back({1, {0.5, 1.0}, 0.0, 1.0, true});
    return m;
  }

  MapFamily family() const { return family_; }
  std::string name() const { return family_name(family_); }
  double gamma() const { return gamma_; }
  double c1() const { return c1_; }
  double c2() const { return c2_; }
  double beta() const {
    return family_ == MapFamily::Doubling ? std::numeric_limits<double>::infinity() : 1.0 / gamma_;
  }
  const std::vector<Branch>& branches() const { return branches_; }
  int branch_count() const { return static_cast<int>(branches_.size()); }

  bool is_markov() const {
    for (const auto& b : branches_)
      if (!b.full) return false;
    return true;
  }

  // Right-most branch; its domain is the default inducing set.
  int inducing_branch() const { return branch_count() - 1; }

  int branch_of(double x) const {
    if (!(x >= 0.0 && x < 1.0)) throw domain_error("point outside [0,1): " + std::to_string(x));
    for (const auto& b : branches_)
      if (x < b.domain.hi) return b.id;
    return branch_count() - 1;
  }

  template <class T>
  T evaluate_on(int b, T x) const {
    switch (family_) {
      case MapFamily::LSV:
        if (b == 0) return x + T(c1g_) * std::pow(x, T(gamma_) + 1);
        return 2 * x - 1;
      case MapFamily::Thaler:
        return x + T(c2_) * std::pow(x, T(gamma_) + 1) - T(b);
      case MapFamily::Doubling:
        return 2 * x - T(b);
    }
    return x;
  }

  template <class T>
  T derivative_on(int b, T x) const {
    switch (family_) {
      case MapFamily::LSV:
        if (b == 0) return 1 + (T(gamma_) + 1) * T(c1g_) * std::pow(x, T(gamma_));
        return T(2);
      case MapFamily::Thaler:
        return 1 + T(c2_) * (T(gamma_) + 1) * std::pow(x, T(gamma_));
      case MapFamily::Doubling:
        return T(2);
    }
    return T(1);
  }

  template <class T = double>
  T evaluate(T x) const {
    const int b = branch_of(static_cast<double>(x));
    T y = evaluate_on(b, x);
    // the partial last branch of a non-integer Thaler map still reduces mod 1
    if (y >= 1) y -= std::floor(y);
    if (y < 0) y = 0;
    return y;
  }

  double derivative(double x) const {
    const int b = branch_of(x);
    if (x == branches_[b].domain.lo)
      throw domain_error("derivative requested at branch boundary x=" + std::to_string(x) +
                         "; use derivative_on with an explicit branch");
    return derivative_on(b, x);
  }

  // Unique x in branch b with f(x)=y.  Safeguarded Newton on the branch bracket.
  template <class T = double>
  T branch_inverse(int b, T y) const {
    if (b < 0 || b >= branch_count()) throw domain_error("branch id out of range");
    const Branch& br = branches_[b];
    const T slack = T(64) * std::numeric_limits<T>::epsilon();
    if (y < T(br.image_lo) - slack || y > T(br.image_hi) + slack)
      throw domain_error("branch_inverse: y=" + std::to_string(static_cast<double>(y)) +
                         " outside image of branch " + std::to_string(b));
    if (family_ == MapFamily::Doubling || (family_ == MapFamily::LSV && b == 1)) return (y + T(b)) / 2;
    T lo = T(br.domain.lo), hi = T(br.domain.hi);
    if (y <= T(br.image_lo)) return lo;
    // f(x) >= x + const on these branches, so y + b is an upper guess
    T x = std::min(hi, std::max(lo, y + T(family_ == MapFamily::Thaler ? b : 0)));
    if (family_ == MapFamily::Thaler && x >= hi) x = (lo + hi) / 2;
    const T tol = T(4) * std::numeric_limits<T>::epsilon();
    for (int it = 0; it < 300; ++it) {
      const T g = evaluate_on(b, x) - y;
      if (g == 0) return x;
      if (g > 0)
        hi = x;
      else
        lo = x;
      T xn = x - g / derivative_on(b, x);
      if (!(xn > lo && xn < hi)) xn = (lo + hi) / 2;
      const T step = std::abs(xn - x);
      x = xn;
      if (step <= tol * std::abs(x) || hi - lo <= tol * std::abs(hi)) break;
    }
    return x;
  }

  std::vector<double> orbit(double x0, std::size_t n) const {
    std::vector<double> out;
    out.reserve(n + 1);
    out.push_back(x0);
    if (!(x0 >= 0.0 && x0 < 1.0)) throw domain_error("orbit: x0 outside [0,1)");
    for (std::size_t i = 0; i < n; ++i) out.push_back(evaluate(out.back()));
    return out;
  }

 private:
  IntermittentMap(MapFamily f, double gamma) : family_(f), gamma_(gamma) {}

  double thaler_level(double level) const {
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid + c2_ * std::pow(mid, gamma_ + 1) < level)
        lo = mid;
      else
        hi = mid;
    }
    return 0.5 * (lo + hi);
  }

  MapFamily family_;
  double gamma_ = 0.0;
  double c1_ = 2.0;
  double c1g_ = 1.0;
  double c2_ = 1.0;
  std::vector<Branch> branches_;
};

}  // namespace toralmix
