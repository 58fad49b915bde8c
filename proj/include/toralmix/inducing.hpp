#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "core.hpp"
#include "interval_maps.hpp"

namespace toralmix {

struct Cylinder {
  std::size_t id = 0;
  int phi = 1;
  std::vector<int> itinerary;  // branch of f^l z, l = 0..phi-1
  double a = 0.0, b = 0.0;     // z-interval inside Y
  double ua = 0.0, ub = 0.0;   // same interval after one application of f
  double length = 0.0;
  std::ptrdiff_t parent = -1;

  double mid() const { return 0.5 * (a + b); }
};

struct SymbolicMetric {
  double theta = 0.75;
  double epsilon = 0.5;
  double distance(int separation) const { return std::pow(theta, separation); }
};

struct SchemeOptions {
  int phi_max = 4096;
  double theta = 0.75;
  double epsilon = 0.5;
  // Only used when several non-inducing branches make the cylinder tree branch.
  double prune_length = 1e-13;
  std::size_t max_cylinders = 4'000'000;
};

struct FirstReturn {
  int tau = 0;
  double image = 0.0;
};

template <class T>
struct Pullback {
  T u{};      // f(z)
  T z{};      // point in the cylinder
  T log_dG{}; // log G'(z)
};

// First-return scheme on Y = domain of the right-most branch.
class InducingScheme {
 public:
  InducingScheme(IntermittentMap map, SchemeOptions opt = {}) : map_(std::move(map)), opt_(opt) {
    if (opt_.phi_max < 1) throw domain_error("phi_max must be >= 1");
    if (!(opt_.theta > 0 && opt_.theta < 1)) throw domain_error("theta must lie in (0,1)");
    yb_ = map_.inducing_branch();
    Y_ = map_.branches()[yb_].domain;
    for (const auto& br : map_.branches())
      if (br.id != yb_) others_.push_back(br.id);
    if (!map_.is_markov())
      throw markov_error("inducing scheme requires a Markov parameter choice (" + map_.name() +
                         "): cylinder endpoints would not align with branch boundaries");
    build();
    const double lambda_min = min_expansion();
    const double admissible = std::pow(lambda_min, -opt_.epsilon);
    if (opt_.theta < admissible)
      warnings_.push_back("theta=" + std::to_string(opt_.theta) + " below lambda^-eps=" + std::to_string(admissible));
  }

  const IntermittentMap& map() const { return map_; }
  Interval Y() const { return Y_; }
  int y_branch() const { return yb_; }
  int phi_max() const { return opt_.phi_max; }
  int rho() const { return 1; }
  const SchemeOptions& options() const { return opt_; }
  SymbolicMetric metric() const { return {opt_.theta, opt_.epsilon}; }
  const std::vector<Cylinder>& cylinders() const { return cyl_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  // Cylinders with phi = n occupy [level_begin(n), level_begin(n+1)).
  std::size_t level_begin(int n) const { return level_start_.at(n - 1); }
  std::size_t level_end(int n) const { return level_start_.at(n); }

  // Level phi_max+1 cylinders and pruned cylinders.
  const std::vector<Cylinder>& frontier() const { return frontier_; }
  // z-length of {phi > phi_max} plus everything below pruned cylinders
  double truncated_length() const { return truncated_; }

  template <class T>
  T z_of_u(T u) const { return map_.template branch_inverse<T>(yb_, u); }
  template <class T>
  T u_of_z(T z) const { return map_.template evaluate_on<T>(yb_, z); }

  // Lebesgue length of the z-set whose f-image is [ua,ub].
  double z_length(double ua, double ub) const {
    const auto& gl = gauss_legendre(8);
    const double c = 0.5 * (ua + ub), h = 0.5 * (ub - ua);
    CompensatedSum<double> s;
    for (std::size_t q = 0; q < gl.first.size(); ++q) {
      const double u = c + h * gl.first[q];
      s.add(gl.second[q] / map_.derivative_on(yb_, z_of_u(u)));
    }
    return h * s.value();
  }

  // Point of cylinder c whose G-image is y, with log G' there.
  template <class T>
  Pullback<T> pull(const Cylinder& c, T y) const {
    T u = y;
    T logd = 0;
    for (int r = c.phi - 1; r >= 1; --r) {
      u = map_.template branch_inverse<T>(c.itinerary[r], u);
      logd += std::log(map_.template derivative_on<T>(c.itinerary[r], u));
    }
    Pullback<T> p;
    p.u = u;
    p.z = z_of_u(u);
    p.log_dG = logd + std::log(map_.template derivative_on<T>(yb_, p.z));
    return p;
  }

  // G on Y via one inducing step, precision kept through the u coordinate.
  template <class T>
  T induced_image(const Cylinder& c, T z) const {
    T x = u_of_z(z);
    for (int r = 1; r < c.phi; ++r) x = map_.template evaluate_on<T>(c.itinerary[r], x);
    return x;
  }

  FirstReturn first_return(double x, int cap) const {
    if (!Y_.contains(x)) throw domain_error("first_return: point not in Y");
    double y = x;
    for (int n = 1; n <= cap; ++n) {
      y = map_.evaluate(y);
      if (Y_.contains(y)) return {n, y};
    }
    throw escape_error("first_return: no return to Y within " + std::to_string(cap) + " iterations");
  }

  // Index of the cylinder containing z, or -1 when phi(z) > phi_max.
  std::ptrdiff_t locate(double z) const {
    if (!Y_.contains(z)) throw domain_error("locate: point not in Y");
    double x = u_of_z(z);
    std::vector<int> word{yb_};
    for (int n = 1; n <= opt_.phi_max; ++n) {
      if (Y_.contains(x)) {
        if (n == 1) return static_cast<std::ptrdiff_t>(level_begin(1));
        if (level_end(n) - level_begin(n) == 1) return static_cast<std::ptrdiff_t>(level_begin(n));
        auto it = index_.find(word);
        return it == index_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
      }
      const int b = map_.branch_of(x);
      word.push_back(b);
      x = map_.evaluate_on(b, x);
      if (x >= 1.0) x = std::nextafter(1.0, 0.0);
    }
    return -1;
  }

  int phi_gcd() const {
    int g = 0;
    for (int n = 1; n <= opt_.phi_max; ++n)
      if (level_end(n) > level_begin(n)) g = std::gcd(g, n);
    return g;
  }

  // Smallest derivative of G over the built cylinders (midpoints and ends).
  double min_expansion() const {
    double lam = std::numeric_limits<double>::infinity();
    for (const auto& c : cyl_) {
      if (c.phi > 64) break;
      for (double y : {Y_.lo, Y_.mid(), std::nextafter(Y_.hi, Y_.lo)})
        lam = std::min(lam, std::exp(pull<double>(c, y).log_dG));
    }
    return lam;
  }

 private:
  void build() {
    const double span = Y_.length();
    std::vector<std::size_t> current;
    Cylinder root;
    root.id = 0;
    root.phi = 1;
    root.itinerary = {yb_};
    root.ua = Y_.lo;
    root.ub = Y_.hi;
    root.a = z_of_u(root.ua);
    root.b = Y_.hi;
    root.length = z_length(root.ua, root.ub);
    cyl_.push_back(root);
    level_start_ = {0, 1};
    current.push_back(0);
    const bool branching = others_.size() > 1;
    for (int n = 2; n <= opt_.phi_max + 1; ++n) {
      std::vector<std::size_t> next;
      for (std::size_t pi : current) {
        for (int b : others_) {
          Cylinder c;
          const Cylinder& p = cyl_[pi];
          c.phi = n;
          c.ua = map_.branch_inverse(b, p.ua);
          c.ub = map_.branch_inverse(b, p.ub);
          c.length = z_length(c.ua, c.ub);
          c.itinerary.reserve(n);
          c.itinerary.push_back(yb_);
          c.itinerary.push_back(b);
          c.itinerary.insert(c.itinerary.end(), p.itinerary.begin() + 1, p.itinerary.end());
          c.parent = static_cast<std::ptrdiff_t>(pi);
          c.a = z_of_u(c.ua);
          c.b = z_of_u(c.ub);
          if (n > opt_.phi_max || (branching && c.length < opt_.prune_length * span)) {
            frontier_.push_back(std::move(c));
            continue;
          }
          c.id = cyl_.size();
          if (cyl_.size() >= opt_.max_cylinders)
            throw domain_error("cylinder count exceeds max_cylinders; raise prune_length or lower phi_max");
          next.push_back(c.id);
          cyl_.push_back(std::move(c));
        }
      }
      if (n <= opt_.phi_max) level_start_.push_back(cyl_.size());
      current.swap(next);
    }
    if (branching)
      for (const auto& c : cyl_) index_.emplace(c.itinerary, c.id);
    if (!branching) {
      // {phi > N} is a single interval: pull the non-Y branch domain back N-1 times
      const int b = others_.front();
      double lo = map_.branches()[b].domain.lo, hi = map_.branches()[b].domain.hi;
      for (int n = 2; n <= opt_.phi_max; ++n) lo = map_.branch_inverse(b, lo), hi = map_.branch_inverse(b, hi);
      truncated_ = z_length(std::min(lo, hi), std::max(lo, hi));
    } else {
      CompensatedSum<double> acc;
      acc.add(span);
      for (const auto& c : cyl_) acc.add(-c.length);
      truncated_ = std::max(acc.value(), 0.0);
    }
    const double lost = truncated_;
    if (lost > 1e-3 * span)
      warnings_.push_back("truncated Lebesgue fraction " + std::to_string(lost / span) + " of Y beyond phi_max");
  }

  IntermittentMap map_;
  SchemeOptions opt_;
  int yb_ = 0;
  Interval Y_;
  std::vector<int> others_;
  std::vector<Cylinder> cyl_;
  std::vector<std::size_t> level_start_;
  std::vector<Cylinder> frontier_;
  double truncated_ = 0.0;
  std::map<std::vector<int>, std::size_t> index_;
  std::vector<std::string> warnings_;
};

// Distribution of phi under some probability on Y, indexed n = 1..phi_max.
struct ReturnTimeLaw {
  std::vector<double> mass;  // mass[n], mass[0] unused
  double beyond = 0.0;       // P(phi > phi_max)
  std::string weighting = "lebesgue";

  int phi_max() const { return static_cast<int>(mass.size()) - 1; }
};

inline ReturnTimeLaw lebesgue_law(const InducingScheme& s) {
  ReturnTimeLaw law;
  law.mass.assign(s.phi_max() + 1, 0.0);
  const double span = s.Y().length();
  for (const auto& c : s.cylinders()) law.mass[c.phi] += c.length / span;
  law.beyond = s.truncated_length() / span;
  return law;
}

struct TailSequence {
  std::vector<double> n;
  std::vector<double> mass;     // exact (discrete) P(phi > n)
  std::vector<double> mass_mc;  // Monte Carlo estimate, empty if not run
  std::vector<double> stderr_mc;
};

// P(phi > n) for n = 0..N from the law; suffix sums keep tiny tails accurate.
inline TailSequence tail_distribution(const ReturnTimeLaw& law, int N) {
  if (N > law.phi_max()) throw domain_error("tail_distribution: N exceeds the partition depth");
  std::vector<double> tail(law.phi_max() + 1);
  CompensatedSum<double> acc;
  acc.add(law.beyond);
  for (int n = law.phi_max(); n >= 0; --n) {
    tail[n] = acc.value();
    if (n >= 1) acc.add(law.mass[n]);
  }
  TailSequence t;
  for (int n = 0; n <= N; ++n) {
    t.n.push_back(n);
    t.mass.push_back(n == 0 ? 1.0 : tail[n]);
  }
  return t;
}

inline TailSequence tail_distribution(const InducingScheme& s, int N) {
  return tail_distribution(lebesgue_law(s), N);
}

// Monte Carlo estimate of P(phi > n).  cell_probs (optional) is a piecewise
// constant sampling law on equal cells of Y; empty means Lebesgue.
inline void tail_distribution_mc(const InducingScheme& s, TailSequence& t, std::size_t samples, std::uint64_t seed,
                                 const std::vector<double>& cell_probs = {}) {
  const int N = static_cast<int>(t.n.size()) - 1;
  std::seed_seq seq{seed, std::uint64_t{0x7a11}};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::discrete_distribution<std::size_t> pick(cell_probs.begin(), cell_probs.end());
  const Interval Y = s.Y();
  const double m = cell_probs.empty() ? 1.0 : static_cast<double>(cell_probs.size());
  std::vector<std::size_t> exceed(N + 1, 0);
  for (std::size_t i = 0; i < samples; ++i) {
    double z;
    if (cell_probs.empty()) {
      z = Y.lo + Y.length() * unif(rng);
    } else {
      const std::size_t cell = pick(rng);
      z = Y.lo + Y.length() * ((cell + unif(rng)) / m);
    }
    if (!Y.contains(z)) z = Y.lo;
    int tau = N + 1;
    double x = s.u_of_z(z);
    for (int n = 1; n <= N; ++n) {
      if (Y.contains(x)) {
        tau = n;
        break;
      }
      x = s.map().evaluate(x);
    }
    for (int n = 0; n < std::min(tau, N + 1); ++n) ++exceed[n];
  }
  t.mass_mc.resize(N + 1);
  t.stderr_mc.resize(N + 1);
  for (int n = 0; n <= N; ++n) {
    const double p = static_cast<double>(exceed[n]) / samples;
    t.mass_mc[n] = p;
    t.stderr_mc[n] = std::sqrt(std::max(p * (1 - p), 0.0) / samples);
  }
}

struct TailFit {
  double beta_hat = 0.0;
  double c_hat = 0.0;
  double r2 = 0.0;
  double curvature = 0.0;  // |slope(first half) - slope(second half)|
  bool power_law = true;
};

inline TailFit fit_tail_exponent(const std::vector<double>& n, const std::vector<double>& tail, Window window) {
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < n.size(); ++i)
    if (n[i] >= window.lo && n[i] <= window.hi) xs.push_back(n[i]), ys.push_back(tail[i]);
  if (xs.size() < 8) throw fit_error("fit_tail_exponent: fewer than 8 points in window");
  const LinearFit f = loglog_slope(xs, ys);
  TailFit r;
  r.beta_hat = -f.slope;
  r.c_hat = std::exp(f.intercept);
  r.r2 = f.r2;
  const std::size_t h = xs.size() / 2;
  const std::vector<double> x1(xs.begin(), xs.begin() + h), y1(ys.begin(), ys.begin() + h);
  const std::vector<double> x2(xs.begin() + h, xs.end()), y2(ys.begin() + h, ys.end());
  if (x1.size() >= 4 && x2.size() >= 4) {
    std::vector<double> l1, m1, l2, m2;
    for (std::size_t i = 0; i < x1.size(); ++i) l1.push_back(std::log(x1[i])), m1.push_back(std::log(y1[i]));
    for (std::size_t i = 0; i < x2.size(); ++i) l2.push_back(std::log(x2[i])), m2.push_back(std::log(y2[i]));
    r.curvature = std::abs(linear_fit(l1, m1).slope - linear_fit(l2, m2).slope);
  }
  r.power_law = r.curvature <= 0.25 * std::abs(f.slope) + 0.05;
  return r;
}

inline TailFit fit_tail_exponent(const TailSequence& t, Window window) {
  return fit_tail_exponent(t.n, t.mass, window);
}

struct Separation {
  int s = 0;
  bool capped = false;
};

inline Separation separation_time(double z, double zp, const InducingScheme& scheme, int depth) {
  if (z == zp) return {depth, true};
  for (int s = 0; s < depth; ++s) {
    const auto a = scheme.locate(z);
    const auto b = scheme.locate(zp);
    if (a != b || a < 0) return {s, false};
    const Cylinder& c = scheme.cylinders()[a];
    z = scheme.induced_image(c, z);
    zp = scheme.induced_image(c, zp);
    if (!scheme.Y().contains(z) || !scheme.Y().contains(zp)) return {s + 1, false};
  }
  return {depth, true};
}

struct DistortionEstimate {
  double C3_hat = 0.0;
  double ratio_max = 0.0;   // sup e^{g_n}/mu(a)
  double holder_max = 0.0;  // sup |e^{g_n(z)}-e^{g_n(z')}|/(mu(a) d_theta)
  std::size_t words = 0;
};

struct DistortionOptions {
  int words_per_depth = 48;
  int pairs_per_word = 4;
  int phi_sample = 64;
  std::uint64_t seed = 12345;
  std::function<double(double)> density;  // probability density on Y; uniform if empty
};

inline DistortionEstimate estimate_distortion(const InducingScheme& scheme, int depth, DistortionOptions opt = {}) {
  const Interval Y = scheme.Y();
  auto rho = opt.density ? opt.density : [&](double) { return 1.0 / Y.length(); };
  const auto& cyls = scheme.cylinders();
  std::size_t pool = 0;
  while (pool < cyls.size() && cyls[pool].phi <= opt.phi_sample) ++pool;
  const auto& gl = gauss_legendre(8);
  const int panels = 16;

  struct Eval {
    double z;
    double log_dGn;
  };
  auto pull_word = [&](const std::vector<std::size_t>& w, double y) {
    double logd = 0.0;
    for (std::size_t i = w.size(); i-- > 0;) {
      auto p = scheme.pull<double>(cyls[w[i]], y);
      logd += p.log_dG;
      y = p.z;
    }
    return Eval{y, logd};
  };

  DistortionEstimate est;
  for (int d = 1; d <= depth; ++d) {
    std::seed_seq seq{opt.seed, static_cast<std::uint64_t>(d)};
    std::mt19937_64 rng(seq);
    std::uniform_int_distribution<std::size_t> pick(0, pool - 1);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<std::vector<std::size_t>> words;
    words.emplace_back(d, 0);
    words.emplace_back(d, pool - 1);
    for (int i = 0; i < opt.words_per_depth; ++i) {
      std::vector<std::size_t> w(d);
      for (auto& a : w) a = pick(rng);
      words.push_back(std::move(w));
    }
    for (const auto& w : words) {
      CompensatedSum<double> mass;
      for (int p = 0; p < panels; ++p) {
        const double lo = Y.lo + Y.length() * p / panels, hi = Y.lo + Y.length() * (p + 1) / panels;
        for (std::size_t q = 0; q < gl.first.size(); ++q) {
          const double y = 0.5 * (lo + hi) + 0.5 * (hi - lo) * gl.first[q];
          const Eval e = pull_word(w, y);
          mass.add(0.5 * (hi - lo) * gl.second[q] * rho(e.z) * std::exp(-e.log_dGn));
        }
      }
      const double mu_a = mass.value();
      for (int k = 0; k < opt.pairs_per_word; ++k) {
        double y1 = Y.lo + Y.length() * unif(rng);
        double y2 = Y.lo + Y.length() * unif(rng);
        if (k == 0) y1 = Y.lo, y2 = std::nextafter(Y.hi, Y.lo);
        const Eval e1 = pull_word(w, y1), e2 = pull_word(w, y2);
        const double g1 = rho(e1.z) / rho(y1) * std::exp(-e1.log_dGn);
        const double g2 = rho(e2.z) / rho(y2) * std::exp(-e2.log_dGn);
        est.ratio_max = std::max({est.ratio_max, g1 / mu_a, g2 / mu_a});
        const Separation sep = separation_time(y1, y2, scheme, 64);
        if (y1 != y2)
          est.holder_max = std::max(est.holder_max, std::abs(g1 - g2) / (mu_a * scheme.metric().distance(sep.s)));
      }
      ++est.words;
    }
  }
  est.C3_hat = std::max(est.ratio_max, est.holder_max);
  return est;
}

// sum_{n<=N} n P(phi=n), N = 1..phi_max
inline std::vector<double> kac_partial_sums(const ReturnTimeLaw& law) {
  std::vector<double> out(law.phi_max() + 1, 0.0);
  CompensatedSum<double> s;
  for (int n = 1; n <= law.phi_max(); ++n) {
    s.add(n * law.mass[n]);
    out[n] = s.value();
  }
  return out;
}

struct MetricCheck {
  std::size_t checked = 0;
  std::size_t violations = 0;
  double worst_ratio = 0.0;  // max of d(z,z')/d_theta(z,z')
};

// |z-z'|/|Y| <= theta^{s(z,z')} on random pairs, half of them close.
inline MetricCheck check_metric_inequality(const InducingScheme& s, std::size_t pairs, std::uint64_t seed) {
  std::seed_seq seq{seed, std::uint64_t{31}};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const Interval Y = s.Y();
  MetricCheck mc;
  for (std::size_t i = 0; i < pairs; ++i) {
    const double z = Y.lo + Y.length() * unif(rng);
    double zp = (i % 2 == 0) ? Y.lo + Y.length() * unif(rng)
                             : z + Y.length() * std::pow(10.0, -1 - 8 * unif(rng)) * (unif(rng) - 0.5);
    if (!Y.contains(zp) || zp == z) continue;
    const Separation sep = separation_time(z, zp, s, 40);
    const double ratio = (std::abs(z - zp) / Y.length()) / s.metric().distance(sep.s);
    ++mc.checked;
    mc.worst_ratio = std::max(mc.worst_ratio, ratio);
    if (ratio > 1.0 + 1e-12) ++mc.violations;
  }
  return mc;
}

}  // namespace toralmix
