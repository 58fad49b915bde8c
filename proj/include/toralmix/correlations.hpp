#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "cocycles.hpp"
#include "core.hpp"
#include "inducing.hpp"
#include "operators.hpp"
#include "renewal.hpp"
#include "tower.hpp"

namespace toralmix {

enum class Estimator { operator_renewal, monte_carlo, tower };

inline const char* estimator_name(Estimator e) {
  switch (e) {
    case Estimator::operator_renewal: return "operator";
    case Estimator::monte_carlo: return "monte_carlo";
    case Estimator::tower: return "tower";
  }
  return "?";
}

struct ModeSeries {
  std::vector<int> k;
  std::vector<cplx> values;
};

struct CorrelationSeries {
  std::vector<double> rho;            // n = 0..N
  std::vector<double> stderr_mc;      // Monte Carlo only
  std::vector<ModeSeries> modes;
  double vbar = 0.0, wbar = 0.0;      // integrals against m (mu(Y) = 1 when infinite)
  double mu_Y = 1.0;
  double beta = 0.0;
  bool finite_measure = true;
  bool non_mixing = false;
  Estimator estimator = Estimator::operator_renewal;
  std::vector<std::string> warnings;

  int N() const { return static_cast<int>(rho.size()) - 1; }
};

// Mean of phi under the discrete law, the lump counted at phi_max+1.
inline double discrete_mean_return(const ReturnTimeLaw& law) {
  CompensatedSum<double> s;
  for (int n = 1; n <= law.phi_max(); ++n) s.add(n * law.mass[n]);
  s.add((law.phi_max() + 1) * law.beyond);
  CompensatedSum<double> total;
  for (int n = 1; n <= law.phi_max(); ++n) total.add(law.mass[n]);
  total.add(law.beyond);
  return s.value() / total.value();
}

// Cell averages of a mode function (zero where the observable vanishes).
inline VecC grid_vector(const ToralObservable& v, const Mode& mode, const UlamGrid& grid) {
  VecC g(static_cast<Eigen::Index>(grid.m));
  for (std::size_t i = 0; i < grid.m; ++i) {
    const Interval c = grid.cell(i);
    g(i) = v.in_support(c.mid()) ? mode.average(c.lo, c.hi) : cplx{};
  }
  return g;
}

// Shifts the k = 0 mode by a constant so that its integral against the
// discrete stationary density is exactly zero.
inline ToralObservable center_against(const ToralObservable& v, const TwistedFamily& fam) {
  const std::vector<int> zero(v.d(), 0);
  std::vector<Mode> modes = v.modes();
  auto it = std::find_if(modes.begin(), modes.end(), [&](const Mode& m) { return m.k == zero; });
  if (it == modes.end()) return v;
  const VecC g = grid_vector(v, *it, fam.quadrature().grid);
  const auto& mu = fam.stationary();
  cplx mean{};
  double total = 0.0;
  for (Eigen::Index i = 0; i < g.size(); ++i) mean += mu[i] * g(i), total += mu[i];
  mean /= total;
  if (it->poly.empty()) it->poly.push_back(cplx{});
  it->poly[0] -= mean.real();
  return ToralObservable(v.d(), std::move(modes), v.support(), v.Y(), v.p());
}

// mu(Y) <w_k, T_{k,n} v_{-k}>_{mu_Z}
inline std::vector<cplx> mode_correlation(const RenewalSequence& ren, const VecC& w_k, const std::vector<double>& mu,
                                          double mu_Y) {
  if (ren.mode != RenewalMode::vector) throw domain_error("mode_correlation expects a vector-mode sequence");
  std::vector<cplx> out;
  out.reserve(ren.vectors.size());
  for (const auto& t : ren.vectors) {
    cplx s{};
    for (Eigen::Index i = 0; i < t.size(); ++i) s += mu[i] * w_k(i) * t(i);
    out.push_back(mu_Y * s);
  }
  return out;
}

namespace detail {

inline std::vector<int> negate(std::vector<int> k) {
  for (auto& c : k) c = -c;
  return k;
}

inline bool nonzero(const std::vector<int>& k) {
  for (int c : k)
    if (c) return true;
  return false;
}

// k != 0 modes with a singular resolvent at omega = 0 cannot mix
inline bool mode_obstructed(const TwistedOperatorSet& S) {
  return resolvent_at(S, 0.0, NormKind::sup).singular;
}

}  // namespace detail

// Renewal-operator estimator for observables supported in Y x T^d.
inline CorrelationSeries correlation_operator(const TwistedFamily& fam, const ToralObservable& v,
                                              const ToralObservable& w, double beta, int N) {
  if (v.support() != Support::Y || w.support() != Support::Y)
    throw domain_error("operator estimator needs observables supported in Y x T^d");
  v.check_symmetry();
  w.check_symmetry();
  const auto& grid = fam.quadrature().grid;
  const auto& mu = fam.stationary();
  CorrelationSeries cs;
  cs.estimator = Estimator::operator_renewal;
  cs.beta = beta;
  cs.finite_measure = beta > 1.0;
  const auto law = fam.law();
  cs.mu_Y = cs.finite_measure ? 1.0 / discrete_mean_return(law) : 1.0;
  if (N > law.phi_max() + 1)
    cs.warnings.push_back("horizon " + std::to_string(N) + " exceeds phi_max+1; the tail lump shapes the late terms");
  std::vector<cplx> total(N + 1, cplx{});
  for (const auto& wm : w.modes()) {
    const Mode* vm = v.find(detail::negate(wm.k));
    if (!vm) continue;
    const auto S = fam.set(wm.k);
    const VecC vg = grid_vector(v, *vm, grid), wg = grid_vector(w, wm, grid);
    const auto ren = renewal_recursion(S, N, RenewalMode::vector, vg);
    ModeSeries ms{wm.k, mode_correlation(ren, wg, mu, cs.mu_Y)};
    for (int n = 0; n <= N; ++n) total[n] += ms.values[n];
    if (detail::nonzero(wm.k) && detail::mode_obstructed(S)) cs.non_mixing = true;
    cs.modes.push_back(std::move(ms));
  }
  double worst_imag = 0.0;
  for (const auto& t : total) {
    cs.rho.push_back(t.real());
    worst_imag = std::max(worst_imag, std::abs(t.imag()));
  }
  if (worst_imag > 1e-10) cs.warnings.push_back("imaginary part " + std::to_string(worst_imag) + " in rho");
  const std::vector<int> zero(v.d(), 0);
  cplx vb{}, wb{};
  if (const Mode* m0 = v.find(zero)) {
    const VecC g = grid_vector(v, *m0, grid);
    for (Eigen::Index i = 0; i < g.size(); ++i) vb += mu[i] * g(i);
  }
  if (const Mode* m0 = w.find(zero)) {
    const VecC g = grid_vector(w, *m0, grid);
    for (Eigen::Index i = 0; i < g.size(); ++i) wb += mu[i] * g(i);
  }
  cs.vbar = cs.mu_Y * vb.real();
  cs.wbar = cs.mu_Y * wb.real();
  if (cs.non_mixing) cs.warnings.push_back("non-mixing extension: a k != 0 mode has an eigenfunction at omega = 0");
  return cs;
}

struct MonteCarloOptions {
  std::size_t walkers = 1000;
  std::size_t per_walker = 1000;
  std::size_t burn_in = 10000;
  std::uint64_t seed = 20240601;
};

// Averages v(x,psi) w(f_h^n(x,psi)) along walker orbits started from the
// empirical invariant density; psi uniform with an antithetic partner psi+pi.
// The standard error is taken across walker means.
inline CorrelationSeries correlation_monte_carlo(const IntermittentMap& f, const ToralCocycle& h,
                                                 const ToralObservable& v, const ToralObservable& w, int N,
                                                 MonteCarloOptions opt = {}) {
  if (!(f.beta() > 1.0)) throw regime_error("Monte Carlo estimator needs a finite invariant measure (gamma < 1)");
  const int d = h.d();
  if (v.d() != d || w.d() != d) throw domain_error("observable and cocycle dimensions differ");
  CorrelationSeries cs;
  cs.estimator = Estimator::monte_carlo;
  cs.beta = f.beta();
  cs.finite_measure = true;
  const std::size_t W = opt.walkers;
  std::vector<std::vector<double>> means(W, std::vector<double>(N + 1, 0.0));
  std::vector<double> vsum(W, 0.0), wsum(W, 0.0);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t wk = 0; wk < W; ++wk) {
    std::seed_seq seq{opt.seed, static_cast<std::uint64_t>(wk), std::uint64_t{0x6d63}};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double x = unif(rng);
    for (std::size_t t = 0; t < opt.burn_in; ++t) x = f.evaluate(x);
    // ring of the next N+1 orbit points and lifted cocycle partial sums
    const std::size_t R = static_cast<std::size_t>(N) + 1;
    std::vector<double> xs(R);
    std::vector<std::vector<double>> Hs(R, std::vector<double>(d, 0.0));
    std::vector<double> H(d, 0.0);
    for (std::size_t r = 0; r < R; ++r) {
      xs[r] = x;
      Hs[r] = H;
      for (int c = 0; c < d; ++c) H[c] += h.component(c, x);
      x = f.evaluate(x);
    }
    std::vector<CompensatedSum<double>> acc(N + 1);
    CompensatedSum<double> va, wa;
    std::vector<double> psi(d), psi2(d), phin(d), phin2(d);
    for (std::size_t s = 0; s < opt.per_walker; ++s) {
      const std::size_t head = s % R;
      for (int c = 0; c < d; ++c) psi[c] = two_pi * unif(rng), psi2[c] = psi[c] + std::numbers::pi;
      const double x0 = xs[head];
      const double v1 = v.evaluate(x0, psi), v2 = v.evaluate(x0, psi2);
      va.add(0.5 * (v1 + v2));
      wa.add(0.5 * (w.evaluate(x0, psi) + w.evaluate(x0, psi2)));
      for (int n = 0; n <= N; ++n) {
        const std::size_t idx = (head + n) % R;
        for (int c = 0; c < d; ++c) {
          const double hn = Hs[idx][c] - Hs[head][c];
          phin[c] = psi[c] + hn;
          phin2[c] = psi2[c] + hn;
        }
        acc[n].add(0.5 * (v1 * w.evaluate(xs[idx], phin) + v2 * w.evaluate(xs[idx], phin2)));
      }
      // slide the window one step
      xs[head] = x;
      Hs[head] = H;
      for (int c = 0; c < d; ++c) H[c] += h.component(c, x);
      x = f.evaluate(x);
    }
    for (int n = 0; n <= N; ++n) means[wk][n] = acc[n].value() / opt.per_walker;
    vsum[wk] = va.value() / opt.per_walker;
    wsum[wk] = wa.value() / opt.per_walker;
  }
  cs.rho.assign(N + 1, 0.0);
  cs.stderr_mc.assign(N + 1, 0.0);
  for (int n = 0; n <= N; ++n) {
    CompensatedSum<double> s, s2;
    for (std::size_t wk = 0; wk < W; ++wk) s.add(means[wk][n]);
    const double mean = s.value() / W;
    for (std::size_t wk = 0; wk < W; ++wk) s2.add((means[wk][n] - mean) * (means[wk][n] - mean));
    cs.rho[n] = mean;
    cs.stderr_mc[n] = std::sqrt(s2.value() / (W - 1) / W);
  }
  CompensatedSum<double> vs, ws;
  for (std::size_t wk = 0; wk < W; ++wk) vs.add(vsum[wk]), ws.add(wsum[wk]);
  cs.vbar = vs.value() / W;
  cs.wbar = ws.value() / W;
  cs.mu_Y = std::numeric_limits<double>::quiet_NaN();
  return cs;
}

// Observables on all of X x T^d through the tower: v_hat(z,l) = v(f^l z) at
// the tower representatives, correlations from powers of the twisted tower
// operator.  Finite measure only.
inline CorrelationSeries correlation_tower(const TwistedFamily& fam, const InducingScheme& s, const ToralCocycle& h,
                                           const ToralObservable& v, const ToralObservable& w, int N) {
  const double beta = s.map().beta();
  if (!(beta > 1.0)) throw regime_error("tower correlations need a finite invariant measure");
  v.check_symmetry();
  w.check_symmetry();
  const Tower t = build_tower(fam, s, h);
  const auto& grid = t.grid;
  const Eigen::Index D = static_cast<Eigen::Index>(t.size()), m = static_cast<Eigen::Index>(t.m());
  CompensatedSum<double> tot;
  for (double x : t.mass) tot.add(x);
  const double norm = tot.value();
  // state representative points
  std::vector<double> xrep(D);
  for (Eigen::Index j = 0; j < m; ++j) xrep[j] = grid.cell(j).mid();
  for (const auto& p : t.pieces) {
    if (p.n < 2) continue;
    double x = detail::tower_representative(s, grid, p.cell, p.n);
    for (int l = 1; l < p.n; ++l) {
      x = s.map().evaluate(x);
      xrep[p.first + l - 1] = x;
    }
  }
  auto lift = [&](const ToralObservable& o, const Mode& md) {
    VecC g(D);
    const VecC base = grid_vector(o, md, grid);
    for (Eigen::Index i = 0; i < D; ++i)
      g(i) = i < m ? base(i) : (o.in_support(xrep[i]) ? md(xrep[i]) : cplx{});
    return g;
  };
  CorrelationSeries cs;
  cs.estimator = Estimator::tower;
  cs.beta = beta;
  cs.finite_measure = true;
  cs.mu_Y = t.measure(t.level(0)) / norm;
  std::vector<cplx> total(N + 1, cplx{});
  for (const auto& wm : w.modes()) {
    const Mode* vm = v.find(detail::negate(wm.k));
    if (!vm) continue;
    const auto S = fam.set(wm.k);
    const auto ops = build_tower_operators(S, t, 0);
    VecC x = lift(v, *vm);
    const VecC wl = lift(w, wm);
    ModeSeries ms{wm.k, {}};
    for (int n = 0; n <= N; ++n) {
      if (n) x = (ops.L * x).eval();
      cplx acc{};
      for (Eigen::Index i = 0; i < D; ++i) acc += t.mass[i] * wl(i) * x(i);
      ms.values.push_back(acc / norm);
      total[n] += ms.values.back();
    }
    if (detail::nonzero(wm.k) && detail::mode_obstructed(S)) cs.non_mixing = true;
    cs.modes.push_back(std::move(ms));
  }
  for (const auto& c : total) cs.rho.push_back(c.real());
  const std::vector<int> zero(v.d(), 0);
  auto mean_of = [&](const ToralObservable& o) {
    const Mode* m0 = o.find(zero);
    if (!m0) return 0.0;
    const VecC g = lift(o, *m0);
    cplx a{};
    for (Eigen::Index i = 0; i < D; ++i) a += t.mass[i] * g(i);
    return a.real() / norm;
  };
  cs.vbar = mean_of(v);
  cs.wbar = mean_of(w);
  if (cs.non_mixing) cs.warnings.push_back("non-mixing extension: a k != 0 mode has an eigenfunction at omega = 0");
  return cs;
}

// ---- asymptotic checks ----------------------------------------------------

struct FiniteCheck {
  std::vector<double> leading;   // sum_{j>n} mu(tau>j) vbar wbar
  std::vector<double> excess;    // rho(n) - vbar wbar
  std::vector<double> residual;  // excess - leading
  double q_expected = 0.0;
  double residual_slope = std::numeric_limits<double>::quiet_NaN();
  double leading_slope = std::numeric_limits<double>::quiet_NaN();
  double ratio_gap = std::numeric_limits<double>::quiet_NaN();  // max |excess/leading - 1| over the last decade
  bool below_noise_floor = false;
  bool mean_zero = false;
  Window decade;
};

// tail[n] = mu_Z(phi > n) for the same discrete law the series was built on.
inline FiniteCheck asymptotic_check_finite(const CorrelationSeries& cs, const std::vector<double>& tail, Window fit = {}) {
  if (!cs.finite_measure || !(cs.beta > 1.0)) throw regime_error("asymptotic_check_finite: needs beta > 1");
  const int N = cs.N();
  if (N < 80) throw fit_error("asymptotic_check_finite: horizon too short for a stable fit");
  if (static_cast<int>(tail.size()) < N + 1) throw domain_error("asymptotic_check_finite: tail shorter than the series");
  FiniteCheck r;
  r.decade = {std::floor(N / 10.0), double(N)};
  if (fit.hi == std::numeric_limits<double>::infinity()) fit = {8.0, double(N)};
  const double vw = cs.vbar * cs.wbar;
  const double scale = std::max({std::abs(cs.vbar), std::abs(cs.wbar), 1.0});
  r.mean_zero = std::abs(cs.vbar) <= 1e-12 * scale || std::abs(cs.wbar) <= 1e-12 * scale;
  r.q_expected = (cs.beta >= 2.0 || r.mean_zero) ? cs.beta : 2.0 * cs.beta - 2.0;
  // suffix sums of mu(tau > j) = mu(Y) mu_Z(phi > j) over the available tail
  std::vector<double> suffix(tail.size() + 1, 0.0);
  for (std::size_t j = tail.size(); j-- > 0;) suffix[j] = suffix[j + 1] + cs.mu_Y * tail[j];
  r.leading.resize(N + 1);
  r.excess.resize(N + 1);
  r.residual.resize(N + 1);
  for (int n = 0; n <= N; ++n) {
    r.leading[n] = r.mean_zero ? 0.0 : suffix[n + 1] * vw;
    r.excess[n] = cs.rho[n] - vw;
    r.residual[n] = r.excess[n] - r.leading[n];
  }
  std::vector<double> xs, ys, yl;
  double peak = 0.0;
  for (int n = 1; n <= N; ++n) peak = std::max(peak, std::abs(r.residual[n]));
  const double floor = 1e-13 * std::max(std::abs(vw), 1e-300) + 1e-15;
  if (peak <= floor) {
    r.below_noise_floor = true;
  } else {
    for (int n = 1; n <= N; ++n)
      if (n >= fit.lo && n <= fit.hi && std::abs(r.residual[n]) > floor)
        xs.push_back(n), ys.push_back(std::abs(r.residual[n]));
    if (xs.size() >= 8) r.residual_slope = loglog_slope(xs, ys).slope;
  }
  if (!r.mean_zero) {
    xs.clear();
    yl.clear();
    for (int n = 1; n <= N; ++n)
      if (n >= fit.lo && n <= fit.hi && r.leading[n] != 0.0) xs.push_back(n), yl.push_back(std::abs(r.leading[n]));
    if (xs.size() >= 8) r.leading_slope = loglog_slope(xs, yl).slope;
    double gap = 0.0;
    for (int n = static_cast<int>(r.decade.lo); n <= N; ++n)
      gap = std::max(gap, std::abs(r.excess[n] / r.leading[n] - 1.0));
    r.ratio_gap = gap;
  }
  return r;
}

struct InfiniteCheck {
  double ell_hat = 0.0;
  double d_beta = 0.0;
  double target = 0.0;              // d_beta vbar wbar
  std::vector<double> scaled;       // elltilde(n) n^{1-beta} rho(n)
  std::vector<double> gap;          // |scaled/target - 1|
  double gap_at_horizon = std::numeric_limits<double>::quiet_NaN();
  bool decreasing = false;          // over the last decade
  double decay_slope = std::numeric_limits<double>::quiet_NaN();  // mean-zero or beta < 1/2 branch
  bool mean_zero = false;
};

// ell from the tail with the slope pinned at -beta over the last decade.
inline double estimate_ell(const std::vector<double>& tail, double beta, int n_hi) {
  n_hi = std::min<int>(n_hi, static_cast<int>(tail.size()) - 1);
  const int n_lo = std::max(1, n_hi / 10);
  double s = 0.0;
  int cnt = 0;
  for (int n = n_lo; n <= n_hi; ++n) {
    if (!(tail[n] > 0)) continue;
    s += std::log(tail[n]) + beta * std::log(double(n));
    ++cnt;
  }
  if (cnt < 8) throw fit_error("estimate_ell: fewer than 8 usable tail points");
  return std::exp(s / cnt);
}

inline InfiniteCheck asymptotic_check_infinite(const CorrelationSeries& cs, const std::vector<double>& tail) {
  if (cs.finite_measure || cs.beta > 1.0) throw regime_error("asymptotic_check_infinite: needs beta <= 1 (gamma >= 1)");
  if (cs.estimator == Estimator::monte_carlo) throw regime_error("asymptotic_check_infinite: operator estimator only");
  const int N = cs.N();
  if (N < 80) throw fit_error("asymptotic_check_infinite: horizon too short");
  InfiniteCheck r;
  const double beta = cs.beta;
  const double vw = cs.vbar * cs.wbar;
  r.mean_zero = std::abs(vw) <= 1e-12;
  r.ell_hat = estimate_ell(tail, beta, static_cast<int>(tail.size()) - 1);
  if (beta > 0.5 && !r.mean_zero) {
    r.d_beta = d_beta(beta);
    r.target = r.d_beta * vw;
    double harmonic = 0.0;
    r.scaled.assign(N + 1, 0.0);
    r.gap.assign(N + 1, 0.0);
    for (int n = 1; n <= N; ++n) {
      harmonic += 1.0 / n;
      const double elltilde = beta == 1.0 ? r.ell_hat * harmonic : r.ell_hat;
      r.scaled[n] = elltilde * std::pow(double(n), 1.0 - beta) * cs.rho[n];
      r.gap[n] = std::abs(r.scaled[n] / r.target - 1.0);
    }
    r.gap_at_horizon = r.gap[N];
    // trend: least-squares slope of the gap over the last decade
    std::vector<double> xs, ys;
    for (int n = N / 10; n <= N; ++n) xs.push_back(std::log(double(n))), ys.push_back(r.gap[n]);
    r.decreasing = linear_fit(xs, ys).slope < 0.0;
    return r;
  }
  // |rho| decays like ell(n) n^{-beta}; fit over [16, N]
  std::vector<double> xs, ys;
  for (int n = 16; n <= N; ++n)
    if (std::abs(cs.rho[n]) > 0) xs.push_back(n), ys.push_back(std::abs(cs.rho[n]));
  r.decay_slope = loglog_slope(xs, ys).slope;
  return r;
}

struct UpperBoundCheck {
  double slope = std::numeric_limits<double>::quiet_NaN();
  double bound = 0.0;  // -(beta - 1)
  bool rejected = false;
  std::string message;
};

inline UpperBoundCheck upper_bound_check(const CorrelationSeries& cs, Window fit) {
  UpperBoundCheck u;
  u.bound = -(cs.beta - 1.0);
  if (!cs.finite_measure) throw regime_error("upper_bound_check: finite measure only");
  if (cs.non_mixing) {
    u.rejected = true;
    u.message = "non-mixing extension: correlations need not decay";
    return u;
  }
  const double vw = cs.vbar * cs.wbar;
  std::vector<double> xs, ys;
  for (int n = 1; n <= cs.N(); ++n) {
    const double e = std::abs(cs.rho[n] - vw);
    if (n >= fit.lo && n <= fit.hi && e > 0) xs.push_back(n), ys.push_back(e);
  }
  u.slope = loglog_slope(xs, ys).slope;
  return u;
}

}  // namespace toralmix
