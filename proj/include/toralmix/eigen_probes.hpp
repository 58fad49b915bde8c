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

namespace toralmix {

using ld = long double;

struct FixedPoint {
  std::size_t cylinder = 0;
  int phi = 0;
  double point = 0.0;
  std::vector<double> H;  // lifted
  bool boundary = false;
  double contraction = 0.0;  // |(G^{-1})'| at the point
};

namespace detail {

// H along the pulled-back chain of cylinder c ending at y; returns z and H(z)
inline ld chain_point(const InducingScheme& s, const ToralCocycle& h, const Cylinder& c, ld y, std::vector<ld>* H) {
  const auto& f = s.map();
  ld u = y;
  if (H) H->assign(h.d(), 0.0L);
  for (int r = c.phi - 1; r >= 1; --r) {
    u = f.branch_inverse<ld>(c.itinerary[r], u);
    if (H)
      for (int k = 0; k < h.d(); ++k) (*H)[k] += h.component<ld>(k, u);
  }
  const ld z = s.z_of_u(u);
  if (H)
    for (int k = 0; k < h.d(); ++k) (*H)[k] += h.component<ld>(k, z);
  return z;
}

inline std::vector<double> to_double(const std::vector<ld>& v) { return {v.begin(), v.end()}; }

}  // namespace detail

// One fixed point per cylinder with phi <= phi_cap.  The inverse branch is a
// contraction onto the cylinder, so plain iteration converges; points that
// land on a cylinder endpoint are flagged.
inline std::vector<FixedPoint> fixed_points(const InducingScheme& s, const ToralCocycle& h, int phi_cap = 64) {
  std::vector<FixedPoint> out;
  for (const auto& c : s.cylinders()) {
    if (c.phi > phi_cap) break;
    ld y = c.mid(), prev = 0;
    for (int it = 0; it < 2000; ++it) {
      prev = y;
      y = s.pull<ld>(c, y).z;
      if (std::abs(y - prev) <= 1e-18L) break;
    }
    FixedPoint p;
    p.cylinder = c.id;
    p.phi = c.phi;
    p.point = static_cast<double>(y);
    std::vector<ld> H;
    detail::chain_point(s, h, c, y, &H);
    p.H = detail::to_double(H);
    const ld width = static_cast<ld>(c.b - c.a);
    p.boundary = std::abs(y - ld(c.a)) <= 1e-12L * std::max(width, 1.0L) || std::abs(y - ld(c.b)) <= 1e-12L;
    p.contraction = static_cast<double>(std::exp(-s.pull<ld>(c, y).log_dG));
    out.push_back(std::move(p));
  }
  return out;
}

struct ResonanceDefect {
  double defect = std::numeric_limits<double>::infinity();
  std::vector<int> argmin_k;
};

// min over 0 < |k|_inf <= K of dist(phi2 k.H1 - phi1 k.H2, 2 pi Z)
inline ResonanceDefect resonance_defect(const std::vector<double>& H1, int phi1, const std::vector<double>& H2, int phi2,
                                        int K) {
  if (H1.size() != H2.size() || H1.empty()) throw domain_error("resonance_defect: dimension mismatch");
  if (K < 1) throw domain_error("resonance_defect: K must be >= 1");
  const int d = static_cast<int>(H1.size());
  ResonanceDefect r;
  std::vector<int> k(d, -K);
  for (;;) {
    bool nonzero = false;
    ld a = 0;
    for (int i = 0; i < d; ++i) {
      nonzero |= k[i] != 0;
      a += ld(k[i]) * (ld(phi2) * H1[i] - ld(phi1) * H2[i]);
    }
    if (nonzero) {
      const double dist = static_cast<double>(circular_distance<ld>(a, 0.0L));
      if (dist < r.defect) r.defect = dist, r.argmin_k = k;
    }
    int i = 0;
    while (i < d && ++k[i] > K) k[i++] = -K;
    if (i == d) break;
  }
  return r;
}

inline ResonanceDefect resonance_defect(const FixedPoint& z1, const FixedPoint& z2, int K) {
  if (z1.cylinder == z2.cylinder) throw domain_error("resonance_defect: z1 and z2 must differ");
  return resonance_defect(z1.H, z1.phi, z2.H, z2.phi, K);
}

// The two interior fixed points with the largest return times.
inline std::pair<FixedPoint, FixedPoint> deepest_fixed_points(const std::vector<FixedPoint>& fps) {
  std::vector<const FixedPoint*> interior;
  for (const auto& p : fps)
    if (!p.boundary) interior.push_back(&p);
  if (interior.size() < 2) throw domain_error("deepest_fixed_points: fewer than two interior fixed points");
  std::stable_sort(interior.begin(), interior.end(), [](auto* a, auto* b) { return a->phi > b->phi; });
  return {*interior[0], *interior[1]};
}

struct PeriodicOrbitProbe {
  std::vector<std::size_t> itinerary;
  double point = 0.0;
  std::vector<double> H_N;  // lifted
  long phi_N = 0;
  double certificate = 0.0;   // max_j |G z_j - z_{j+1}|, z_N = z_0
  double forward_residual = 0.0;  // |G^N p - p| by direct forward iteration
  int iterations = 0;
  std::vector<ld> H_N_ld;
};

inline constexpr double periodic_tolerance = 1e-11;

inline PeriodicOrbitProbe periodic_point(const InducingScheme& s, const ToralCocycle& h,
                                         const std::vector<std::size_t>& itinerary, int max_iter = 400) {
  if (itinerary.empty()) throw domain_error("periodic_point: empty itinerary");
  const auto& cyls = s.cylinders();
  for (auto c : itinerary)
    if (c >= cyls.size()) throw domain_error("periodic_point: unknown cylinder id");
  const std::size_t N = itinerary.size();
  PeriodicOrbitProbe p;
  p.itinerary = itinerary;
  ld y = s.Y().mid(), prev = 0;
  int it = 0;
  for (; it < max_iter; ++it) {
    prev = y;
    for (std::size_t j = N; j-- > 0;) y = detail::chain_point(s, h, cyls[itinerary[j]], y, nullptr);
    if (std::abs(y - prev) <= 1e-19L) break;
  }
  p.iterations = it;
  // orbit z_0 .. z_{N-1} by pulling back from z_0 so every link is exact to rounding
  std::vector<ld> z(N + 1);
  z[N] = y;
  std::vector<ld> H(h.d(), 0.0L), Hj;
  for (std::size_t j = N; j-- > 0;) {
    z[j] = detail::chain_point(s, h, cyls[itinerary[j]], z[j + 1], &Hj);
    for (int k = 0; k < h.d(); ++k) H[k] += Hj[k];
    p.phi_N += cyls[itinerary[j]].phi;
  }
  ld cert = std::abs(z[0] - z[N]);
  ld fwd = z[0];
  for (std::size_t j = 0; j < N; ++j) {
    const ld g = s.induced_image<ld>(cyls[itinerary[j]], z[j]);
    cert = std::max(cert, std::abs(g - z[j + 1]));
    fwd = s.induced_image<ld>(cyls[itinerary[j]], fwd);
  }
  p.point = static_cast<double>(z[0]);
  p.H_N_ld = H;
  p.H_N = detail::to_double(H);
  p.certificate = static_cast<double>(cert);
  p.forward_residual = static_cast<double>(std::abs(fwd - z[0]));
  if (!(p.certificate <= periodic_tolerance))
    throw convergence_error("periodic_point: certificate " + std::to_string(p.certificate) + " above tolerance");
  return p;
}

struct GoodAsymptoticsFit {
  std::size_t base = 0, excursion = 0;
  double p0 = 0.0;
  std::vector<double> H_p0;
  std::vector<int> N;
  std::vector<std::vector<double>> D;          // H_N(p_N) - N H(p0), per N
  std::vector<std::vector<double>> residual;   // D_N - kappa_hat
  std::vector<std::vector<double>> E;          // |r_N| / gamma_hat^N
  std::vector<long> kappa_prime;               // phi_N - N phi(p0)
  bool vpgood_exact = true;
  std::vector<double> kappa_hat;
  double gamma_hat = std::numeric_limits<double>::quiet_NaN();
  double gamma_reference = 0.0;  // 1/|G'(p0)|
  double r2 = 0.0;
  std::vector<double> E_liminf;  // min over the last third, per coordinate
  int sign_changes = 0;
  double theta_hint = 0.0;
  bool degenerate = false;
  bool failed = false;
  std::string message;

  bool good() const {
    if (degenerate || failed) return false;
    for (double e : E_liminf)
      if (e > 0) return true;
    return false;
  }
};

// Itineraries base^{N-1} excursion for N = 3..N_max.  gamma_hat comes from a
// log-linear fit of |D_{N+1} - D_N| over [fit_from, N_max]; kappa_hat is the
// last D_N plus the geometric tail of the increments.
inline GoodAsymptoticsFit good_asymptotics_fit(const InducingScheme& s, const ToralCocycle& h, std::size_t base,
                                               std::size_t excursion, int N_max, int fit_from = 5) {
  if (base == excursion) throw domain_error("good_asymptotics_fit: excursion must differ from base");
  if (N_max < fit_from + 8) throw domain_error("good_asymptotics_fit: N_max too small for the fit window");
  const auto& cyls = s.cylinders();
  if (base >= cyls.size() || excursion >= cyls.size()) throw domain_error("good_asymptotics_fit: unknown cylinder");
  const int d = h.d();
  GoodAsymptoticsFit g;
  g.base = base;
  g.excursion = excursion;
  const auto fp = periodic_point(s, h, {base});
  const Cylinder& cb = cyls[base];
  if (std::abs(fp.point - cb.a) <= 1e-12 || std::abs(fp.point - cb.b) <= 1e-12)
    throw domain_error("good_asymptotics_fit: base cylinder has a boundary fixed point");
  g.p0 = fp.point;
  g.H_p0 = fp.H_N;
  g.gamma_reference = std::exp(-static_cast<double>(s.pull<ld>(cb, ld(fp.point)).log_dG));
  std::vector<std::vector<ld>> D;
  for (int n = 3; n <= N_max; ++n) {
    std::vector<std::size_t> word(n - 1, base);
    word.push_back(excursion);
    const auto p = periodic_point(s, h, word);
    std::vector<ld> Dn(d);
    for (int k = 0; k < d; ++k) Dn[k] = p.H_N_ld[k] - ld(n) * fp.H_N_ld[k];
    g.N.push_back(n);
    D.push_back(Dn);
    g.D.push_back(detail::to_double(Dn));
    g.kappa_prime.push_back(p.phi_N - long(n) * cb.phi);
  }
  for (auto kp : g.kappa_prime) g.vpgood_exact &= kp == g.kappa_prime.front();

  const std::size_t M = D.size();
  std::vector<double> inc(M - 1, 0.0);
  for (std::size_t i = 0; i + 1 < M; ++i) {
    ld a = 0;
    for (int k = 0; k < d; ++k) a = std::max(a, std::abs(D[i + 1][k] - D[i][k]));
    inc[i] = static_cast<double>(a);
    if (inc[i] > std::numbers::pi) {
      g.failed = true;
      g.message = "unwrapping ambiguity: jump above pi between N=" + std::to_string(g.N[i]) + " and N+1";
    }
  }
  double peak = 0.0;
  for (double x : inc) peak = std::max(peak, x);
  if (h.is_zero() || peak <= 1e-15) {
    g.degenerate = true;
    g.kappa_hat = g.D.back();
    g.residual.assign(M, std::vector<double>(d, 0.0));
    g.E.assign(M, std::vector<double>(d, 0.0));
    g.E_liminf.assign(d, 0.0);
    g.message = "degenerate: residuals vanish identically (not good asymptotics)";
    return g;
  }
  if (g.failed) return g;
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i + 1 < M; ++i)
    if (g.N[i] >= fit_from && inc[i] > 0) xs.push_back(g.N[i]), ys.push_back(std::log(inc[i]));
  if (xs.size() < 8) {
    g.failed = true;
    g.message = "too few nonzero increments for the geometric fit";
    return g;
  }
  const auto fit = linear_fit(xs, ys);
  g.gamma_hat = std::exp(fit.slope);
  g.r2 = fit.r2;
  if (!(g.gamma_hat > 0 && g.gamma_hat < 1)) {
    g.failed = true;
    g.message = "fitted rate outside (0,1)";
    return g;
  }
  // kappa: D_last + sum_{j>=1} gamma^j (D_last - D_prev)
  const ld gam = g.gamma_hat;
  g.kappa_hat.resize(d);
  for (int k = 0; k < d; ++k)
    g.kappa_hat[k] = static_cast<double>(D[M - 1][k] + (D[M - 1][k] - D[M - 2][k]) * gam / (1 - gam));
  g.residual.resize(M);
  g.E.resize(M);
  for (std::size_t i = 0; i < M; ++i) {
    g.residual[i].resize(d);
    g.E[i].resize(d);
    for (int k = 0; k < d; ++k) {
      const ld r = D[i][k] - ld(g.kappa_hat[k]);
      g.residual[i][k] = static_cast<double>(r);
      g.E[i][k] = static_cast<double>(std::abs(r) / std::pow(gam, ld(g.N[i])));
    }
  }
  // liminf proxy over the last third; the final points sit on kappa_hat by construction
  const std::size_t from = M - M / 3, to = M - 2;
  g.E_liminf.assign(d, std::numeric_limits<double>::infinity());
  for (std::size_t i = from; i < to; ++i)
    for (int k = 0; k < d; ++k) g.E_liminf[k] = std::min(g.E_liminf[k], g.E[i][k]);
  for (std::size_t i = 1; i + 1 < M; ++i) {
    const ld a = D[i][0] - D[i - 1][0], b = D[i + 1][0] - D[i][0];
    if ((a < 0) != (b < 0)) ++g.sign_changes;
  }
  g.theta_hint = std::numbers::pi * g.sign_changes / std::max<std::size_t>(1, M - 2);
  return g;
}

struct EigenDefectOptions {
  int samples_per_cylinder = 16;
  int random_trials = 32;
  int phase_depth = 4;  // u is constant on cylinders with phi <= phase_depth, one extra bucket for the rest
  std::uint64_t seed = 99;
};

struct EigenDefect {
  double defect = 0.0;       // min over the trial family
  double defect_unit = 0.0;  // u = 1 alone
  double chi = 0.0;          // at the minimizer
  double isometry_error = 0.0;
  std::size_t samples = 0;
};

namespace detail {

struct GOrbit {
  double end = 0.0;
  std::vector<double> H;
  long phi = 0;
};

inline GOrbit forward_G(const InducingScheme& s, const ToralCocycle& h, double z, int n) {
  GOrbit o;
  o.H.assign(h.d(), 0.0);
  for (int j = 0; j < n; ++j) {
    int phi = 0;
    const auto H = induced_cocycle_lifted(h, s, z, &phi);
    for (int k = 0; k < h.d(); ++k) o.H[k] += H[k];
    o.phi += phi;
    z = s.first_return(z, s.phi_max() * 64 + 1024).image;
  }
  o.end = z;
  return o;
}

}  // namespace detail

// Diagnostic for M_{k,w}^n u = e^{-ik.H_n} e^{-i w phi_n} u o G^n on sample
// points of the cylinders in Z0.
inline EigenDefect approx_eigen_defect(const InducingScheme& s, const ToralCocycle& h, const std::vector<int>& k,
                                       double omega, int n, const std::vector<std::size_t>& Z0,
                                       EigenDefectOptions opt = {}) {
  if (Z0.empty()) throw domain_error("approx_eigen_defect: empty Z0");
  if (n < 0 || n > 64) throw domain_error("approx_eigen_defect: n outside [0, 64]");
  if (static_cast<int>(k.size()) != h.d()) throw domain_error("approx_eigen_defect: k has wrong dimension");
  const auto& cyls = s.cylinders();
  std::vector<double> zs;
  for (auto c : Z0) {
    if (c >= cyls.size()) throw domain_error("approx_eigen_defect: unknown cylinder");
    for (int i = 0; i < opt.samples_per_cylinder; ++i)
      zs.push_back(cyls[c].a + (i + 0.5) / opt.samples_per_cylinder * (cyls[c].b - cyls[c].a));
  }
  const std::size_t S = zs.size();
  std::vector<cplx> factor(S);
  std::vector<double> ends(S);
  for (std::size_t i = 0; i < S; ++i) {
    const auto o = detail::forward_G(s, h, zs[i], n);
    double ph = -omega * double(o.phi);
    for (int c = 0; c < h.d(); ++c) ph -= k[c] * o.H[c];
    factor[i] = std::polar(1.0, ph);
    ends[i] = o.end;
  }
  auto bucket = [&](double z) -> std::size_t {
    const auto idx = s.locate(z);
    if (idx >= 0 && cyls[idx].phi <= opt.phase_depth) return static_cast<std::size_t>(idx);
    return s.level_end(std::min(opt.phase_depth, s.phi_max()));
  };
  const std::size_t B = s.level_end(std::min(opt.phase_depth, s.phi_max())) + 1;
  std::seed_seq seq{opt.seed, std::uint64_t{0xe1}};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unif(0.0, two_pi);
  EigenDefect out;
  out.samples = S;
  out.defect = std::numeric_limits<double>::infinity();
  for (int t = 0; t <= opt.random_trials; ++t) {
    std::vector<double> theta(B, 0.0);
    if (t > 0)
      for (auto& x : theta) x = unif(rng);
    cplx mean{};
    std::vector<cplx> a(S), b(S);
    for (std::size_t i = 0; i < S; ++i) {
      b[i] = std::polar(1.0, theta[bucket(zs[i])]);
      a[i] = factor[i] * std::polar(1.0, theta[bucket(ends[i])]);
      out.isometry_error = std::max(out.isometry_error, std::abs(std::abs(a[i]) - 1.0));
      mean += a[i] * std::conj(b[i]);
    }
    const double chi = std::abs(mean) > 0 ? std::arg(mean) : 0.0;
    const cplx e = std::polar(1.0, chi);
    double worst = 0.0;
    for (std::size_t i = 0; i < S; ++i) worst = std::max(worst, std::abs(a[i] - e * b[i]));
    if (t == 0) out.defect_unit = worst;
    if (worst < out.defect) out.defect = worst, out.chi = chi;
  }
  return out;
}

}  // namespace toralmix
