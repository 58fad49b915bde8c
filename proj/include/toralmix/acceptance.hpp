#pragma once

#include <fmt/format.h>

#include <chrono>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "correlations.hpp"
#include "eigen_probes.hpp"
#include "inducing.hpp"
#include "operators.hpp"
#include "renewal.hpp"
#include "tower.hpp"

namespace toralmix {

struct AcceptanceRow {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string measured;
  std::string tolerance;
  double seconds = 0.0;
  std::string detail;
  std::vector<std::string> warnings;
  std::vector<std::pair<std::string, double>> truncation;
};

struct AcceptanceOptions {
  std::uint64_t seed = 20240601;
  std::vector<int> only;  // criterion ids; empty runs all twelve
  std::function<void(const AcceptanceRow&)> progress;
};

namespace detail {

inline ToralObservable generic_v(Support sup, Interval Y) {
  return ToralObservable(1, {Mode{{0}, {cplx(1.0), cplx(1.0)}, {}}, Mode{{1}, {cplx(0.5)}, {}}, Mode{{-1}, {cplx(0.5)}, {}}},
                         sup, Y);
}
inline ToralObservable generic_w(Support sup, Interval Y) {
  return ToralObservable(
      1, {Mode{{0}, {cplx(2.0), cplx(-1.0)}, {}}, Mode{{1}, {cplx(0.25)}, {}}, Mode{{-1}, {cplx(0.25)}, {}}}, sup, Y);
}

inline std::string g(double x) { return fmt::format("{:.6g}", x); }

// schemes and operator families shared between criteria
class AcceptanceContext {
 public:
  const InducingScheme& scheme(double gamma, int phi_max) {
    for (auto& e : schemes_)
      if (e.gamma == gamma && e.phi_max == phi_max) return *e.s;
    schemes_.push_back({gamma, phi_max, std::make_unique<InducingScheme>(IntermittentMap::lsv(gamma), SchemeOptions{.phi_max = phi_max})});
    return *schemes_.back().s;
  }
  const TwistedFamily& family(double gamma, int phi_max, std::size_t m) {
    for (auto& e : families_)
      if (e.gamma == gamma && e.phi_max == phi_max && e.m == m) return *e.f;
    const InducingScheme& s = scheme(gamma, phi_max);
    families_.push_back({gamma, phi_max, m, std::make_unique<TwistedFamily>(s, h, UlamGrid{s.Y(), m})});
    return *families_.back().f;
  }
  const ToralCocycle h = ToralCocycle::scalar(0.3);

 private:
  struct SchemeEntry {
    double gamma;
    int phi_max;
    std::unique_ptr<InducingScheme> s;
  };
  struct FamilyEntry {
    double gamma;
    int phi_max;
    std::size_t m;
    std::unique_ptr<TwistedFamily> f;
  };
  std::vector<SchemeEntry> schemes_;
  std::vector<FamilyEntry> families_;
};

inline void record_set(AcceptanceRow& r, const std::string& label, const TwistedOperatorSet& S) {
  r.truncation.emplace_back(label, S.truncation_mass);
  for (const auto& w : S.warnings) r.warnings.push_back(label + ": " + w);
}

inline AcceptanceRow criterion_tails(AcceptanceContext& ctx) {
  AcceptanceRow r{1, "tail exponent"};
  const std::pair<double, std::pair<double, double>> cases[] = {{0.5, {1.85, 2.15}}, {1.5, {0.57, 0.77}}};
  r.pass = true;
  std::vector<std::string> ms, ts;
  for (const auto& [gamma, band] : cases) {
    const InducingScheme& s = ctx.scheme(gamma, 1024);
    const auto fit = fit_tail_exponent(tail_distribution(s, 512), {8, 512});
    r.pass = r.pass && fit.beta_hat >= band.first && fit.beta_hat <= band.second;
    ms.push_back(fmt::format("gamma={} beta_hat={} r2={}", gamma, g(fit.beta_hat), g(fit.r2)));
    ts.push_back(fmt::format("[{}, {}]", band.first, band.second));
    r.truncation.emplace_back(fmt::format("gamma={} Lebesgue(phi>phi_max)", gamma), lebesgue_law(s).beyond);
  }
  r.measured = ms[0] + "; " + ms[1];
  r.tolerance = ts[0] + "; " + ts[1] + " over n in [8, 512]";
  return r;
}

inline AcceptanceRow criterion_distortion(AcceptanceContext& ctx, std::uint64_t seed) {
  AcceptanceRow r{2, "distortion constant"};
  r.pass = true;
  std::vector<std::string> ms;
  for (double gamma : {0.5, 1.5}) {
    const InducingScheme& s = ctx.scheme(gamma, 1024);
    DistortionOptions o;
    o.seed = seed;
    const double c2 = estimate_distortion(s, 2, o).C3_hat;
    const double c4 = estimate_distortion(s, 4, o).C3_hat;
    const double drift = std::max(c4 / c2, c2 / c4);
    r.pass = r.pass && std::isfinite(c2) && std::isfinite(c4) && drift < 2.0;
    ms.push_back(fmt::format("gamma={} C3(2)={} C3(4)={} drift={}", gamma, g(c2), g(c4), g(drift)));
  }
  r.measured = ms[0] + "; " + ms[1];
  r.tolerance = "finite, drift < 2";
  return r;
}

inline AcceptanceRow criterion_spectral_gap(AcceptanceContext& ctx) {
  AcceptanceRow r{3, "spectral gap"};
  const auto S = ctx.family(0.5, 1024, 256).set({0});
  record_set(r, "m=256", S);
  const auto gap = spectral_gap(S);
  r.pass = std::abs(gap.lambda1 - 1.0) <= 1e-8 && gap.lambda2 < 0.99;
  r.measured = fmt::format("|lambda1-1|={} |lambda2|={}", g(std::abs(gap.lambda1 - 1.0)), g(gap.lambda2));
  r.tolerance = "|lambda1-1| <= 1e-8, |lambda2| < 0.99";
  return r;
}

inline AcceptanceRow criterion_fourier(AcceptanceContext& ctx) {
  AcceptanceRow r{4, "renewal Fourier identity"};
  const auto S = ctx.family(0.5, 1024, 128).set({1});
  record_set(r, "k=1", S);
  const auto rec = renewal_recursion(S, 256, RenewalMode::matrix);
  const auto a = fourier_agreement(S, rec, 4096);
  r.pass = !a.singular && a.discrepancy <= 1e-6 && a.compared_to == 256;
  r.measured = fmt::format("relative discrepancy={} (n <= {}); half grid {}", g(a.discrepancy), a.compared_to,
                           g(a.discrepancy_half));
  r.tolerance = "<= 1e-6 for n <= 256";
  return r;
}

inline AcceptanceRow criterion_tower(AcceptanceContext& ctx) {
  AcceptanceRow r{5, "tower identity"};
  const InducingScheme& s = ctx.scheme(0.5, 64);
  const TwistedFamily fam(s, ctx.h, UlamGrid{s.Y(), 64}, 64);
  const Tower t = build_tower(fam, s, ctx.h);
  double worst = 0.0, restr = 0.0;
  for (int k : {0, 1, 2}) {
    const auto S = fam.set({k});
    record_set(r, fmt::format("k={}", k), S);
    const auto ops = build_tower_operators(S, t, 64);
    const auto ren = renewal_recursion(S, 64, RenewalMode::matrix);
    const auto id = tower_identity(ops, t, ren);
    worst = std::max(worst, id.max_error);
    restr = std::max(restr, id.restriction_error);
  }
  r.pass = worst <= 1e-10;
  r.measured = fmt::format("max entrywise error={} (tower states {}, level-0 vs T_n {})", g(worst), t.size(), g(restr));
  r.tolerance = "<= 1e-10, n <= 64, k in {0,1,2}";
  return r;
}

inline AcceptanceRow criterion_renewal_decay(AcceptanceContext& ctx) {
  AcceptanceRow r{6, "renewal decay"};
  r.pass = true;
  std::vector<std::string> ms, ts;
  for (double gamma : {0.5, 1.5}) {
    const double beta = 1.0 / gamma;
    const auto S = ctx.family(gamma, 1024, 128).set({1});
    record_set(r, fmt::format("gamma={}", gamma), S);
    const auto ren = renewal_recursion(S, 512, RenewalMode::vector, fourier_probe(S.grid));
    const auto fit = decay_fit(ren.norms, {16, 512});
    r.pass = r.pass && fit.slope >= -beta - 0.4 && fit.slope <= -beta + 0.4;
    ms.push_back(fmt::format("gamma={} slope={}", gamma, g(fit.slope)));
    ts.push_back(fmt::format("[{}, {}]", g(-beta - 0.4), g(-beta + 0.4)));
  }
  r.measured = ms[0] + "; " + ms[1];
  r.tolerance = ts[0] + "; " + ts[1] + " over n in [16, 512]";
  return r;
}

inline AcceptanceRow criterion_mode_decay(AcceptanceContext& ctx) {
  AcceptanceRow r{7, "nonzero-mode correlation decay"};
  const TwistedFamily& fam = ctx.family(0.5, 1024, 128);
  const auto& s = ctx.scheme(0.5, 1024);
  const auto v = ToralObservable::cos_mode({1}, 1.0, Support::Y, s.Y());
  const auto cs = correlation_operator(fam, v, v, 2.0, 1024);
  r.warnings = cs.warnings;
  const auto u = upper_bound_check(cs, {16, 1024});
  r.pass = !u.rejected && u.slope <= -(2.0 - 0.5);
  r.measured = fmt::format("slope={}", g(u.slope));
  r.tolerance = "<= -1.5 over n in [16, 1024]";
  return r;
}

inline AcceptanceRow criterion_finite_law(AcceptanceContext& ctx) {
  AcceptanceRow r{8, "finite-measure law"};
  constexpr int phi_max = 16384, N = 4096;
  const TwistedFamily& fam = ctx.family(0.3, phi_max, 128);
  const auto& s = ctx.scheme(0.3, phi_max);
  const double beta = 1.0 / 0.3;
  const auto tail = tail_distribution(fam.law(), phi_max).mass;
  const auto v = generic_v(Support::Y, s.Y()), w = generic_w(Support::Y, s.Y());
  const auto cs = correlation_operator(fam, v, w, beta, N);
  const auto f = asymptotic_check_finite(cs, tail);
  const auto cs0 = correlation_operator(fam, center_against(v, fam), w, beta, N);
  const auto f0 = asymptotic_check_finite(cs0, tail);
  r.warnings = cs.warnings;
  r.truncation.emplace_back("mu_Z(phi>phi_max)", fam.set({0}).truncation_mass);
  r.pass = f.ratio_gap <= 0.2 && f0.mean_zero && f0.residual_slope <= -(beta - 0.5);
  r.measured = fmt::format("max ratio gap over [{}, {}]={}; mean-zero residual slope={}", f.decade.lo, f.decade.hi,
                           g(f.ratio_gap), g(f0.residual_slope));
  r.tolerance = fmt::format("ratio gap <= 0.2; slope <= {}", g(-(beta - 0.5)));
  return r;
}

inline AcceptanceRow criterion_infinite_law(AcceptanceContext& ctx) {
  AcceptanceRow r{9, "infinite-measure law"};
  constexpr int phi_max = 4096, N = 4096;
  const TwistedFamily& fam = ctx.family(1.5, phi_max, 128);
  const auto& s = ctx.scheme(1.5, phi_max);
  const auto tail = tail_distribution(fam.law(), phi_max).mass;
  const auto cs = correlation_operator(fam, generic_v(Support::Y, s.Y()), generic_w(Support::Y, s.Y()), 1.0 / 1.5, N);
  r.warnings = cs.warnings;
  r.truncation.emplace_back("mu_Z(phi>phi_max)", fam.set({0}).truncation_mass);
  const auto c = asymptotic_check_infinite(cs, tail);
  const double d_exact = std::sin(2.0 * std::numbers::pi / 3.0) / std::numbers::pi;
  r.pass = c.gap_at_horizon <= 0.15 && c.decreasing && std::abs(c.d_beta - d_exact) <= 1e-15;
  r.measured = fmt::format("gap at n={}: {}; decreasing={}; ell_hat={}; d_beta={}", N, g(c.gap_at_horizon), c.decreasing,
                           g(c.ell_hat), g(c.d_beta));
  r.tolerance = "<= 0.15 and decreasing over the last decade";
  return r;
}

inline AcceptanceRow criterion_cross_validation(AcceptanceContext& ctx, std::uint64_t seed) {
  AcceptanceRow r{10, "operator vs Monte Carlo"};
  const TwistedFamily& fam = ctx.family(0.3, 1024, 128);
  const auto& s = ctx.scheme(0.3, 1024);
  const auto v = generic_v(Support::Y, s.Y()), w = generic_w(Support::Y, s.Y());
  const auto op = correlation_operator(fam, v, w, 1.0 / 0.3, 20);
  MonteCarloOptions o;
  o.seed = seed;
  const auto mc = correlation_monte_carlo(s.map(), ctx.h, v, w, 20, o);
  double worst = 0.0;
  int at = 0;
  for (int n = 0; n <= 20; ++n) {
    const double z = std::abs(op.rho[n] - mc.rho[n]) / mc.stderr_mc[n];
    if (z > worst) worst = z, at = n;
  }
  r.pass = worst <= 3.0;
  r.measured = fmt::format("max |z|={} at n={} ({} samples)", g(worst), at, o.walkers * o.per_walker);
  r.tolerance = "<= 3 standard errors for n <= 20";
  return r;
}

inline AcceptanceRow criterion_resolvent(AcceptanceContext& ctx) {
  AcceptanceRow r{11, "resolvent diagnostic"};
  const TwistedFamily& fam = ctx.family(0.5, 1024, 128);
  double worst = 0.0;
  bool any_singular = false;
  for (int k = 1; k <= 8; ++k) {
    const auto rep = resolvent_diagnostic(fam.set({k}), 256);
    any_singular = any_singular || rep.singular || !std::isfinite(rep.sup_norm);
    worst = std::max(worst, rep.sup_norm);
  }
  const auto& s = ctx.scheme(0.5, 1024);
  const TwistedFamily zero(s, ToralCocycle::zero(), UlamGrid{s.Y(), 128});
  const auto control = resolvent_at(zero.set({1}), 0.0, NormKind::sup);
  r.pass = !any_singular && control.singular;
  r.measured = fmt::format("max sup_omega norm over k=1..8: {}; singular={}; h=0 control singular={} (cond {})", g(worst),
                           any_singular, control.singular, g(control.condition));
  r.tolerance = "finite for h=0.3cos; singular reported for h=0, k=1, omega=0";
  return r;
}

inline AcceptanceRow criterion_eigen_probes(AcceptanceContext& ctx) {
  AcceptanceRow r{12, "eigen probes"};
  const auto& s = ctx.scheme(0.5, 1024);
  const auto [z1, z2] = deepest_fixed_points(fixed_points(s, ToralCocycle::zero(), 64));
  const double d0 = resonance_defect(z1, z2, 5).defect;
  const auto [a, b] = deepest_fixed_points(fixed_points(s, ctx.h, 64));
  const double d1 = resonance_defect(a, b, 5).defect;
  const auto fit = good_asymptotics_fit(s, ctx.h, s.level_begin(2), s.level_begin(3), 25);
  r.pass = d0 == 0.0 && d1 > 0.01 && !fit.failed && fit.r2 >= 0.9 && fit.vpgood_exact;
  r.measured = fmt::format("defect h=0: {}; defect generic: {}; R2={}; gamma_hat={}; integer constancy exact={}", g(d0), g(d1),
                           g(fit.r2), g(fit.gamma_hat), fit.vpgood_exact);
  r.tolerance = "0; > 0.01 over |k| <= 5; R2 >= 0.9 up to N=25; exact";
  if (!fit.message.empty()) r.detail = fit.message;
  return r;
}

}  // namespace detail

inline const std::vector<std::string>& acceptance_names() {
  static const std::vector<std::string> n{"tail exponent",
                                          "distortion constant",
                                          "spectral gap",
                                          "renewal Fourier identity",
                                          "tower identity",
                                          "renewal decay",
                                          "nonzero-mode correlation decay",
                                          "finite-measure law",
                                          "infinite-measure law",
                                          "operator vs Monte Carlo",
                                          "resolvent diagnostic",
                                          "eigen probes"};
  return n;
}

// Each criterion runs in isolation: an exception fails that row only.
inline std::vector<AcceptanceRow> run_acceptance(const AcceptanceOptions& opt = {}) {
  detail::AcceptanceContext ctx;
  std::vector<AcceptanceRow> rows;
  for (int id = 1; id <= 12; ++id) {
    if (!opt.only.empty() && std::find(opt.only.begin(), opt.only.end(), id) == opt.only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    AcceptanceRow r;
    try {
      switch (id) {
        case 1: r = detail::criterion_tails(ctx); break;
        case 2: r = detail::criterion_distortion(ctx, opt.seed); break;
        case 3: r = detail::criterion_spectral_gap(ctx); break;
        case 4: r = detail::criterion_fourier(ctx); break;
        case 5: r = detail::criterion_tower(ctx); break;
        case 6: r = detail::criterion_renewal_decay(ctx); break;
        case 7: r = detail::criterion_mode_decay(ctx); break;
        case 8: r = detail::criterion_finite_law(ctx); break;
        case 9: r = detail::criterion_infinite_law(ctx); break;
        case 10: r = detail::criterion_cross_validation(ctx, opt.seed); break;
        case 11: r = detail::criterion_resolvent(ctx); break;
        case 12: r = detail::criterion_eigen_probes(ctx); break;
      }
    } catch (const std::exception& e) {
      r = AcceptanceRow{id, acceptance_names()[id - 1]};
      r.pass = false;
      r.measured = "error";
      r.detail = e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (opt.progress) opt.progress(r);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace toralmix
