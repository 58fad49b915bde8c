#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "acceptance.hpp"
#include "config.hpp"
#include "correlations.hpp"
#include "eigen_probes.hpp"
#include "report.hpp"
#include "tower.hpp"

namespace toralmix {

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> n{"tails",          "spectrum",      "resolvent",   "renewal",
                                          "tower-identity", "correlate",     "check-finite", "check-infinite",
                                          "eigen-probe",    "good-asymptotics", "verify"};
  return n;
}

inline constexpr int exit_pass = 0;
inline constexpr int exit_error = 1;
inline constexpr int exit_check_failed = 2;

namespace detail {

// Lazily built objects every command draws from.
class Session {
 public:
  Session(const ExperimentConfig& cfg, Manifest& man) : cfg_(cfg), man_(man), h_(make_cocycle(cfg)) {}

  const ExperimentConfig& cfg() const { return cfg_; }
  Manifest& manifest() { return man_; }
  const ToralCocycle& h() const { return h_; }

  const InducingScheme& scheme() {
    if (!scheme_) {
      scheme_ = std::make_unique<InducingScheme>(
          make_map(cfg_), SchemeOptions{.phi_max = cfg_.phi_max, .theta = cfg_.theta, .epsilon = cfg_.epsilon});
      man_.warn_all(scheme_->warnings());
      man_.truncation("lebesgue_beyond_phi_max", scheme_->truncated_length() / scheme_->Y().length());
    }
    return *scheme_;
  }
  const TwistedFamily& family() {
    if (!family_) {
      const InducingScheme& s = scheme();
      family_ = std::make_unique<TwistedFamily>(s, h_, UlamGrid{s.Y(), static_cast<std::size_t>(cfg_.m)});
      man_.warn_all(family_->quadrature().warnings);
    }
    return *family_;
  }
  TwistedOperatorSet set(int k1) {
    const auto S = family().set(kvec(k1));
    man_.warn_all(S.warnings);
    man_.truncation("mu_Z_beyond_phi_max", S.truncation_mass);
    return S;
  }
  std::vector<int> kvec(int k1) const {
    std::vector<int> k(h_.d(), 0);
    k[0] = k1;
    return k;
  }
  ToralObservable observable(const ObservableSpec& o) {
    ToralObservable v = make_observable(o, h_.d(), scheme().Y());
    if (o.centered) v = center_against(v, family());
    return v;
  }

 private:
  const ExperimentConfig& cfg_;
  Manifest& man_;
  ToralCocycle h_;
  std::unique_ptr<InducingScheme> scheme_;
  std::unique_ptr<TwistedFamily> family_;
};

inline CheckRecord check_le(std::string name, double measured, double tol, std::string detail = {}) {
  return {std::move(name), num(measured), "<= " + num(tol), measured <= tol, std::move(detail)};
}

inline void cmd_tails(Session& ss) {
  const auto& c = ss.cfg();
  const InducingScheme& s = ss.scheme();
  const int N = std::min(c.N, s.phi_max());
  if (N < c.N) ss.manifest().warn("tails: horizon clipped to phi_max = " + std::to_string(N));
  const auto t = tail_distribution(s, N);
  CsvTable tab{{"n", "tail"}};
  for (int n = 0; n <= N; ++n) tab.add(n, t.mass[n]);
  ss.manifest().write_table("tails", tab, c.dat);
  const auto fit = fit_tail_exponent(t, {c.fit_lo, std::min<double>(c.fit_hi, N)});
  if (!fit.power_law) ss.manifest().warn("tails: fitted tail is not a clean power law (curvature " + num(fit.curvature) + ")");
  ss.manifest().result("beta_hat", fit.beta_hat);
  ss.manifest().result("c_hat", fit.c_hat);
  ss.manifest().result("r2", fit.r2);
  ss.manifest().result("beta", c.beta());
  if (std::isfinite(c.beta()))
    ss.manifest().check(check_le("tail exponent |beta_hat - 1/gamma|", std::abs(fit.beta_hat - c.beta()), c.tol_tail_beta));
}

inline void cmd_spectrum(Session& ss) {
  const auto& c = ss.cfg();
  const auto S = ss.set(0);
  const auto gap = spectral_gap(S);
  const auto dens = ss.family().density();
  CsvTable tab{{"cell", "z", "density"}};
  for (std::size_t i = 0; i < dens.size(); ++i) tab.add(i, S.grid.cell(i).mid(), dens[i]);
  ss.manifest().write_table("density", tab, c.dat);
  ss.manifest().result("lambda1", gap.lambda1);
  ss.manifest().result("lambda2", gap.lambda2);
  ss.manifest().check(check_le("Perron eigenvalue |lambda1 - 1|", std::abs(gap.lambda1 - 1.0), 1e-8));
  ss.manifest().check({"second eigenvalue modulus", num(gap.lambda2), "< " + num(c.tol_gap), gap.lambda2 < c.tol_gap, ""});
}

inline void cmd_resolvent(Session& ss) {
  const auto& c = ss.cfg();
  CsvTable tab{{"k", "omega", "norm", "condition", "singular"}};
  CsvTable sum{{"k", "sup_norm", "argmax_omega", "singular"}};
  bool any = false;
  for (int k = c.k_min; k <= c.k_max; ++k) {
    if (k == 0) continue;
    const auto rep = resolvent_diagnostic(ss.set(k), c.resolvent_grid);
    for (const auto& p : rep.points) tab.add(k, p.omega, p.norm, p.condition, p.singular);
    sum.add(k, rep.sup_norm, rep.argmax_omega, rep.singular);
    if (rep.singular) ss.manifest().warn("resolvent k=" + std::to_string(k) + ": " + rep.message), any = true;
  }
  ss.manifest().write_table("resolvent", tab, c.dat);
  ss.manifest().write_table("resolvent_summary", sum, c.dat);
  // a vanishing cocycle must produce the eigenfunction report, any other must not
  const bool expect = ss.h().is_zero();
  ss.manifest().check({"resolvent singularity reported", num(any), num(expect), any == expect,
                       expect ? "zero cocycle: constants are eigenfunctions" : ""});
}

inline void cmd_renewal(Session& ss) {
  const auto& c = ss.cfg();
  const RenewalMode mode = c.renewal_mode == "matrix" ? RenewalMode::matrix : RenewalMode::vector;
  CsvTable tab{{"k", "n", "norm"}};
  CsvTable fits{{"k", "slope", "intercept", "r2", "fourier_discrepancy"}};
  bool ok = true;
  double worst = 0.0;
  for (int k : c.k) {
    const auto S = ss.set(k);
    const VecC probe = mode == RenewalMode::vector ? fourier_probe(S.grid) : VecC{};
    const auto ren = renewal_recursion(S, c.N, mode, probe);
    ss.manifest().warn_all(ren.warnings);
    for (int n = 0; n <= c.N; ++n) tab.add(k, n, ren.norms[n]);
    LinearFit f;
    try {
      f = decay_fit(ren.norms, {c.fit_lo, std::min<double>(c.fit_hi, c.N)});
    } catch (const fit_error& e) {
      ss.manifest().warn("renewal k=" + std::to_string(k) + ": " + e.what());
      f.slope = f.intercept = f.r2 = std::numeric_limits<double>::quiet_NaN();
    }
    const auto a = fourier_agreement(S, ren, c.omega_count);
    if (a.singular) ss.manifest().warn("renewal k=" + std::to_string(k) + ": singular omega on the Fourier grid");
    if (a.band_limited) ss.manifest().warn("renewal k=" + std::to_string(k) + ": Fourier reconstruction band-limited");
    fits.add(k, f.slope, f.intercept, f.r2, a.discrepancy);
    worst = std::max(worst, a.discrepancy);
    ok = ok && !a.singular;
  }
  ss.manifest().write_table("renewal", tab, c.dat);
  ss.manifest().write_table("renewal_fit", fits, c.dat);
  auto rec = check_le("recursion vs Fourier inversion (relative)", worst, c.tol_fourier,
                      "n <= min(N, omega_count/16)");
  rec.pass = rec.pass && ok;
  ss.manifest().check(rec);
}

inline void cmd_tower_identity(Session& ss) {
  const auto& c = ss.cfg();
  const auto& fam = ss.family();
  const Tower t = build_tower(fam, ss.scheme(), ss.h());
  const int N = std::min(c.N, c.phi_max);
  // E_n alone holds about N x states entries
  if (double(t.size()) * N > 2e7)
    throw domain_error("tower-identity: " + std::to_string(t.size()) + " tower states at horizon " + std::to_string(N) +
                       " is beyond the dense comparison budget; lower scheme.phi_max or grid.m (see configs/tower_identity.toml)");
  if (t.size() > 4000) ss.manifest().warn("tower-identity: " + std::to_string(t.size()) + " tower states, dense comparison is slow");
  if (N < c.N) ss.manifest().warn("tower-identity: horizon clipped to phi_max = " + std::to_string(N));
  CsvTable tab{{"k", "n", "max_abs_error"}};
  double worst = 0.0;
  for (int k : c.k) {
    const auto S = ss.set(k);
    const auto ops = build_tower_operators(S, t, N);
    ss.manifest().warn_all(ops.warnings);
    const auto ren = renewal_recursion(S, N, RenewalMode::matrix);
    const auto id = tower_identity(ops, t, ren);
    for (int n = 0; n <= N; ++n) tab.add(k, n, id.max_abs_error[n]);
    worst = std::max({worst, id.max_error, id.restriction_error});
  }
  ss.manifest().write_table("tower_identity", tab, c.dat);
  ss.manifest().result("tower_states", t.size());
  ss.manifest().check(check_le("assembled vs direct tower power", worst, c.tol_tower));
}

inline CorrelationSeries correlation(Session& ss, const ToralObservable& v, const ToralObservable& w) {
  const auto& c = ss.cfg();
  CorrelationSeries cs;
  if (c.estimator == "operator") {
    cs = correlation_operator(ss.family(), v, w, c.beta(), c.N);
  } else if (c.estimator == "tower") {
    cs = correlation_tower(ss.family(), ss.scheme(), ss.h(), v, w, c.N);
  } else {
    MonteCarloOptions o;
    o.walkers = c.walkers;
    o.per_walker = c.per_walker;
    o.burn_in = c.burn_in;
    o.seed = c.seed;
    cs = correlation_monte_carlo(make_map(c), ss.h(), v, w, c.N, o);
  }
  ss.manifest().warn_all(cs.warnings);
  if (cs.non_mixing) ss.manifest().warn("correlate: a twisted resolvent is singular at omega = 0 (non-mixing extension)");
  return cs;
}

inline void cmd_correlate(Session& ss) {
  const auto& c = ss.cfg();
  const auto cs = correlation(ss, ss.observable(c.v), ss.observable(c.w));
  CsvTable tab{{"n", "rho", "excess", "stderr"}};
  for (int n = 0; n <= cs.N(); ++n)
    tab.add(n, cs.rho[n], cs.rho[n] - cs.vbar * cs.wbar, cs.stderr_mc.empty() ? 0.0 : cs.stderr_mc[n]);
  ss.manifest().write_table("correlation", tab, c.dat);
  if (!cs.modes.empty()) {
    CsvTable modes{{"k", "n", "re", "im"}};
    for (const auto& m : cs.modes)
      for (int n = 0; n <= cs.N(); ++n) modes.add(m.k[0], n, m.values[n].real(), m.values[n].imag());
    ss.manifest().write_table("correlation_modes", modes, c.dat);
  }
  ss.manifest().result("vbar", cs.vbar);
  ss.manifest().result("wbar", cs.wbar);
  ss.manifest().result("mu_Y", cs.mu_Y);
  ss.manifest().result("estimator", estimator_name(cs.estimator));
  if (cs.finite_measure && c.N >= 2 * c.fit_lo) {
    const auto u = upper_bound_check(cs, {c.fit_lo, double(c.N)});
    if (u.rejected) {
      ss.manifest().warn("correlate: " + u.message);
    } else {
      ss.manifest().result("decay_slope", u.slope);
      ss.manifest().result("decay_bound", u.bound);
    }
  }
}

inline void cmd_check_finite(Session& ss) {
  const auto& c = ss.cfg();
  if (!*c.finite_checks) throw regime_error("check-finite: finite-measure checks are disabled for this config");
  if (c.N > c.phi_max) throw domain_error("check-finite: run.N exceeds scheme.phi_max");
  const auto tail = tail_distribution(ss.family().law(), c.phi_max).mass;
  const auto cs = correlation_operator(ss.family(), ss.observable(c.v), ss.observable(c.w), c.beta(), c.N);
  ss.manifest().warn_all(cs.warnings);
  const auto f = asymptotic_check_finite(cs, tail);
  CsvTable tab{{"n", "rho", "excess", "leading", "residual"}};
  for (int n = 0; n <= cs.N(); ++n) tab.add(n, cs.rho[n], f.excess[n], f.leading[n], f.residual[n]);
  ss.manifest().write_table("check_finite", tab, c.dat);
  ss.manifest().result("q_expected", f.q_expected);
  ss.manifest().result("residual_slope", f.residual_slope);
  ss.manifest().result("leading_slope", f.leading_slope);
  ss.manifest().result("mean_zero", f.mean_zero);
  if (f.below_noise_floor) ss.manifest().warn("check-finite: residual below the floating point noise floor");
  if (f.mean_zero) {
    const double bound = -(cs.beta - 0.5);
    ss.manifest().check({"mean-zero residual slope", num(f.residual_slope), "<= " + num(bound), f.residual_slope <= bound, ""});
  } else {
    ss.manifest().check(check_le("ratio gap over the last decade", f.ratio_gap, c.tol_finite_ratio,
                                 "[" + num(f.decade.lo) + ", " + num(f.decade.hi) + "]"));
  }
}

inline void cmd_check_infinite(Session& ss) {
  const auto& c = ss.cfg();
  if (!*c.infinite_checks) throw regime_error("check-infinite: infinite-measure checks are disabled for this config");
  if (c.N > c.phi_max) throw domain_error("check-infinite: run.N exceeds scheme.phi_max");
  const auto tail = tail_distribution(ss.family().law(), c.phi_max).mass;
  const auto cs = correlation_operator(ss.family(), ss.observable(c.v), ss.observable(c.w), c.beta(), c.N);
  ss.manifest().warn_all(cs.warnings);
  const auto r = asymptotic_check_infinite(cs, tail);
  ss.manifest().result("ell_hat", r.ell_hat);
  ss.manifest().result("d_beta", r.d_beta);
  ss.manifest().result("target", r.target);
  if (!r.gap.empty()) {
    CsvTable tab{{"n", "rho", "scaled", "gap"}};
    for (int n = 1; n <= cs.N(); ++n) tab.add(n, cs.rho[n], r.scaled[n], r.gap[n]);
    ss.manifest().write_table("check_infinite", tab, c.dat);
    auto chk = check_le("scaled correlation gap at the horizon", r.gap_at_horizon, c.tol_infinite_gap,
                        r.decreasing ? "decreasing over the last decade" : "not decreasing over the last decade");
    chk.pass = chk.pass && r.decreasing;
    ss.manifest().check(chk);
  } else {
    CsvTable tab{{"n", "rho"}};
    for (int n = 0; n <= cs.N(); ++n) tab.add(n, cs.rho[n]);
    ss.manifest().write_table("check_infinite", tab, c.dat);
    ss.manifest().result("decay_slope", r.decay_slope);
    ss.manifest().warn("check-infinite: mean-zero or beta <= 1/2, only the decay slope is reported");
  }
}

inline void cmd_eigen_probe(Session& ss) {
  const auto& c = ss.cfg();
  const InducingScheme& s = ss.scheme();
  const auto fps = fixed_points(s, ss.h(), std::min(c.phi_cap, s.phi_max()));
  CsvTable fp{{"cylinder", "phi", "point", "H", "boundary", "contraction"}};
  for (const auto& p : fps) fp.add(p.cylinder, p.phi, p.point, p.H[0], p.boundary, p.contraction);
  ss.manifest().write_table("fixed_points", fp, c.dat);
  const auto [z1, z2] = deepest_fixed_points(fps);
  const auto res = resonance_defect(z1, z2, c.K);
  ss.manifest().result("resonance_defect", res.defect);
  ss.manifest().result("resonance_argmin_k", res.argmin_k);
  ss.manifest().result("resonance_points", nlohmann::json::array({z1.phi, z2.phi}));
  // approximate eigenfunction defect at n = [zeta ln |k|], reported only
  const std::vector<std::size_t> Z0{s.level_begin(c.base_phi), s.level_begin(c.excursion_phi)};
  CsvTable tab{{"k", "n", "omega", "defect", "defect_unit", "reference"}};
  for (int k : c.k) {
    if (k == 0) continue;
    const int n = std::max(1, static_cast<int>(std::floor(c.zeta * std::log(std::abs(double(k))))));
    EigenDefectOptions o;
    o.seed = c.seed;
    for (int j = 0; j < c.eigen_omega_grid; ++j) {
      const double omega = two_pi * j / c.eigen_omega_grid;
      const auto d = approx_eigen_defect(s, ss.h(), ss.kvec(k), omega, std::min(n, 64), Z0, o);
      tab.add(k, n, omega, d.defect, d.defect_unit, 10.0 / (double(k) * k));
    }
  }
  ss.manifest().write_table("eigen_defect", tab, c.dat);
}

inline void cmd_good_asymptotics(Session& ss) {
  const auto& c = ss.cfg();
  const InducingScheme& s = ss.scheme();
  const auto g = good_asymptotics_fit(s, ss.h(), s.level_begin(c.base_phi), s.level_begin(c.excursion_phi), c.N_max);
  CsvTable tab{{"N", "D", "residual", "E", "kappa_prime"}};
  for (std::size_t i = 0; i < g.N.size(); ++i)
    tab.add(g.N[i], g.D[i][0], g.residual.empty() ? 0.0 : g.residual[i][0], g.E.empty() ? 0.0 : g.E[i][0], g.kappa_prime[i]);
  ss.manifest().write_table("good_asymptotics", tab, c.dat);
  ss.manifest().result("gamma_hat", g.gamma_hat);
  ss.manifest().result("gamma_reference", g.gamma_reference);
  ss.manifest().result("kappa_hat", g.kappa_hat);
  ss.manifest().result("E_liminf", g.E_liminf);
  ss.manifest().result("r2", g.r2);
  ss.manifest().result("degenerate", g.degenerate);
  ss.manifest().result("sign_changes", g.sign_changes);
  ss.manifest().result("theta_hint", g.theta_hint);
  if (!g.message.empty()) ss.manifest().warn("good-asymptotics: " + g.message);
  ss.manifest().check({"return-time integer constancy", num(g.vpgood_exact), "true", g.vpgood_exact, ""});
  if (g.degenerate) {
    ss.manifest().warn("good-asymptotics: degenerate cocycle, no geometric fit");
  } else {
    ss.manifest().check({"geometric fit R2", num(g.r2), ">= " + num(c.tol_r2), !g.failed && g.r2 >= c.tol_r2, ""});
  }
}

inline void cmd_verify(Session& ss, std::ostream& log) {
  const auto& c = ss.cfg();
  AcceptanceOptions opt;
  opt.seed = c.seed;
  opt.progress = [&](const AcceptanceRow& r) {
    log << (r.pass ? "[PASS] " : "[FAIL] ") << r.id << " " << r.name << ": " << r.measured << "\n" << std::flush;
  };
  const auto rows = run_acceptance(opt);
  CsvTable tab{{"id", "name", "pass", "measured", "tolerance"}};
  nlohmann::json timing = nlohmann::json::object();
  for (const auto& r : rows) {
    tab.add(r.id, r.name, r.pass, r.measured, r.tolerance);
    ss.manifest().check({std::to_string(r.id) + " " + r.name, r.measured, r.tolerance, r.pass, r.detail});
    for (const auto& w : r.warnings) ss.manifest().warn("criterion " + std::to_string(r.id) + ": " + w);
    for (const auto& [key, value] : r.truncation) ss.manifest().truncation("criterion_" + std::to_string(r.id) + " " + key, value);
    timing[std::to_string(r.id)] = r.seconds;
  }
  ss.manifest().result("seconds_per_criterion", timing);
  ss.manifest().write_table("acceptance", tab, c.dat);
}

}  // namespace detail

// Runs one command, writes its files and manifest under cfg.out_dir and
// returns the process exit status.
inline int run_command(const std::string& name, ExperimentConfig cfg, std::ostream& log = std::cerr) {
  if (std::find(command_names().begin(), command_names().end(), name) == command_names().end())
    throw config_error("unknown command '" + name + "'");
  const auto warnings = validate(cfg);
#ifdef _OPENMP
  if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
#endif
  Manifest man(name, cfg, cfg.out_dir);
  man.warn_all(warnings);
  detail::Session ss(cfg, man);
  try {
    if (name == "tails") detail::cmd_tails(ss);
    else if (name == "spectrum") detail::cmd_spectrum(ss);
    else if (name == "resolvent") detail::cmd_resolvent(ss);
    else if (name == "renewal") detail::cmd_renewal(ss);
    else if (name == "tower-identity") detail::cmd_tower_identity(ss);
    else if (name == "correlate") detail::cmd_correlate(ss);
    else if (name == "check-finite") detail::cmd_check_finite(ss);
    else if (name == "check-infinite") detail::cmd_check_infinite(ss);
    else if (name == "eigen-probe") detail::cmd_eigen_probe(ss);
    else if (name == "good-asymptotics") detail::cmd_good_asymptotics(ss);
    else detail::cmd_verify(ss, log);
  } catch (const std::exception& e) {
    man.write(e.what());
    log << "error: " << e.what() << "\n";
    return exit_error;
  }
  man.write();
  for (const auto& w : man.warnings()) log << "warning: " << w << "\n";
  for (const auto& c : man.checks())
    log << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.measured << " (" << c.tolerance << ")\n";
  log << "manifest: " << (man.out_dir() / "manifest.json").string() << "\n";
  return man.all_pass() ? exit_pass : exit_check_failed;
}

}  // namespace toralmix
