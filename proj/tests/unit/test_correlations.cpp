#include <gtest/gtest.h>

#include "toralmix/correlations.hpp"

using namespace toralmix;

namespace {

const InducingScheme& lsv03() {
  static const InducingScheme s(IntermittentMap::lsv(0.3), {.phi_max = 256});
  return s;
}

const TwistedFamily& fam03() {
  static const TwistedFamily f(lsv03(), ToralCocycle::scalar(0.3), UlamGrid{lsv03().Y(), 64});
  return f;
}

// 1 + x + cos psi and 2 - x + 0.5 cos psi
ToralObservable generic_v(Support sup, Interval Y) {
  return ToralObservable(1, {Mode{{0}, {cplx(1.0), cplx(1.0)}, {}}, Mode{{1}, {cplx(0.5)}, {}}, Mode{{-1}, {cplx(0.5)}, {}}},
                         sup, Y);
}
ToralObservable generic_w(Support sup, Interval Y) {
  return ToralObservable(
      1, {Mode{{0}, {cplx(2.0), cplx(-1.0)}, {}}, Mode{{1}, {cplx(0.25)}, {}}, Mode{{-1}, {cplx(0.25)}, {}}}, sup, Y);
}

}  // namespace

TEST(Correlations, SeriesIsSumOfModes) {
  const auto Y = lsv03().Y();
  const auto cs = correlation_operator(fam03(), generic_v(Support::Y, Y), generic_w(Support::Y, Y), 1 / 0.3, 100);
  ASSERT_EQ(cs.modes.size(), 3u);
  for (int n = 0; n <= 100; ++n) {
    cplx s{};
    for (const auto& m : cs.modes) s += m.values[n];
    EXPECT_NEAR(s.real(), cs.rho[n], 1e-12);
    EXPECT_LE(std::abs(s.imag()), 1e-10);
  }
  EXPECT_TRUE(cs.finite_measure);
  EXPECT_FALSE(cs.non_mixing);
}

// rho(1) for v = w = cos psi is mu(Y)/2 * int_{Y, phi = 1} cos h dmu_Z; the
// right side by Gauss-Legendre against the piecewise constant density.
TEST(Correlations, FirstStepAgainstQuadrature) {
  const auto& s = lsv03();
  const auto& fam = fam03();
  const auto v = ToralObservable::cos_mode({1}, 1.0, Support::Y, s.Y());
  const auto cs = correlation_operator(fam, v, v, s.map().beta(), 1);
  const auto& grid = fam.quadrature().grid;
  const auto& mu = fam.stationary();
  const auto& gl = gauss_legendre(24);
  const Cylinder& c = s.cylinders()[s.level_begin(1)];
  double acc = 0.0;
  for (std::size_t i = 0; i < grid.m; ++i) {
    const Interval cell = grid.cell(i);
    const double a = std::max(cell.lo, c.a), b = std::min(cell.hi, c.b);
    if (!(b > a)) continue;
    const double dens = mu[i] / cell.length();
    for (std::size_t q = 0; q < gl.first.size(); ++q) {
      const double x = 0.5 * (a + b) + 0.5 * (b - a) * gl.first[q];
      ASSERT_TRUE(s.Y().contains(s.map().evaluate(x)));
      acc += 0.5 * (b - a) * gl.second[q] * dens * std::cos(0.3 * std::cos(two_pi * x));
    }
  }
  EXPECT_NEAR(cs.rho[1], cs.mu_Y * 0.5 * acc, 1e-12);
  EXPECT_NEAR(cs.rho[0], cs.mu_Y * 0.5, 1e-12);
}

TEST(Correlations, ZeroCocycleIsFlaggedNonMixing) {
  const auto& s = lsv03();
  const TwistedFamily fam(s, ToralCocycle::zero(), UlamGrid{s.Y(), 32});
  const auto v = ToralObservable::cos_mode({1}, 1.0, Support::Y, s.Y());
  const auto cs = correlation_operator(fam, v, v, s.map().beta(), 200);
  EXPECT_TRUE(cs.non_mixing);
  // the k = +-1 terms follow the untwisted renewal: rho(n) -> mu(Y)^2 / 2
  EXPECT_NEAR(cs.rho[200], 0.5 * cs.mu_Y * cs.mu_Y, 1e-4);
  const auto u = upper_bound_check(cs, {16, 200});
  EXPECT_TRUE(u.rejected);
}

TEST(Correlations, OperatorAgreesWithMonteCarlo) {
  const auto& s = lsv03();
  const auto Y = s.Y();
  const auto v = generic_v(Support::Y, Y), w = generic_w(Support::Y, Y);
  const auto op = correlation_operator(fam03(), v, w, s.map().beta(), 10);
  const auto mc = correlation_monte_carlo(s.map(), ToralCocycle::scalar(0.3), v, w, 10,
                                          {.walkers = 200, .per_walker = 500, .burn_in = 2000, .seed = 5});
  for (int n = 0; n <= 10; ++n) EXPECT_LE(std::abs(op.rho[n] - mc.rho[n]), 4.0 * mc.stderr_mc[n]) << n;
  EXPECT_THROW(correlation_monte_carlo(IntermittentMap::lsv(1.5), ToralCocycle::scalar(0.3), v, w, 5), regime_error);
}

TEST(Correlations, MonteCarloIsReproducible) {
  const auto& s = lsv03();
  const auto v = ToralObservable::cos_mode({1});
  const MonteCarloOptions o{.walkers = 8, .per_walker = 50, .burn_in = 100, .seed = 3};
  const auto a = correlation_monte_carlo(s.map(), ToralCocycle::scalar(0.3), v, v, 4, o);
  const auto b = correlation_monte_carlo(s.map(), ToralCocycle::scalar(0.3), v, v, 4, o);
  EXPECT_EQ(a.rho, b.rho);
}

TEST(Correlations, TowerRestrictsToOperatorOnY) {
  const InducingScheme s(IntermittentMap::lsv(0.3), {.phi_max = 48});
  const auto h = ToralCocycle::scalar(0.3);
  const TwistedFamily fam(s, h, UlamGrid{s.Y(), 16});
  const auto v = generic_v(Support::Y, s.Y()), w = generic_w(Support::Y, s.Y());
  const auto a = correlation_operator(fam, v, w, s.map().beta(), 40);
  const auto b = correlation_tower(fam, s, h, v, w, 40);
  for (int n = 0; n <= 40; ++n) EXPECT_NEAR(a.rho[n], b.rho[n], 1e-10) << n;
  EXPECT_NEAR(a.mu_Y, b.mu_Y, 1e-12);
  EXPECT_NEAR(a.vbar, b.vbar, 1e-12);
}

TEST(Correlations, CenteredObservableHasZeroMean) {
  const auto Y = lsv03().Y();
  const auto v = center_against(generic_v(Support::Y, Y), fam03());
  const auto cs = correlation_operator(fam03(), v, generic_w(Support::Y, Y), lsv03().map().beta(), 2);
  EXPECT_LE(std::abs(cs.vbar), 1e-15);
}

TEST(Correlations, FiniteCheckNoiseFloorAndRegime) {
  const auto tail = tail_distribution(fam03().law(), 256).mass;
  CorrelationSeries cs;
  cs.beta = 1 / 0.3;
  cs.mu_Y = 0.4;
  cs.vbar = 1.5;
  cs.wbar = 0.7;
  std::vector<double> suffix(tail.size() + 1, 0.0);
  for (std::size_t j = tail.size(); j-- > 0;) suffix[j] = suffix[j + 1] + cs.mu_Y * tail[j];
  for (int n = 0; n <= 200; ++n) cs.rho.push_back(cs.vbar * cs.wbar + suffix[n + 1] * cs.vbar * cs.wbar);
  const auto r = asymptotic_check_finite(cs, tail);
  EXPECT_TRUE(r.below_noise_floor);
  EXPECT_LE(r.ratio_gap, 1e-8);  // cancellation in rho - vbar wbar
  for (int n = 1; n <= 200; ++n) EXPECT_LE(r.leading[n], r.leading[n - 1]);

  cs.rho.resize(40);
  EXPECT_THROW(asymptotic_check_finite(cs, tail), fit_error);
  cs.finite_measure = false;
  cs.beta = 0.8;
  EXPECT_THROW(asymptotic_check_finite(cs, tail), regime_error);
}

TEST(Correlations, InfiniteCheckOnExactAsymptotics) {
  const double beta = 2.0 / 3.0, ell = 0.7;
  std::vector<double> tail(2001);
  for (int n = 1; n <= 2000; ++n) tail[n] = ell * std::pow(double(n), -beta);
  tail[0] = 1.0;
  CorrelationSeries cs;
  cs.beta = beta;
  cs.finite_measure = false;
  cs.vbar = 1.2;
  cs.wbar = 0.9;
  cs.rho.assign(1001, 0.0);
  for (int n = 1; n <= 1000; ++n)
    cs.rho[n] = d_beta(beta) * cs.vbar * cs.wbar * (1 + 1.0 / n) / (ell * std::pow(double(n), 1 - beta));
  const auto r = asymptotic_check_infinite(cs, tail);
  EXPECT_NEAR(r.ell_hat, ell, 1e-12);
  EXPECT_NEAR(r.d_beta, std::sin(2 * std::numbers::pi / 3) / std::numbers::pi, 1e-15);
  EXPECT_NEAR(r.gap_at_horizon, 1e-3, 1e-9);
  EXPECT_TRUE(r.decreasing);
  cs.finite_measure = true;
  cs.beta = 2.0;
  EXPECT_THROW(asymptotic_check_infinite(cs, tail), regime_error);
}

TEST(Correlations, OperatorNeedsYSupport) {
  const auto v = ToralObservable::cos_mode({1});
  EXPECT_THROW(correlation_operator(fam03(), v, v, 1 / 0.3, 4), domain_error);
}
