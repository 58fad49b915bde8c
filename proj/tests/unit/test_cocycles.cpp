#include <gtest/gtest.h>

#include <random>

#include "toralmix/cocycles.hpp"

using namespace toralmix;

TEST(Cocycles, BirkhoffSumDoubling) {
  const auto h = ToralCocycle::scalar(0.1);
  const auto S = birkhoff_sum_lifted(h, IntermittentMap::doubling(), 0.1, 2);
  EXPECT_NEAR(S[0], 0.1 * std::cos(0.2 * std::numbers::pi) + 0.1 * std::cos(0.4 * std::numbers::pi), 1e-15);
  const auto w = birkhoff_sum(ToralCocycle::constant(4.0), IntermittentMap::doubling(), 0.3, 2);
  EXPECT_NEAR(w[0], 8.0 - two_pi, 1e-14);
  EXPECT_TRUE(birkhoff_sum(h, IntermittentMap::doubling(), 0.3, 0)[0] == 0.0);
}

TEST(Cocycles, ValuesAreWrapped) {
  const auto h = ToralCocycle::planar(3.0, 5.0);
  for (int i = 0; i < 100; ++i) {
    for (double v : h.value(i / 100.0)) {
      EXPECT_GE(v, 0.0);
      EXPECT_LT(v, two_pi);
    }
  }
  EXPECT_TRUE(ToralCocycle::zero(3).is_zero());
  EXPECT_FALSE(ToralCocycle::winding(1).is_zero());
  EXPECT_THROW(ToralCocycle({}, 1.0), domain_error);
  EXPECT_THROW(ToralCocycle(std::vector<CocycleComponent>(1), 1.5), domain_error);
}

TEST(Cocycles, HolderSeminorm) {
  EXPECT_NEAR(ToralCocycle::scalar(0.3).holder_seminorm(), two_pi * 0.3, 1e-6);
  EXPECT_NEAR(ToralCocycle::planar(0.1, 0.2).holder_seminorm(), 2 * two_pi * 0.2, 1e-6);
}

TEST(Cocycles, InducedCocycleMatchesDirectSum) {
  const auto f = IntermittentMap::lsv(0.5);
  const InducingScheme s(f, {.phi_max = 256});
  const auto h = ToralCocycle::planar(0.4, 0.2);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.5, 1.0);
  for (int t = 0; t < 200; ++t) {
    const double z = u(rng);
    const auto v = induced_cocycle(h, s, z);
    // direct loop, independent of first_return
    double x = z;
    std::vector<double> acc(2, 0.0);
    int n = 0;
    do {
      for (int i = 0; i < 2; ++i) acc[i] += h.component(i, x);
      x = f.evaluate(x);
      ++n;
    } while (x < 0.5);
    EXPECT_EQ(v.phi, n);
    for (int i = 0; i < 2; ++i) EXPECT_NEAR(circular_distance(v.H[i], acc[i]), 0.0, 1e-9);
  }
  // phi = 1: H = h(z)
  const auto one = induced_cocycle(h, s, 0.9);
  EXPECT_EQ(one.phi, 1);
  EXPECT_NEAR(one.H[0], wrap_angle(h.component(0, 0.9)), 1e-15);
}

TEST(Cocycles, ExtensionOrbitAgreesWithBirkhoff) {
  const auto f = IntermittentMap::lsv(1.5);
  const auto h = ToralCocycle::planar(0.7, 0.3);
  const auto orb = extension_orbit(h, f, 0.123, {1.0, 2.0}, 50);
  ASSERT_EQ(orb.size(), 51u);
  const auto S = birkhoff_sum_lifted(h, f, 0.123, 50);
  EXPECT_NEAR(circular_distance(orb[50].psi[0], 1.0 + S[0]), 0.0, 1e-10);
  EXPECT_NEAR(circular_distance(orb[50].psi[1], 2.0 + S[1]), 0.0, 1e-10);
  EXPECT_THROW(extension_orbit(h, f, 0.1, {1.0}, 3), domain_error);
}

TEST(Cocycles, ObservableCosMode) {
  const auto v = ToralObservable::cos_mode({1, 2}, 2.0);
  EXPECT_NEAR(v.evaluate(0.3, {0.4, 0.5}), 2.0 * std::cos(0.4 + 1.0), 1e-14);
  const auto vy = ToralObservable::cos_mode({1}, 1.0, Support::Y, {0.5, 1.0});
  EXPECT_EQ(vy.evaluate(0.2, {0.0}), 0.0);
  EXPECT_NEAR(vy.evaluate(0.7, {0.0}), 1.0, 1e-15);
  EXPECT_THROW(v.evaluate(0.1, {0.0}), domain_error);
}

TEST(Cocycles, ObservableSymmetryViolation) {
  ToralObservable bad(1, {Mode{{1}, {cplx(1.0)}, {}}});
  EXPECT_THROW(bad.check_symmetry(), symmetry_error);
  EXPECT_THROW(bad.evaluate(0.2, {0.5}), symmetry_error);
  ToralObservable skew(1, {Mode{{1}, {cplx(1.0, 1.0)}, {}}, Mode{{-1}, {cplx(1.0, 1.0)}, {}}});
  EXPECT_THROW(skew.check_symmetry(), symmetry_error);
  ToralObservable ok(1, {Mode{{1}, {}, {{1, cplx(0.5)}}}, Mode{{-1}, {}, {{-1, cplx(0.5)}}}});
  EXPECT_NO_THROW(ok.check_symmetry());
  EXPECT_NEAR(ok.evaluate(0.25, {0.0}), std::cos(two_pi * 0.25), 1e-15);
}

TEST(Cocycles, ModeAverageExact) {
  const Mode m{{1}, {cplx(0.5), cplx(-1.0), cplx(2.0)}, {{3, cplx(0.2, -0.1)}, {0, cplx(0.3)}}};
  const double a = 0.55, b = 0.61;
  // composite Simpson on a fine grid
  const int N = 2000;
  cplx s = m(a) + m(b);
  for (int i = 1; i < N; ++i) s += (i % 2 ? 4.0 : 2.0) * m(a + (b - a) * i / N);
  s *= (b - a) / (3.0 * N) / (b - a);
  EXPECT_NEAR(std::abs(m.average(a, b) - s), 0.0, 1e-12);
}

TEST(Cocycles, CetaNormGrowsWithP) {
  const auto v = ToralObservable::cos_mode({2}, 1.0);
  EXPECT_GT(v.ceta_p_norm(2), v.ceta_p_norm(0));
  EXPECT_NEAR(v.ceta_p_norm(0), 1.0, 1e-15);
}

TEST(Cocycles, InducedRegularityFinite) {
  const InducingScheme s(IntermittentMap::lsv(0.5), {.phi_max = 128});
  const double r = induced_cocycle_regularity(ToralCocycle::scalar(0.5), s, 2000, 9);
  EXPECT_TRUE(std::isfinite(r));
  EXPECT_LT(r, 10.0);
}
