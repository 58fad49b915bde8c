#include <gtest/gtest.h>

#include "toralmix/eigen_probes.hpp"

using namespace toralmix;

namespace {

const InducingScheme& lsv05() {
  static const InducingScheme s(IntermittentMap::lsv(0.5), {.phi_max = 256});
  return s;
}

const ToralCocycle h03 = ToralCocycle::scalar(0.3);

}  // namespace

TEST(EigenProbes, DoublingFixedPointOnBoundary) {
  const InducingScheme d(IntermittentMap::doubling(), {.phi_max = 30});
  const auto fps = fixed_points(d, ToralCocycle::zero(), 8);
  ASSERT_FALSE(fps.empty());
  EXPECT_EQ(fps.front().phi, 1);
  EXPECT_TRUE(fps.front().boundary);
  EXPECT_NEAR(fps.front().point, 1.0, 1e-12);
}

TEST(EigenProbes, LsvFixedPointsAreContractingAndFixed) {
  const InducingScheme s(IntermittentMap::lsv(1.0), {.phi_max = 128});
  const auto fps = fixed_points(s, h03, 20);
  ASSERT_EQ(fps.size(), 20u);
  EXPECT_TRUE(fps[0].boundary);
  for (std::size_t i = 1; i < fps.size(); ++i) {
    const auto& p = fps[i];
    EXPECT_FALSE(p.boundary);
    EXPECT_LT(p.contraction, 1.0);
    const Cylinder& c = s.cylinders()[p.cylinder];
    EXPECT_GE(p.point, c.a);
    EXPECT_LT(p.point, c.b);
    EXPECT_NEAR(s.induced_image(c, p.point), p.point, 1e-12);
    // forward first return agrees with the cylinder's phi and H
    int phi = 0;
    const auto H = induced_cocycle_lifted(h03, s, p.point, &phi);
    EXPECT_EQ(phi, p.phi);
    EXPECT_NEAR(H[0], p.H[0], 1e-9);
  }
}

TEST(EigenProbes, ResonanceDefect) {
  const double pi = std::numbers::pi;
  const auto toy = resonance_defect({pi}, 1, {pi}, 1, 1);
  EXPECT_EQ(toy.defect, 0.0);
  EXPECT_EQ(std::abs(toy.argmin_k[0]), 1);

  const auto& s = lsv05();
  const auto zero = fixed_points(s, ToralCocycle::zero(), 64);
  const auto [z1, z2] = deepest_fixed_points(zero);
  EXPECT_EQ(resonance_defect(z1, z2, 5).defect, 0.0);

  const auto [a, b] = deepest_fixed_points(fixed_points(s, h03, 64));
  EXPECT_GT(resonance_defect(a, b, 5).defect, 0.01);
  EXPECT_THROW(resonance_defect(a, a, 5), domain_error);
}

TEST(EigenProbes, ResonanceDefectContinuousInAmplitude) {
  const auto& s = lsv05();
  double prev = std::numeric_limits<double>::infinity();
  for (double eps : {0.3, 0.03, 0.003}) {
    const auto [a, b] = deepest_fixed_points(fixed_points(s, ToralCocycle::scalar(eps), 64));
    const double d = resonance_defect(a, b, 1).defect;
    EXPECT_LT(d, prev);
    prev = d;
  }
  EXPECT_LT(prev, 0.02);
}

TEST(EigenProbes, PeriodicPointOfRepeatedCylinder) {
  const auto& s = lsv05();
  const std::size_t a = s.level_begin(3);
  const auto fp = periodic_point(s, h03, {a});
  for (int N : {2, 5, 9}) {
    const auto p = periodic_point(s, h03, std::vector<std::size_t>(N, a));
    EXPECT_NEAR(p.point, fp.point, 1e-14);
    EXPECT_EQ(p.phi_N, 3L * N);
    EXPECT_NEAR(p.H_N[0], N * fp.H_N[0], 1e-12);
    EXPECT_LE(p.certificate, periodic_tolerance);
  }
}

TEST(EigenProbes, PeriodicReturnTimesAdd) {
  const auto& s = lsv05();
  const std::vector<std::size_t> word{s.level_begin(2), s.level_begin(5), s.level_begin(1), s.level_begin(3)};
  const auto p = periodic_point(s, h03, word);
  long phi = 0;
  double z = p.point;
  for (auto c : word) {
    int t = 0;
    induced_cocycle_lifted(h03, s, z, &t);
    phi += t;
    z = s.induced_image(s.cylinders()[c], z);
  }
  EXPECT_EQ(phi, p.phi_N);
  EXPECT_EQ(p.phi_N, 11);
  EXPECT_NEAR(z, p.point, 1e-11);
  EXPECT_THROW(periodic_point(s, h03, {}), domain_error);
}

TEST(EigenProbes, GoodAsymptoticsGeneric) {
  const auto& s = lsv05();
  const auto g = good_asymptotics_fit(s, h03, s.level_begin(2), s.level_begin(3), 25);
  EXPECT_FALSE(g.failed) << g.message;
  EXPECT_TRUE(g.vpgood_exact);
  EXPECT_GE(g.r2, 0.9);
  EXPECT_GT(g.gamma_hat, 0.0);
  EXPECT_LT(g.gamma_hat, 1.0);
  EXPECT_NEAR(g.gamma_hat, g.gamma_reference, 1e-3);
  EXPECT_TRUE(g.good());
  EXPECT_GT(g.E_liminf[0], 0.0);
}

TEST(EigenProbes, GoodAsymptoticsDegenerateCocycles) {
  const auto& s = lsv05();
  const auto z = good_asymptotics_fit(s, ToralCocycle::zero(), s.level_begin(2), s.level_begin(3), 16);
  EXPECT_TRUE(z.degenerate);
  EXPECT_FALSE(z.good());
  EXPECT_EQ(z.kappa_hat[0], 0.0);
  const double c = 0.4;
  const auto k = good_asymptotics_fit(s, ToralCocycle::constant(c), s.level_begin(2), s.level_begin(4), 16);
  EXPECT_TRUE(k.degenerate);
  EXPECT_NEAR(k.kappa_hat[0], k.kappa_prime.front() * c, 1e-12);
  EXPECT_THROW(good_asymptotics_fit(s, h03, s.level_begin(1), s.level_begin(3), 16), domain_error);
}

TEST(EigenProbes, ApproximateEigenDefect) {
  const auto& s = lsv05();
  const std::vector<std::size_t> Z0{s.level_begin(2), s.level_begin(3)};
  const auto zero = approx_eigen_defect(s, ToralCocycle::zero(), {1}, 0.0, 5, Z0);
  EXPECT_LE(zero.defect, 1e-14);
  const auto d = approx_eigen_defect(s, h03, {4}, 0.7, 4, Z0);
  EXPECT_LE(d.isometry_error, 1e-12);
  EXPECT_LE(d.defect, d.defect_unit);
  EXPECT_GT(d.defect, 0.0);
}
