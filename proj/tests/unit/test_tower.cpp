#include <gtest/gtest.h>

#include "toralmix/tower.hpp"

using namespace toralmix;

namespace {

struct Fixture {
  InducingScheme s{IntermittentMap::lsv(0.5), {.phi_max = 24}};
  ToralCocycle h = ToralCocycle::planar(0.6, 0.25);
  TwistedFamily fam{s, h, UlamGrid{s.Y(), 12}};
  Tower t = build_tower(fam, s, h);
};

const Fixture& fx() {
  static const Fixture f;
  return f;
}

}  // namespace

TEST(Tower, LevelsAndDiagonalsCarryTailMass) {
  const auto& f = fx();
  const auto law = f.fam.law();
  const auto tail = tail_distribution(law, f.s.phi_max());
  for (int n = 1; n <= f.s.phi_max(); ++n) {
    EXPECT_NEAR(f.t.measure(f.t.level(n)), tail.mass[n], 1e-12) << n;
    EXPECT_NEAR(f.t.measure(f.t.diagonal(n)), tail.mass[n], 1e-12) << n;
  }
  EXPECT_NEAR(f.t.measure(f.t.level(0)), 1.0, 1e-12);
  // yhat is exactly level 0
  for (std::size_t s = 0; s < f.t.size(); ++s) EXPECT_EQ(bool(f.t.yhat[s]), f.t.states[s].level == 0);
}

TEST(Tower, IdentityMatchesDirectPower) {
  const auto& f = fx();
  const auto S = f.fam.set({1, -1});
  const int N = 30;
  const auto ops = build_tower_operators(S, f.t, N);
  const auto ren = renewal_recursion(S, N, RenewalMode::matrix);
  const auto id = tower_identity(ops, f.t, ren);
  EXPECT_EQ(id.columns, f.t.size());
  EXPECT_LE(id.max_error, 1e-10);
  EXPECT_LE(id.restriction_error, 1e-12);
  EXPECT_FALSE(ops.warnings.empty());
}

TEST(Tower, DenseAssemblySmallN) {
  const auto& f = fx();
  const auto S = f.fam.set({2, 1});
  const auto ops = build_tower_operators(S, f.t, 6);
  const auto ren = renewal_recursion(S, 6, RenewalMode::matrix);
  const Eigen::Index D = static_cast<Eigen::Index>(f.t.size());
  EXPECT_LT((assemble_L_k_n(ops, ren, 0) - MatC::Identity(D, D)).cwiseAbs().maxCoeff(), 1e-15);
  for (int n : {1, 3, 6})
    EXPECT_LT((assemble_L_k_n(ops, ren, n) - direct_tower_power(ops, n)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(assemble_L_k_n(ops, ren, 7), domain_error);
}

TEST(Tower, ZeroOperatorsAreInclusionAndRestriction) {
  const auto& f = fx();
  const auto ops = build_tower_operators(f.fam.set({1, 0}), f.t, 4);
  const MatC A0 = MatC(ops.A[0]), B0 = MatC(ops.B[0]);
  const Eigen::Index m = static_cast<Eigen::Index>(f.t.m());
  EXPECT_TRUE(A0.topRows(m).isApprox(MatC::Identity(m, m)));
  EXPECT_EQ(A0.bottomRows(A0.rows() - m).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_TRUE(B0.leftCols(m).isApprox(MatC::Identity(m, m)));
  EXPECT_EQ(ops.E[0].nonZeros(), A0.rows() - m);
}

TEST(Tower, UntwistedOperatorPreservesConstantsAndMeasure) {
  const auto& f = fx();
  const auto ops = build_tower_operators(f.fam.set({0, 0}), f.t, 1);
  const Eigen::Index D = static_cast<Eigen::Index>(f.t.size());
  const VecC one = VecC::Ones(D);
  EXPECT_LT((ops.L * one - one).cwiseAbs().maxCoeff(), 1e-10);
  VecC mu(D);
  for (Eigen::Index s = 0; s < D; ++s) mu(s) = f.t.mass[s];
  // mu-adjoint: sum_s' mu(s') (L v)(s') = sum_s mu(s) v(s)
  const VecC v = VecC::LinSpaced(D, 0.0, 1.0);
  EXPECT_NEAR(std::abs(mu.dot(ops.L * v) - mu.dot(v)), 0.0, 1e-12);
}

TEST(Tower, YhatSplitVanishesForFirstReturn) {
  const auto& f = fx();
  const auto ops = build_tower_operators(f.fam.set({1, 1}), f.t, 20);
  const auto y = yhat_norms(ops, f.t);
  EXPECT_NEAR(y.A[0], 1.0, 1e-12);
  for (int n = 1; n <= 20; ++n) {
    EXPECT_EQ(y.A[n], 0.0);
    EXPECT_EQ(y.B[n], 0.0);
    EXPECT_LE(y.A[n], y.bound[n] + 1e-15);
    EXPECT_EQ(y.A_tail[n], 0.0);
  }
}
