#include <gtest/gtest.h>

#include <random>

#include "toralmix/interval_maps.hpp"

using namespace toralmix;

TEST(IntervalMaps, EvaluateExamples) {
  const auto lsv1 = IntermittentMap::lsv(1.0, 2.0);
  EXPECT_NEAR(lsv1.evaluate(0.25), 0.375, 1e-15);
  for (double g : {0.3, 0.5, 1.0, 1.5}) EXPECT_DOUBLE_EQ(IntermittentMap::lsv(g).evaluate(0.75), 0.5);
  const auto th = IntermittentMap::thaler(1.0, 1.0);
  EXPECT_NEAR(th.evaluate(0.8), 0.44, 1e-15);
  EXPECT_THROW(lsv1.evaluate(1.0), domain_error);
  EXPECT_THROW(lsv1.evaluate(-0.1), domain_error);
}

TEST(IntervalMaps, DerivativeExamples) {
  const auto lsv1 = IntermittentMap::lsv(1.0, 2.0);
  EXPECT_DOUBLE_EQ(lsv1.derivative(0.6), 2.0);
  EXPECT_DOUBLE_EQ(lsv1.derivative(0.99), 2.0);
  EXPECT_NEAR(lsv1.derivative(0.25), 2.0, 1e-15);
  EXPECT_NEAR(lsv1.derivative(1e-300), 1.0, 1e-12);
  EXPECT_THROW(lsv1.derivative(0.5), domain_error);
  EXPECT_DOUBLE_EQ(lsv1.derivative_on(0, 0.5), 3.0);
  EXPECT_DOUBLE_EQ(lsv1.derivative_on(1, 0.5), 2.0);
}

TEST(IntervalMaps, InverseExamples) {
  const auto lsv1 = IntermittentMap::lsv(1.0, 2.0);
  EXPECT_NEAR(lsv1.branch_inverse(1, 0.5), 0.75, 1e-15);
  EXPECT_NEAR(lsv1.branch_inverse(0, 0.375), 0.25, 1e-13);
  EXPECT_NEAR(IntermittentMap::doubling().branch_inverse(0, 0.6), 0.3, 1e-15);
  EXPECT_THROW(lsv1.branch_inverse(0, 1.5), domain_error);
  EXPECT_THROW(lsv1.branch_inverse(1, -0.2), domain_error);
}

TEST(IntervalMaps, OrbitExamples) {
  const auto d = IntermittentMap::doubling().orbit(0.1, 2);
  ASSERT_EQ(d.size(), 3u);
  EXPECT_NEAR(d[1], 0.2, 1e-15);
  EXPECT_NEAR(d[2], 0.4, 1e-15);
  const auto o = IntermittentMap::lsv(1.0).orbit(0.7, 2);
  EXPECT_NEAR(o[1], 0.4, 1e-15);
  EXPECT_NEAR(o[2], 0.72, 1e-15);
  EXPECT_EQ(IntermittentMap::lsv(0.5).orbit(0.3, 0).size(), 1u);
}

TEST(IntervalMaps, InverseRoundTripAllBranches) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (const auto& f : {IntermittentMap::lsv(0.3), IntermittentMap::lsv(0.5), IntermittentMap::lsv(1.5),
                        IntermittentMap::thaler(0.5, 1.0), IntermittentMap::thaler(1.5, 2.0),
                        IntermittentMap::doubling()}) {
    for (const auto& b : f.branches()) {
      for (int t = 0; t < 200; ++t) {
        double y = b.image_lo + (b.image_hi - b.image_lo) * u(rng);
        if (t < 5) y = std::pow(10.0, -3.0 * t - 2);
        const double x = f.branch_inverse(b.id, y);
        EXPECT_GE(x, b.domain.lo);
        EXPECT_LE(x, b.domain.hi);
        EXPECT_NEAR(f.evaluate_on(b.id, x), y, 1e-12) << f.name() << " branch " << b.id;
      }
    }
  }
}

TEST(IntervalMaps, MonotoneAndNeutral) {
  const auto f = IntermittentMap::lsv(0.5);
  double prev = -1;
  for (int i = 1; i < 1000; ++i) {
    const double x = 0.5 * i / 1000.0;
    const double y = f.evaluate(x);
    EXPECT_GT(y, prev);
    EXPECT_GT(y - x, 0.0);
    EXPECT_GE(f.derivative(x), 1.0);
    prev = y;
  }
}

TEST(IntervalMaps, BranchStructure) {
  const auto th = IntermittentMap::thaler(1.0, 2.0);
  ASSERT_EQ(th.branch_count(), 3);
  // boundaries solve x(1+2x) = j
  EXPECT_NEAR(th.branches()[1].domain.lo, 0.5, 1e-14);
  EXPECT_NEAR(th.branches()[2].domain.lo, (-1 + std::sqrt(17.0)) / 4, 1e-14);
  EXPECT_TRUE(th.is_markov());
  EXPECT_FALSE(IntermittentMap::thaler(1.0, 1.5).is_markov());
  EXPECT_FALSE(IntermittentMap::lsv(0.5, 1.0).is_markov());
  EXPECT_DOUBLE_EQ(IntermittentMap::lsv(0.5).beta(), 2.0);
}

TEST(IntervalMaps, DoublingDyadicTerminates) {
  const auto f = IntermittentMap::doubling();
  const auto o = f.orbit(13.0 / 64.0, 8);
  EXPECT_EQ(o[6], 0.0);
  EXPECT_EQ(o[8], 0.0);
}

TEST(IntervalMaps, LongDoubleInverse) {
  const auto f = IntermittentMap::lsv(0.5);
  const long double y = 1e-9L;
  const long double x = f.branch_inverse<long double>(0, y);
  EXPECT_NEAR(static_cast<double>((f.evaluate_on<long double>(0, x) - y) / y), 0.0, 1e-17);
}
