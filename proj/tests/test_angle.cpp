#include "polyglue/angle.hpp"

#include <gtest/gtest.h>

#include <chrono>

using namespace polyglue;

TEST(RationalAngle, ReducesAndWraps) {
  RationalAngle a(6, 4);
  EXPECT_EQ(a.num, 1u);
  EXPECT_EQ(a.den, 2u);
  EXPECT_EQ(RationalAngle(7, 7), RationalAngle(0, 1));
  EXPECT_THROW(RationalAngle(1, 0), std::invalid_argument);
}

TEST(RationalAngle, ParseRoundTrip) {
  auto a = parse_angle("7/12");
  EXPECT_EQ(a.num, 7u);
  EXPECT_EQ(a.den, 12u);
  EXPECT_EQ(a.str(), "7/12");
  EXPECT_EQ(parse_angle("3"), RationalAngle(0, 1));
}

TEST(RationalAngle, Ordering) {
  EXPECT_LT(RationalAngle(1, 3), RationalAngle(1, 2));
  EXPECT_LT(RationalAngle(0, 1), RationalAngle(999999999, 1000000000));
}

TEST(Arithmetic, AddSub) {
  EXPECT_EQ(add(RationalAngle(1, 2), RationalAngle(2, 3)), RationalAngle(1, 6));
  EXPECT_EQ(sub(RationalAngle(1, 6), RationalAngle(2, 3)), RationalAngle(1, 2));
  EXPECT_EQ(sub(RationalAngle(0, 1), RationalAngle(1, 3)), RationalAngle(2, 3));
}

TEST(MulD, DoublingTripling) {
  EXPECT_EQ(mul_d(RationalAngle(7, 12), 2), RationalAngle(1, 6));
  EXPECT_EQ(mul_d(RationalAngle(1, 3), 3), RationalAngle(0, 1));
  EXPECT_EQ(mul_d(RationalAngle(4, 7), 3), RationalAngle(5, 7));
}

TEST(Orbit, FixedAndPeriodic) {
  auto o = orbit(RationalAngle(0, 1), 3);
  EXPECT_EQ(o.preperiod, 0u);
  EXPECT_EQ(o.period, 1u);

  // 1/8 under doubling: 1/8 -> 1/4 -> 1/2 -> 0 -> 0
  o = orbit(RationalAngle(1, 8), 2);
  EXPECT_EQ(o.preperiod, 3u);
  EXPECT_EQ(o.period, 1u);

  // 1/7 under doubling is periodic of period 3
  o = orbit(RationalAngle(1, 7), 2);
  EXPECT_EQ(o.preperiod, 0u);
  EXPECT_EQ(o.period, 3u);
  ASSERT_EQ(o.points.size(), 3u);
  EXPECT_EQ(o.points[1], RationalAngle(2, 7));
  EXPECT_EQ(o.points[2], RationalAngle(4, 7));
}

TEST(Orbit, CharacteristicOrbitMatchesPlainOrbit) {
  auto a = characteristic_angle_orbit(RationalAngle(7, 12), 2);
  auto b = orbit(RationalAngle(7, 12), 2);
  EXPECT_EQ(a.points.size(), b.points.size());
  EXPECT_EQ(a.preperiod, b.preperiod);
}

TEST(Pairing, InvolutionAndEquivariance) {
  // Exhaustive over all reduced fractions with denominator <= 1000.
  // pair is an involution and commutes with the boundary d0-tupling.
  const auto t0 = std::chrono::steady_clock::now();
  for (std::uint64_t d0 : {2ull, 3ull}) {
    GluingPairing P{d0, d0 > 2 ? 1ull : 0ull};
    for (std::uint64_t den = 1; den <= 1000; ++den) {
      for (std::uint64_t num = 0; num < den; ++num) {
        if (std::gcd(num, den) != 1) continue;
        RationalAngle t(num, den);
        ASSERT_EQ(P.pair(P.pair(t)), t) << t.str();
        ASSERT_EQ(P.pair(mul_d(t, d0)), mul_d(P.pair(t), d0)) << t.str();
      }
    }
  }
  const auto dt = std::chrono::steady_clock::now() - t0;
  // double check we stay comfortably inside the 1 s budget
  EXPECT_LT(std::chrono::duration<double>(dt).count(), 1.0);
}
