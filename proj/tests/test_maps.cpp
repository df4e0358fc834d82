#include "polyglue/maps.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace polyglue;

namespace {

// z^3 (z-3)/(1-3z) in normal form: gamma = -1/3, zeros {3}, poles {1/3}
GluingForm reference_selfglued() {
  GluingForm g;
  g.gamma = Cx(-1.0 / 3.0);
  g.m = 3;
  g.zeros = {Cx(3)};
  g.poles = {Cx(1.0 / 3.0)};
  return g;
}

GluingForm published_pair() {
  GluingForm g;
  g.gamma = Cx(1);
  g.m = 3;
  g.zeros = {Cx(1.12078, 1.12078)};
  g.poles = {Cx(-0.12239, 0.08603)};
  return g;
}

}  // namespace

TEST(GluingForm, EvaluatesAsWritten) {
  GluingForm g = reference_selfglued();
  for (Cx z : {Cx(0.3, 0.1), Cx(-1.2, 0.8), Cx(2.0, -0.5)}) {
    const Cx direct = z * z * z * (z - 3.0) / (1.0 - 3.0 * z);
    EXPECT_LT(std::abs(g(z) - direct), 1e-13 * (1.0 + std::abs(direct)));
  }
  EXPECT_EQ(g.degree_at_infinity(), 3);
  EXPECT_EQ(g.k(), 1);
  EXPECT_EQ(g.l(), 1);
  EXPECT_EQ(g.degree(), 4);
}

TEST(GluingForm, DerivativeMatchesFiniteDifference) {
  GluingForm g = published_pair();
  const Cx z(0.7, -0.4);
  const double h = 1e-6;
  const Cx fd = (g(z + h) - g(z - h)) / (2 * h);
  EXPECT_LT(std::abs(g.derivative(z) - fd), 1e-7);
  // log-derivative consistency away from zeros and poles
  EXPECT_LT(std::abs(g.log_derivative_times_z(z) - z * g.derivative(z) / g(z)), 1e-10);
}

TEST(GluingForm, CriticalPoints) {
  // for m=3, k=l=1 the finite critical equation reduces to
  // 3 z^2 - (2a + 4b) z + 3ab after stripping the two copies at the origin
  GluingForm g = reference_selfglued();
  auto crit = g.critical_points();
  ASSERT_EQ(crit.size(), 2u);
  std::sort(crit.begin(), crit.end(), [](Cx a, Cx b) { return std::abs(a) < std::abs(b); });
  const double s10 = std::sqrt(10.0);
  EXPECT_LT(std::abs(crit[0] - Cx((11.0 - 2.0 * s10) / 9.0)), 1e-10);
  EXPECT_LT(std::abs(crit[1] - Cx((11.0 + 2.0 * s10) / 9.0)), 1e-10);

  auto with_origin = g.critical_points(true);
  EXPECT_EQ(with_origin.size(), 4u);
}

TEST(GluingForm, RescaleIsConjugation) {
  GluingForm g = published_pair();
  const Cx lam(0.8, 0.35);
  GluingForm h = g.rescale(lam);
  // h(z) = G(lam z)/lam pointwise
  for (Cx z : {Cx(0.5, 0.2), Cx(-0.9, 1.1)}) {
    EXPECT_LT(std::abs(h(z) - g(lam * z) / lam), 1e-12);
  }
  // round trip
  GluingForm back = h.rescale(Cx(1) / lam);
  EXPECT_LT(std::abs(back.gamma - g.gamma), 1e-12);
  EXPECT_LT(std::abs(back.zeros[0] - g.zeros[0]), 1e-12);
  EXPECT_LT(std::abs(back.poles[0] - g.poles[0]), 1e-12);
}

TEST(GluingForm, JsonRoundTrip) {
  GluingForm g = published_pair();
  nlohmann::json j = g;
  EXPECT_EQ(j.at("m").get<int>(), 3);
  GluingForm h = j.get<GluingForm>();
  EXPECT_EQ(h.m, g.m);
  EXPECT_LT(std::abs(h.gamma - g.gamma), 1e-15);
  EXPECT_LT(std::abs(h.zeros[0] - g.zeros[0]), 1e-15);
  EXPECT_LT(std::abs(h.poles[0] - g.poles[0]), 1e-15);
}

TEST(Classify, MultiplierBands) {
  EXPECT_EQ(classify_multiplier(Cx(0)), CycleKind::Superattracting);
  EXPECT_EQ(classify_multiplier(Cx(0.5)), CycleKind::Attracting);
  EXPECT_EQ(classify_multiplier(Cx(2.0, 1.0)), CycleKind::Repelling);
  EXPECT_EQ(classify_multiplier(Cx(1.0)), CycleKind::Parabolic);
  // primitive 3rd root of unity: parabolic with q = 3
  const Cx w = std::polar(1.0, 2.0 * M_PI / 3.0);
  EXPECT_EQ(classify_multiplier(w), CycleKind::Parabolic);
  // golden-mean rotation: indifferent but no small q
  const Cx g = std::polar(1.0, 2.0 * M_PI * 0.6180339887498949);
  EXPECT_EQ(classify_multiplier(g), CycleKind::IrrationallyIndifferent);
}

TEST(PeriodicPoints, SelfGluedReferenceFixedPoints) {
  // fixed equation factors as z (z-1)^3: the origin, a triple point at 1,
  // and infinity. The multiplier at 1 comes out exactly 1 in double
  // precision because every quantity involved is dyadic.
  GluingForm g = reference_selfglued();
  auto fps = periodic_points(g, 1);
  ASSERT_EQ(fps.size(), 3u);

  const FixedPointInfo* origin = nullptr;
  const FixedPointInfo* triple = nullptr;
  const FixedPointInfo* inf = nullptr;
  for (const auto& fp : fps) {
    if (fp.at_infinity) inf = &fp;
    else if (std::abs(fp.location) < 1e-10) origin = &fp;
    else triple = &fp;
  }
  ASSERT_NE(origin, nullptr);
  ASSERT_NE(triple, nullptr);
  ASSERT_NE(inf, nullptr);

  EXPECT_EQ(origin->kind, CycleKind::Superattracting);
  EXPECT_EQ(inf->kind, CycleKind::Superattracting);
  EXPECT_EQ(triple->multiplicity, 3);
  EXPECT_LT(std::abs(triple->location - Cx(1)), 1e-12);
  EXPECT_LT(std::abs(triple->multiplier - Cx(1)), 1e-10);
  EXPECT_EQ(triple->kind, CycleKind::Parabolic);
}

TEST(PeriodicPoints, PublishedPairCluster) {
  // with five published decimals the parabolic double point splits into two
  // simple roots ~4e-3 apart whose raw multipliers are each ~1.6e-2 away
  // from 1; the consolidated center restores |multiplier - 1| ~ 1.2e-4
  GluingForm g = published_pair();
  auto fps = periodic_points(g, 1);

  const FixedPointInfo* cluster = nullptr;
  const FixedPointInfo* repelling = nullptr;
  for (const auto& fp : fps) {
    if (fp.at_infinity) continue;
    if (fp.multiplicity == 2) cluster = &fp;
    if (fp.multiplicity == 1 && std::abs(fp.multiplier) > 2.0) repelling = &fp;
  }
  ASSERT_NE(cluster, nullptr);
  ASSERT_NE(repelling, nullptr);

  EXPECT_LT(std::abs(cluster->location - Cx(-0.246132025230, 0.148382863091)), 1e-9);
  EXPECT_LT(std::abs(cluster->multiplier - Cx(1)), 2e-3);
  EXPECT_GT(std::abs(cluster->multiplier - Cx(1)), 1e-5);  // not exactly 1: rounded inputs
  EXPECT_NEAR(std::abs(cluster->multiplier - Cx(1)), 1.196568e-4, 2e-6);

  EXPECT_LT(std::abs(repelling->location - Cx(1.613039274594, 0.824028942863)), 1e-9);
  EXPECT_LT(std::abs(repelling->multiplier - Cx(3.705111904413, 2.609254203280)), 1e-8);
}

TEST(PeriodicPoints, TwoCyclesOfSquaring) {
  // z^2: period-2 points are the cube roots of unity minus the fixed ones;
  // the pair e^{2pi i/3}, e^{4pi i/3} forms the unique genuine 2-cycle
  MarkedPoly f = MarkedPoly::power_map(2);
  auto fps = periodic_points(f, 2);
  int genuine = 0;
  for (const auto& fp : fps) {
    if (fp.period == 2) {
      ++genuine;
      EXPECT_NEAR(std::abs(fp.location), 1.0, 1e-12);
      EXPECT_LT(std::abs(fp.multiplier - Cx(4)), 1e-9);
      EXPECT_EQ(fp.kind, CycleKind::Repelling);
    }
  }
  EXPECT_EQ(genuine, 2);
}

TEST(PeriodicPoints, ParabolicFamilyMember) {
  // z^3 + 2i z^2 has fixed points 0 and a double root at -i with
  // multiplier exactly 1 (again dyadic arithmetic end to end)
  MarkedPoly f = MarkedPoly::cubic_superattracting_origin(Cx(0, 4.0 / 3.0));
  auto fps = periodic_points(f, 1);
  const FixedPointInfo* dbl = nullptr;
  for (const auto& fp : fps)
    if (fp.multiplicity == 2) dbl = &fp;
  ASSERT_NE(dbl, nullptr);
  EXPECT_LT(std::abs(dbl->location - Cx(0, -1)), 1e-12);
  EXPECT_LT(std::abs(dbl->multiplier - Cx(1)), 1e-12);
  EXPECT_EQ(dbl->kind, CycleKind::Parabolic);
}

TEST(MarkedPoly, FamilyCriticalPoints) {
  MarkedPoly f = MarkedPoly::cubic_superattracting_origin(Cx(0, 4.0 / 3.0));
  auto free = f.free_critical_points();
  ASSERT_EQ(free.size(), 1u);
  EXPECT_LT(std::abs(free[0] - Cx(0, -4.0 / 3.0)), 1e-12);
  EXPECT_EQ(f.center_degree, 2);
}

TEST(PeriodicPoints, DegreeBudgetEnforced) {
  GluingForm g = reference_selfglued();
  EXPECT_THROW(periodic_points(g, 4), std::invalid_argument);
}
