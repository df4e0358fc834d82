#include "polyglue/potential.hpp"

#include <gtest/gtest.h>

#include <random>

#include "polyglue/maps.hpp"

using namespace polyglue;

namespace {

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

TEST(GreenInfinity, PowerMapIsExactLog) {
  const MarkedPoly f = MarkedPoly::power_map(2);
  for (Cx z : {Cx(1.5), Cx(0, 3.0), Cx(-2.0, 1.0), Cx(50.0, -20.0)}) {
    EXPECT_NEAR(green_infinity(f, z), std::log(std::abs(z)), 1e-12);
  }
}

TEST(GreenInfinity, NonEscapingPointsReadZero) {
  const MarkedPoly f = MarkedPoly::power_map(2);
  EXPECT_EQ(green_infinity(f, Cx(0.5)), 0.0);
  EXPECT_EQ(green_infinity(f, Cx(0)), 0.0);
  // on the unit circle the orbit never escapes
  EXPECT_EQ(green_infinity(f, std::polar(1.0, 0.7)), 0.0);
}

// g(f(z)) = d g(z) is the defining equation; it should hold to near machine
// precision over a cloud of basin points for every map we care about.
TEST(GreenInfinity, FunctionalEquationPolynomials) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> rad(0.5, 8.0), ang(0.0, 2 * M_PI);
  const std::vector<MarkedPoly> maps = {
      MarkedPoly::power_map(2), MarkedPoly::power_map(3),
      MarkedPoly::cubic_superattracting_origin(Cx(0, 4.0 / 3.0)),
      MarkedPoly::cubic_superattracting_origin(Cx(0.72863, 0.74796))};
  for (const auto& f : maps) {
    const int d = f.degree();
    int checked = 0;
    while (checked < 120) {
      const Cx z = std::polar(rad(rng), ang(rng));
      const double g = green_infinity(f, z);
      if (g < 1e-3) continue;  // want clearly escaping samples
      const double lhs = green_infinity(f, f(z));
      EXPECT_NEAR(lhs, d * g, 1e-9) << "map degree " << d << " z=" << z;
      ++checked;
    }
  }
}

TEST(GreenInfinity, FunctionalEquationGluingForms) {
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> rad(1.5, 12.0), ang(0.0, 2 * M_PI);
  for (const GluingForm& g : {reference_selfglued(), published_pair()}) {
    const int d = g.degree_at_infinity();
    int checked = 0;
    while (checked < 120) {
      const Cx z = std::polar(rad(rng), ang(rng));
      const double pot = green_infinity(g, z);
      if (pot < 1e-3) continue;
      EXPECT_NEAR(green_infinity(g, g(z)), d * pot, 1e-9);
      ++checked;
    }
  }
}

TEST(GreenOrigin, FunctionalEquationNearCenter) {
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> ang(0.0, 2 * M_PI);
  // sampling radii chosen to stay clear of each map's pole and basin boundary
  const std::vector<std::pair<GluingForm, double>> cases = {
      {reference_selfglued(), 0.2}, {published_pair(), 0.06}};
  for (const auto& [g, rmax] : cases) {
    std::uniform_real_distribution<double> rad(0.01, rmax);
    for (int i = 0; i < 120; ++i) {
      const Cx z = std::polar(rad(rng), ang(rng));
      const double pot = green_origin(g, z);
      ASSERT_LT(pot, 0.0);
      EXPECT_NEAR(green_origin(g, g(z)), g.m * pot, 1e-9);
    }
  }
  const MarkedPoly f = MarkedPoly::cubic_superattracting_origin(Cx(0, 4.0 / 3.0));
  std::uniform_real_distribution<double> rad(0.02, 0.2);
  for (int i = 0; i < 120; ++i) {
    const Cx z = std::polar(rad(rng), ang(rng));
    const double pot = green_origin(f, z);
    ASSERT_LT(pot, 0.0);
    EXPECT_NEAR(green_origin(f, f(z)), f.center_degree * pot, 1e-9);
  }
}

TEST(Boettcher, PowerMapIsIdentity) {
  const Poly p({Cx(0), Cx(0), Cx(0), Cx(1)});  // z^3
  for (Cx z : {Cx(2.0, 0.5), Cx(-3.0, 1.0), Cx(0.0, 5.0)}) {
    EXPECT_LT(std::abs(boettcher_infinity(p, z) - z), 1e-12);
  }
}

TEST(Boettcher, ConjugatesToPowerMap) {
  const MarkedPoly f = MarkedPoly::cubic_superattracting_origin(Cx(0.72863, 0.74796));
  std::mt19937 rng(10);
  std::uniform_real_distribution<double> rad(2.0, 6.0), ang(0.0, 2 * M_PI);
  for (int i = 0; i < 50; ++i) {
    const Cx z = std::polar(rad(rng), ang(rng));
    const Cx lhs = boettcher_infinity(f.p, f(z));
    const Cx rhs = std::pow(boettcher_infinity(f.p, z), 3);
    EXPECT_LT(std::abs(lhs - rhs), 1e-9 * (1.0 + std::abs(rhs)));
  }
  // and the modulus is the exponential of the Green's function
  for (int i = 0; i < 50; ++i) {
    const Cx z = std::polar(rad(rng), ang(rng));
    EXPECT_NEAR(std::log(std::abs(boettcher_infinity(f.p, z))), green_infinity(f, z), 1e-10);
  }
}

TEST(Boettcher, OriginDerivativeMatchesLocalCoefficient) {
  // phi(z) = (3a/2) z + O(z^2) for the cubic family
  const Cx a(0, 4.0 / 3.0);
  const MarkedPoly f = MarkedPoly::cubic_superattracting_origin(a);
  const Cx z(1e-6, 2e-7);
  const Cx ratio = boettcher_origin(f, z) / z;
  EXPECT_LT(std::abs(ratio - 1.5 * a), 1e-4);
}

TEST(Boettcher, OriginConjugatesAndMatchesGreen) {
  const MarkedPoly f = MarkedPoly::cubic_superattracting_origin(Cx(0, 4.0 / 3.0));
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> rad(0.01, 0.04), ang(0.0, 2 * M_PI);
  for (int i = 0; i < 50; ++i) {
    const Cx z = std::polar(rad(rng), ang(rng));
    const Cx lhs = boettcher_origin(f, f(z));
    const Cx rhs = std::pow(boettcher_origin(f, z), 2);
    EXPECT_LT(std::abs(lhs - rhs), 1e-10 * (1.0 + std::abs(rhs)));
    EXPECT_NEAR(std::log(std::abs(boettcher_origin(f, z))), green_origin(f, z), 1e-10);
  }
}

TEST(Boettcher, OriginPullForwardKeepsBranch) {
  // points at moderate modulus need forward iteration before the telescoped
  // product converges; the functional equation must survive the walk back
  const MarkedPoly f = MarkedPoly::cubic_superattracting_origin(Cx(0, 4.0 / 3.0));
  for (Cx z : {Cx(0.25, 0.05), Cx(-0.1, 0.21), Cx(0.18, -0.16)}) {
    const Cx lhs = boettcher_origin(f, f(z));
    const Cx rhs = std::pow(boettcher_origin(f, z), 2);
    EXPECT_LT(std::abs(lhs - rhs), 1e-9 * (1.0 + std::abs(rhs)));
  }
}

TEST(Boettcher, ReportsNotInBasin) {
  const MarkedPoly f = MarkedPoly::cubic_superattracting_origin(Cx(0, 4.0 / 3.0));
  try {
    boettcher_origin(f, Cx(5.0, 5.0));  // escapes to infinity
    FAIL() << "expected a not-in-basin error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("not-in-basin"), std::string::npos);
  }
}

TEST(Boettcher, GluingFormOriginSide) {
  const GluingForm g = reference_selfglued();
  std::mt19937 rng(12);
  std::uniform_real_distribution<double> rad(0.02, 0.08), ang(0.0, 2 * M_PI);
  for (int i = 0; i < 40; ++i) {
    const Cx z = std::polar(rad(rng), ang(rng));
    const Cx lhs = boettcher_origin(g, g(z));
    const Cx rhs = std::pow(boettcher_origin(g, z), 3);
    EXPECT_LT(std::abs(lhs - rhs), 1e-9 * (1.0 + std::abs(rhs)));
    EXPECT_NEAR(std::log(std::abs(boettcher_origin(g, z))), green_origin(g, z), 1e-10);
  }
}

TEST(Equipotential, PowerMapLevelsAreCircles) {
  const MarkedPoly f = MarkedPoly::power_map(2);
  const Equipotential eq = equipotential(f, BasinTag::Infinity, 1.0, 64);
  ASSERT_EQ(eq.samples.size(), 64u);
  for (const Cx& z : eq.samples) EXPECT_NEAR(std::abs(z), std::exp(1.0), 1e-10);
}

TEST(Equipotential, SamplesSitOnTheLevel) {
  const GluingForm g = published_pair();
  const Equipotential eq = equipotential(g, BasinTag::Infinity, 0.7, 48);
  for (const Cx& z : eq.samples) EXPECT_NEAR(green_infinity(g, z), 0.7, 1e-8);
  const Equipotential eq0 = equipotential(g, BasinTag::Origin, 0.9, 48);
  for (const Cx& z : eq0.samples) EXPECT_NEAR(green_origin(g, z), -0.9, 1e-8);
}

TEST(Equipotential, RejectsLevelsBelowTheCriticalPotential) {
  // the free critical point of this map escapes with a tiny but positive
  // potential; levels at or below it do not bound a single smooth curve
  const MarkedPoly f = MarkedPoly::cubic_superattracting_origin(Cx(0.72863, 0.74796));
  try {
    equipotential(f, BasinTag::Infinity, 1e-10, 16);
    FAIL() << "expected a level-too-deep error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("level-too-deep"), std::string::npos);
  }
  EXPECT_NO_THROW(equipotential(f, BasinTag::Infinity, 0.5, 16));
}
