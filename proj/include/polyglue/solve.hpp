#pragma once

// Solvers that pin down where a gluing can happen.
//
// The first tool here handles the one-parameter family
//
//     G_theta(z) = e^{2 pi i theta} z^3 (z - c) / (1 - c z),   c real, c > 1.
//
// Every member keeps the unit circle invariant (the Blaschke factor has
// modulus one there), so the circle carries a degree-2 covering of itself.
// The gluing construction needs the member whose circle map has a parabolic
// fixed point: a point e^{it} fixed by G_theta with multiplier exactly 1.
// solve_parabolic_circle finds every (theta, t) pair that works.
//
// The second tool, compactness_report, summarizes how close a family of
// candidate forms comes to degenerating: zeros or poles drifting into the
// origin, off to infinity, or colliding with each other. Downstream checks
// compare the reported minima against fixed thresholds.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <vector>

#include "polyglue/maps.hpp"

namespace polyglue {

struct ParabolicCircleSolution {
  double theta = 0.0;  // rotation parameter, normalized to [0, 1)
  double t = 0.0;      // angle of the parabolic point, in [0, 2 pi)
  Cx point;            // e^{it}, the parabolic fixed point itself
};

// The solved member of the family as a GluingForm.  Rewriting
// 1/(1 - c z) = -1/(c (z - 1/c)) puts the map in the usual
// gamma z^m (z - a)/(z - b) shape.
inline GluingForm parabolic_circle_form(double c, double theta) {
  GluingForm G;
  G.gamma = -std::polar(1.0 / c, 2.0 * M_PI * theta);
  G.m = 3;
  G.zeros = {Cx(c, 0.0)};
  G.poles = {Cx(1.0 / c, 0.0)};
  return G;
}

// Finds all parameters theta for which G_theta has a parabolic fixed point
// on the unit circle, together with the point.
//
// In angle coordinates the restriction to the circle is
// t |-> 2 pi theta + H(t) with H(t) = arg B(e^{it}), B(z) = z^3(z-c)/(1-cz),
// and the multiplier at a circle fixed point is the slope
// H'(t) = Re[z B'(z)/B(z)].  So a solution is a root of
//
//     F(theta, t) = ( wrap(2 pi theta + H(t) - t),  H'(t) - 1 ).
//
// The Jacobian is triangular (the slope does not see theta), which makes a
// plain Newton iteration from a grid of t seeds reliable.  At special
// parameters the two mirror solutions merge into a double root of the slope
// equation; Newton still converges there, just linearly, so the point
// coordinate is only good to about sqrt(eps) while the map data
// (fixed-point and multiplier residuals) stay sharp.
//
// Throws std::invalid_argument for c <= 1 and std::runtime_error
// ("no-parabolic-found") when the circle map's slope never drops to 1,
// which happens for c >= 3.5 or so where the restriction is uniformly
// expanding.
inline std::vector<ParabolicCircleSolution> solve_parabolic_circle(double c,
                                                                   int n_seeds = 64) {
  if (!(c > 1.0))
    throw std::invalid_argument("solve_parabolic_circle: need a real parameter c > 1");
  if (n_seeds < 8)
    throw std::invalid_argument("solve_parabolic_circle: need at least 8 seeds");

  const auto slope = [c](double t) {
    const Cx z = std::polar(1.0, t);
    return (Cx(3.0) + z / (z - c) + c * z / (1.0 - c * z)).real();
  };
  const auto slope_dt = [c](double t) {
    const Cx z = std::polar(1.0, t);
    const Cx s = -c / ((z - c) * (z - c)) + c / ((1.0 - c * z) * (1.0 - c * z));
    return (Cx(0.0, 1.0) * z * s).real();
  };
  const auto arg_b = [c](double t) {
    const Cx z = std::polar(1.0, t);
    return std::arg(z * z * z * (z - c) / (1.0 - c * z));
  };
  // theta that makes e^{it} fixed, given t; only defined mod 1.
  const auto theta_for = [&](double t) {
    double th = std::remainder(t - arg_b(t), 2.0 * M_PI) / (2.0 * M_PI);
    return th < 0.0 ? th + 1.0 : th;
  };

  std::vector<ParabolicCircleSolution> found;
  for (int s = 0; s < n_seeds; ++s) {
    double t = 2.0 * M_PI * s / n_seeds;
    bool converged = false;
    for (int it = 0; it < 80; ++it) {
      const double f = slope(t) - 1.0;
      if (std::abs(f) < 1e-12) {
        converged = true;
        break;
      }
      const double fp = slope_dt(t);
      if (std::abs(fp) < 1e-14) break;  // landed on a critical angle, give up on this seed
      double step = f / fp;
      if (std::abs(step) > 1.0) step = std::copysign(1.0, step);  // keep seeds in their own basin
      t -= step;
    }
    if (!converged) continue;

    t = std::remainder(t, 2.0 * M_PI);
    if (t < 0.0) t += 2.0 * M_PI;
    const Cx p = std::polar(1.0, t);
    const bool dup = std::any_of(found.begin(), found.end(), [&](const auto& q) {
      return std::abs(q.point - p) < 1e-5;  // wide on purpose: merged double roots scatter
    });
    if (dup) continue;
    found.push_back({theta_for(t), t, p});
  }

  if (found.empty())
    throw std::runtime_error("solve_parabolic_circle: no-parabolic-found");
  std::sort(found.begin(), found.end(),
            [](const auto& a, const auto& b) { return a.t < b.t; });
  return found;
}

// How close a family of forms comes to the degenerations that would break a
// gluing: r_min and R_max bound the moduli of every zero and pole in the
// family, and delta_min is the smallest distance between a zero and a pole
// of the same form.  A form with no zeros or no poles simply contributes
// nothing to the quantities it cannot affect, so a pure power family reports
// the empty-range values r_min = +inf, R_max = 0, delta_min = +inf: none of
// the degenerations can happen, and every threshold check passes.
struct CompactnessReport {
  double r_min = 0.0;
  double R_max = 0.0;
  double delta_min = 0.0;
};

inline CompactnessReport compactness_report(const std::vector<GluingForm>& family) {
  if (family.empty())
    throw std::invalid_argument("compactness_report: empty family");

  CompactnessReport rep;
  rep.r_min = std::numeric_limits<double>::infinity();
  rep.R_max = 0.0;
  rep.delta_min = std::numeric_limits<double>::infinity();
  for (const GluingForm& G : family) {
    for (const Cx& a : G.zeros) {
      rep.r_min = std::min(rep.r_min, std::abs(a));
      rep.R_max = std::max(rep.R_max, std::abs(a));
    }
    for (const Cx& b : G.poles) {
      rep.r_min = std::min(rep.r_min, std::abs(b));
      rep.R_max = std::max(rep.R_max, std::abs(b));
    }
    for (const Cx& a : G.zeros)
      for (const Cx& b : G.poles) rep.delta_min = std::min(rep.delta_min, std::abs(a - b));
  }
  return rep;
}

inline void to_json(nlohmann::json& j, const CompactnessReport& rep) {
  j = nlohmann::json{{"r_min", rep.r_min}, {"R_max", rep.R_max}, {"delta_min", rep.delta_min}};
}

}  // namespace polyglue
