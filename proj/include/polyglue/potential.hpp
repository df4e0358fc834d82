#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "polyglue/maps.hpp"
#include "polyglue/poly.hpp"

namespace polyglue {

// Green's function of the basin of infinity,
//   g(z) = lim log|f^n(z)| / d^n,
// computed by telescoping so each iterate contributes a correction
// log|f(z_n)/z_n^d| / d^{n+1}. The corrections die off once the orbit is
// far out, so the sum is truncated there; non-escaping points return 0.
inline double green_infinity(const Poly& f, Cx z, int budget = 400) {
  const int d = f.degree();
  if (d < 2) throw std::invalid_argument("green_infinity: degree must be >= 2");
  if (z == Cx(0)) {
    // telescoping cannot start at the origin; step once instead
    const Cx c0 = f(z);
    return c0 == Cx(0) ? 0.0 : green_infinity(f, c0, budget - 1) / d;
  }
  double acc = std::log(std::abs(z));
  double scale = 1.0 / d;
  Cx cur = z;
  for (int n = 0; n < budget; ++n) {
    Cx zd(1);
    for (int i = 0; i < d; ++i) zd *= cur;
    const Cx next = f(cur);
    if (next == Cx(0)) return 0.0;  // hit a superattracting cycle: not escaping
    acc += std::log(std::abs(next / zd)) * scale;
    scale /= d;
    cur = next;
    // far out the remaining corrections are log|lead| each, summable in
    // closed form; without this tail the value would be off by O(1/d^n)
    if (std::abs(cur) > 1e15)
      return acc + scale * d / (d - 1.0) * std::log(std::abs(f.c.back()));
  }
  return 0.0;
}

inline double green_infinity(const MarkedPoly& f, Cx z, int budget = 400) {
  return green_infinity(f.p, z, budget);
}

// Green's function of the basin of infinity for a gluing form; the degree
// at infinity plays the role of d and the limit of G/z^d is gamma.
inline double green_infinity(const GluingForm& g, Cx z, int budget = 400) {
  const int d = g.degree_at_infinity();
  if (d < 2) throw std::invalid_argument("green_infinity: map not superattracting at infinity");
  if (z == Cx(0)) return 0.0;
  double acc = std::log(std::abs(z));
  double scale = 1.0 / d;
  Cx cur = z;
  for (int n = 0; n < budget; ++n) {
    Cx zd(1);
    for (int i = 0; i < d; ++i) zd *= cur;
    const Cx next = g(cur);
    if (next == Cx(0) || !std::isfinite(std::abs(next))) return 0.0;
    acc += std::log(std::abs(next / zd)) * scale;
    scale /= d;
    cur = next;
    if (std::abs(cur) > 1e15)
      return acc + scale * d / (d - 1.0) * std::log(std::abs(g.gamma));
  }
  return 0.0;
}

// Green's function of the superattracting basin at the origin (negative
// inside, tending to 0 at the boundary). Accepts the gluing form directly;
// the local degree there is m.
inline double green_origin(const GluingForm& g, Cx z, int budget = 400) {
  const int m = g.m;
  if (m < 2) throw std::invalid_argument("green_origin: origin not superattracting");
  if (z == Cx(0)) return -std::numeric_limits<double>::infinity();
  Cx C = g.gamma;  // the local coefficient: G(z) = C z^m + ...
  for (const Cx& a : g.zeros) C *= -a;
  for (const Cx& b : g.poles) C /= -b;
  double acc = std::log(std::abs(z));
  double scale = 1.0 / m;
  Cx cur = z;
  for (int n = 0; n < budget; ++n) {
    Cx zm(1);
    for (int i = 0; i < m; ++i) zm *= cur;
    const Cx next = g(cur);
    if (next == Cx(0)) return -std::numeric_limits<double>::infinity();
    if (!std::isfinite(std::abs(next)) || std::abs(next) > 1e15) return 0.0;  // not in the basin
    acc += std::log(std::abs(next / zm)) * scale;
    scale /= m;
    cur = next;
    if (std::abs(cur) < 1e-15)
      return acc + scale * m / (m - 1.0) * std::log(std::abs(C));
  }
  return 0.0;
}

inline double green_origin(const MarkedPoly& f, Cx z, int budget = 400) {
  const int m = f.center_degree;
  if (m < 2) throw std::invalid_argument("green_origin: no superattracting marker");
  if (z == Cx(0)) return -std::numeric_limits<double>::infinity();
  const double logC = std::log(std::abs(f.p.c.at(m)));
  double acc = std::log(std::abs(z));
  double scale = 1.0 / m;
  Cx cur = z;
  for (int n = 0; n < budget; ++n) {
    Cx zm(1);
    for (int i = 0; i < m; ++i) zm *= cur;
    const Cx next = f(cur);
    if (next == Cx(0)) return -std::numeric_limits<double>::infinity();
    if (std::abs(next) > 1e15) return 0.0;
    acc += std::log(std::abs(next / zm)) * scale;
    scale /= m;
    cur = next;
    if (std::abs(cur) < 1e-15) return acc + scale * m / (m - 1.0) * logC;
  }
  return 0.0;
}

namespace detail {

// shared telescoping product for a Böttcher coordinate: phi(z) =
// C^{1/(d-1)} z prod_n (f(z_n) / (C z_n^d))^{1/d^{n+1}}, principal branches
// throughout; C is the limit of f(z)/z^d at the access point.
template <typename Map>
Cx boettcher_product(const Map& f, Cx z, int d, Cx C, bool toward_zero, int budget) {
  Cx acc = std::pow(C, 1.0 / (d - 1)) * z;
  double expo = 1.0;
  Cx cur = z;
  for (int n = 0; n < budget; ++n) {
    expo /= d;
    Cx zd(1);
    for (int i = 0; i < d; ++i) zd *= cur;
    const Cx next = f(cur);
    const Cx factor = next / (C * zd);
    if (!(std::abs(factor) > 0.0) || !std::isfinite(std::abs(factor)))
      throw std::runtime_error("boettcher: iterate left the convergence region");
    acc *= std::pow(factor, expo);
    cur = next;
    if (toward_zero ? std::abs(cur) < 1e-14 : std::abs(cur) > 1e12) break;
  }
  return acc;
}

}  // namespace detail

// Böttcher coordinate at the marked superattracting origin, normalized so
// phi(z) = c z + O(z^2) with c the principal (d0-1)-th root of the local
// leading coefficient. For z^3 + (3/2) a z^2 this gives phi'(0) = 3a/2.
inline Cx boettcher_origin(const MarkedPoly& f, Cx z, int budget = 200) {
  const int m = f.center_degree;
  if (m < 2) throw std::invalid_argument("boettcher_origin: no superattracting marker");
  const Cx C = f.p.c.at(m);  // local z^m coefficient at the origin
  // pull z forward until well inside the convergence disk
  Cx cur = z;
  int fwd = 0;
  while (std::abs(cur) > 0.05 && fwd < budget) {
    cur = f(cur);
    ++fwd;
    if (std::abs(cur) > 1e15) throw std::runtime_error("boettcher_origin: not-in-basin");
  }
  if (std::abs(cur) > 0.05) throw std::runtime_error("boettcher_origin: not-in-basin");
  Cx w = detail::boettcher_product(f.p, cur, m, C, true, budget);
  if (fwd == 0) return w;
  // Undo the forward iterations. phi(z) is an m-th root of phi(f(z)), so
  // walk the orbit backwards choosing at each step the root closest to the
  // first-order approximation c * z, which pins the branch.
  std::vector<Cx> orbit(fwd + 1);
  orbit[0] = z;
  for (int i = 1; i <= fwd; ++i) orbit[i] = f(orbit[i - 1]);
  Cx phi = w;
  const Cx cnorm = std::pow(C, 1.0 / (m - 1));
  for (int i = fwd - 1; i >= 0; --i) {
    const Cx target = cnorm * orbit[i];  // first-order guess for phi at this point
    const double r = std::pow(std::abs(phi), 1.0 / m);
    const double base = std::arg(phi) / m;
    Cx best;
    double bestd = 1e300;
    for (int j = 0; j < m; ++j) {
      const Cx cand = std::polar(r, base + 2.0 * M_PI * j / m);
      const double dd = std::abs(cand - target);
      if (dd < bestd) {
        bestd = dd;
        best = cand;
      }
    }
    phi = best;
  }
  return phi;
}

// Böttcher coordinate near infinity for a polynomial, normalized phi ~ c z
// with c the principal (d-1)-th root of the leading coefficient (so the
// identity for monic maps).
inline Cx boettcher_infinity(const Poly& f, Cx z, int budget = 200) {
  const int d = f.degree();
  if (d < 2) throw std::invalid_argument("boettcher_infinity: degree must be >= 2");
  return detail::boettcher_product(f, z, d, f.c.back(), false, budget);
}

inline Cx boettcher_infinity(const GluingForm& g, Cx z, int budget = 200) {
  const int d = g.degree_at_infinity();
  return detail::boettcher_product(g, z, d, g.gamma, false, budget);
}

// Böttcher coordinate near the origin of a gluing form (local degree m,
// local coefficient gamma prod(-zeros)/prod(-poles)).
inline Cx boettcher_origin(const GluingForm& g, Cx z, int budget = 200) {
  Cx C = g.gamma;
  for (const Cx& a : g.zeros) C *= -a;
  for (const Cx& b : g.poles) C /= -b;
  return detail::boettcher_product(g, z, g.m, C, true, budget);
}

struct Equipotential {
  BasinTag basin = BasinTag::Infinity;
  double level = 1.0;
  std::vector<Cx> samples;  // closed polyline (last connects to first)
};

// Level curve of the Green's function by radial bisection: for each of
// n_samples directions, bracket the level between a far radius and a deep
// one and bisect. Valid above the critical potential, where level sets are
// smooth closed curves; below it the radial parameterization would break
// down, so that is rejected up front.
template <typename Map>
Equipotential equipotential(const Map& map, BasinTag basin, double level, int n_samples) {
  if (level <= 0) throw std::invalid_argument("equipotential: level must be positive");
  const std::vector<Cx> crits = map.free_critical_points();
  double crit_pot = 0.0;
  for (const Cx& c : crits) {
    const double gc = basin == BasinTag::Infinity ? green_infinity(map, c)
                                                  : -green_origin(map, c);
    crit_pot = std::max(crit_pot, gc);
  }
  if (level <= crit_pot) throw std::runtime_error("equipotential: level-too-deep");

  Equipotential out;
  out.basin = basin;
  out.level = level;
  out.samples.resize(n_samples);
  for (int i = 0; i < n_samples; ++i) {
    const double th = 2.0 * M_PI * i / n_samples;
    const Cx dir = std::polar(1.0, th);
    auto pot = [&](double r) {
      return basin == BasinTag::Infinity ? green_infinity(map, r * dir)
                                         : -green_origin(map, r * dir);
    };
    // pot(r) increases with r in the Infinity basin and decreases in the
    // Origin basin (measured from the center); bracket accordingly. Points
    // outside the Origin basin report potential 0, which reads as "past the
    // level set", so the outer bracket cannot run away.
    const bool increasing = basin == BasinTag::Infinity;
    double lo, hi;
    if (increasing) {
      hi = 3.0 * std::exp(level);
      while (pot(hi) < level) hi *= 2.0;
      lo = 1e-6;
      while (pot(lo) > level && lo < hi) lo *= 2.0;
    } else {
      lo = 1e-10;
      hi = 1.0;
      while (pot(hi) > level) hi *= 2.0;
    }
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      const bool above = pot(mid) > level;
      if (above == increasing) hi = mid;
      else lo = mid;
      if (hi - lo < 1e-14 * (1.0 + hi)) break;
    }
    out.samples[i] = 0.5 * (lo + hi) * dir;
  }
  return out;
}

}  // namespace polyglue
