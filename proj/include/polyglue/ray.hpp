#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "polyglue/angle.hpp"
#include "polyglue/maps.hpp"
#include "polyglue/poly.hpp"
#include "polyglue/potential.hpp"
#include "polyglue/roots.hpp"

namespace polyglue {

// A traced gradient ray of the basin potential. Samples run from the
// starting level down toward the Julia set, one per level of the geometric
// schedule; potentials[i] is the (unsigned) potential of samples[i], so the
// sequence is strictly decreasing. landing_point is the tail estimate and is
// only set when landed is true.
struct Ray {
  BasinTag basin = BasinTag::Infinity;
  RationalAngle angle;
  std::vector<Cx> samples;
  std::vector<double> potentials;
  bool landed = false;
  std::optional<Cx> landing_point;
  std::string diagnostic;  // empty when the trace is clean
};

struct RayOpts {
  double s0 = 4.0;             // starting potential
  int max_levels = 2000;
  double s_floor = 1e-280;     // stop before the potential underflows
  double eps_land = 1e-10;     // hard landing: consecutive samples this close
  double eps_land_slow = 1e-6; // relaxed bound for parabolic tails (on extrapolants)
  double postcritical_tol = 1e-6;
  int postcritical_budget = 500;
};

namespace detail {

// Everything the ladder needs to know about a map/basin pair: the algebraic
// pull equation, the angle multiplier on the relevant circle, and the
// normalization of the Böttcher coordinate used to seed and to polish.
struct RayDomain {
  Poly num, den;          // preimages of t solve num(x) - t den(x) = 0
  int d = 2;              // circle degree: angles map by multiplication by d
  Cx scale = Cx(1);       // phi(z) = scale * z + O(z^2 or 1/z)
  bool internal = false;  // seeds at modulus e^{-s} instead of e^{s}
  std::function<Cx(Cx)> boettcher;    // full coordinate, for seed polish
  std::vector<Cx> critical_points;    // free criticals, for orbit rejection
  std::function<Cx(Cx)> eval;

  Cx seed_guess(double s, double theta) const {
    const double mod = std::exp(internal ? -s : s);
    return std::polar(mod, 2.0 * M_PI * theta) / scale;
  }

  // Böttcher-polished seed: Newton on phi(z) = w with a numeric derivative.
  Cx seed(double s, double theta) const {
    const Cx w = std::polar(std::exp(internal ? -s : s), 2.0 * M_PI * theta);
    Cx z = w / scale;
    for (int it = 0; it < 8; ++it) {
      Cx err, dphi;
      try {
        err = boettcher(z) - w;
        const double h = 1e-6 * (std::abs(z) + 1.0);
        dphi = (boettcher(z + h) - boettcher(z - h)) / (2.0 * h);
      } catch (const std::exception&) {
        return w / scale;  // fall back to the first-order seed
      }
      if (std::abs(err) < 1e-13 * std::abs(w)) break;
      if (!(std::abs(dphi) > 0)) break;
      z -= err / dphi;
    }
    return z;
  }

  Cx pull(Cx target, Cx guess) const {
    return root_near(num - den * target, guess);
  }
};

inline RayDomain make_domain(const MarkedPoly& f, BasinTag basin) {
  RayDomain dom;
  dom.num = f.p;
  dom.den = Poly::constant(Cx(1));
  dom.critical_points = f.free_critical_points();
  dom.eval = [p = f.p](Cx z) { return p(z); };
  if (basin == BasinTag::Infinity) {
    const int d = f.degree();
    if (d < 2) throw std::invalid_argument("trace_ray: degree must be >= 2");
    dom.d = d;
    dom.scale = std::pow(f.p.c.back(), 1.0 / (d - 1));
    dom.internal = false;
    dom.boettcher = [p = f.p](Cx z) { return boettcher_infinity(p, z); };
  } else if (basin == BasinTag::Origin) {
    const int m = f.center_degree;
    if (m < 2) throw std::invalid_argument("trace_ray: no superattracting marker at the origin");
    dom.d = m;
    dom.scale = std::pow(f.p.c.at(m), 1.0 / (m - 1));
    dom.internal = true;
    dom.boettcher = [f](Cx z) { return boettcher_origin(f, z); };
  } else {
    throw std::invalid_argument("trace_ray: unsupported basin");
  }
  return dom;
}

inline RayDomain make_domain(const GluingForm& g, BasinTag basin) {
  RayDomain dom;
  dom.num = g.numerator();
  dom.den = g.denominator();
  dom.critical_points = g.free_critical_points();
  dom.eval = [g](Cx z) { return g(z); };
  if (basin == BasinTag::Infinity) {
    const int d = g.degree_at_infinity();
    if (d < 2) throw std::invalid_argument("trace_ray: not superattracting at infinity");
    dom.d = d;
    dom.scale = std::pow(g.gamma, 1.0 / (d - 1));
    dom.internal = false;
    dom.boettcher = [g](Cx z) { return boettcher_infinity(g, z); };
  } else if (basin == BasinTag::Origin) {
    const int m = g.m;
    if (m < 2) throw std::invalid_argument("trace_ray: origin not superattracting");
    Cx C = g.gamma;
    for (const Cx& a : g.zeros) C *= -a;
    for (const Cx& b : g.poles) C /= -b;
    dom.d = m;
    dom.scale = std::pow(C, 1.0 / (m - 1));
    dom.internal = true;
    dom.boettcher = [g](Cx z) { return boettcher_origin(g, z); };
  } else {
    throw std::invalid_argument("trace_ray: unsupported basin");
  }
  return dom;
}

// One parallel pullback pass over a slot array. next(j) tells each slot
// where its image lives; for rational angles the array is the angle orbit
// and wraps, for the open (irrational) ladder it shifts and shrinks.
inline void ladder_level(const RayDomain& dom, std::vector<Cx>& slots,
                         const std::function<int(int)>& next) {
  std::vector<Cx> fresh(slots.size());
  for (std::size_t j = 0; j < slots.size(); ++j)
    fresh[j] = dom.pull(slots[next(static_cast<int>(j))], slots[j]);
  slots = std::move(fresh);
}

// Tail limit estimate from the last four samples. Geometric tails (repelling
// landings, ratio bounded away from 1) get the exact geometric sum. Tails
// whose ratio creeps up toward 1 are the parabolic ones: there the error
// decays like a power L^-sigma of the level index (sigma = 1 at a double
// point, 1/2 at a triple point), so fit sigma from how the ratio approaches
// 1 and sum the fitted tail. Returns nothing when the data fit neither.
inline std::optional<Cx> extrapolate_tail(const std::vector<Cx>& z) {
  const std::size_t n = z.size();
  if (n < 4) return std::nullopt;
  const Cx d1 = z[n - 3] - z[n - 4];
  const Cx d2 = z[n - 2] - z[n - 3];
  const Cx d3 = z[n - 1] - z[n - 2];
  if (std::abs(d3) == 0.0) return z[n - 1];
  if (std::abs(d1) == 0.0 || std::abs(d2) == 0.0) return std::nullopt;
  const Cx r2 = d2 / d1, r3 = d3 / d2;
  if (std::abs(r3) >= 1.02) return std::nullopt;  // not settling
  if (std::abs(r3) < 0.9) return z[n - 1] + d3 * r3 / (Cx(1) - r3);
  const double w2 = std::abs(Cx(1) - r2), w3 = std::abs(Cx(1) - r3);
  if (w3 < 1e-12) return std::nullopt;
  if (w2 - w3 < 1e-3 * w3)
    return z[n - 1] + d3 * r3 / (Cx(1) - r3);  // steady ratio: still geometric
  // power law: 1 - r at level L behaves like (1+sigma)/L
  const double Lhat = w3 / (w2 - w3);
  const double sig = Lhat * w3 - 1.0;
  if (!(sig > 0.05) || !std::isfinite(sig)) return std::nullopt;
  return z[n - 1] + d3 * (Lhat / sig);
}

}  // namespace detail

// Trace the potential-gradient ray at a rational angle. The ladder keeps one
// live point per angle in the forward orbit of `angle` (all at a common
// potential), and each level pulls every slot back through the map with the
// preimage chosen nearest to the slot's previous position. This solves the
// preimage equation exactly per level, which stays locked to the correct
// branch even where neighboring preimages nearly collide.
//
// target_potential > 0 stops the trace at that depth; 0 traces to landing.
// Landing is declared when consecutive samples agree to eps_land, or, for
// slowly converging (parabolic) tails, when the extrapolated limit is stable
// to eps_land_slow; otherwise the ray is returned truncated with a
// diagnostic.
template <typename Map>
Ray trace_ray(const Map& map, BasinTag basin, RationalAngle angle,
              double target_potential = 0.0, const RayOpts& opts = {}) {
  const detail::RayDomain dom = detail::make_domain(map, basin);
  const AngleOrbit ao = orbit(angle, dom.d);
  const int q = ao.preperiod, p = ao.period;
  const int S = q + p;

  Ray ray;
  ray.basin = basin;
  ray.angle = angle;

  double s = opts.s0;
  std::vector<Cx> slots(S);
  for (int j = 0; j < S; ++j) slots[j] = dom.seed(s, ao.points[j].value());
  auto next = [q, S](int j) { return j + 1 < S ? j + 1 : q; };

  ray.samples.push_back(slots[0]);
  ray.potentials.push_back(s);

  std::optional<Cx> last_extrap;
  int stable = 0;
  for (int level = 0; level < opts.max_levels; ++level) {
    detail::ladder_level(dom, slots, next);
    s /= dom.d;
    ray.samples.push_back(slots[0]);
    ray.potentials.push_back(s);

    if (target_potential > 0.0 && s <= target_potential) {
      ray.landed = false;
      return ray;
    }

    const std::size_t n = ray.samples.size();
    const double step = std::abs(ray.samples[n - 1] - ray.samples[n - 2]);
    const double prev_step = n >= 3 ? std::abs(ray.samples[n - 2] - ray.samples[n - 3]) : 0.0;
    const double ratio = prev_step > 0.0 ? step / prev_step : 0.0;
    if (target_potential <= 0.0 && step < opts.eps_land) {
      ray.landed = true;
      ray.landing_point = ray.samples.back();
      // a clean geometric tail can be summed for a couple of extra digits;
      // the guard keeps rounding noise in the tiny steps from leaking in
      const auto ex = detail::extrapolate_tail(ray.samples);
      if (ex && ratio < 0.9 && std::abs(*ex - ray.samples.back()) < 10.0 * step + opts.eps_land)
        ray.landing_point = *ex;
      break;
    }
    // slow tails (step ratio creeping up to 1: the parabolic approaches)
    // are accepted once the extrapolated limit has settled
    if (target_potential <= 0.0 && step < 1e-3 && ratio > 0.9) {
      const auto ex = detail::extrapolate_tail(ray.samples);
      if (ex && last_extrap) {
        if (std::abs(*ex - *last_extrap) < opts.eps_land_slow) ++stable;
        else stable = 0;
      }
      last_extrap = ex ? ex : last_extrap;
      if (stable >= 4 && step < 1e-4) {
        ray.landed = true;
        ray.landing_point = *last_extrap;
        ray.diagnostic = "slow-landing";
        break;
      }
    }
    if (s < opts.s_floor) break;
  }
  if (!ray.landed && target_potential <= 0.0)
    ray.diagnostic = "no-landing-within-budget";

  // flag landings that collide with the forward critical orbit: such angles
  // are rejected by consumers that need rays with well-defined landings
  if (ray.landed && ray.landing_point) {
    for (const Cx& c : dom.critical_points) {
      Cx z = c;
      for (int i = 0; i < opts.postcritical_budget; ++i) {
        if (std::abs(z - *ray.landing_point) < opts.postcritical_tol) {
          ray.diagnostic = "postcritical-landing";
          break;
        }
        z = dom.eval(z);
        const double az = std::abs(z);
        if (!std::isfinite(az) || az > 1e12 || az < 1e-14) break;
      }
      if (ray.diagnostic == "postcritical-landing") break;
    }
  }
  return ray;
}

// Identify the periodic point a ray converges to. The ray tail seeds a
// Newton iteration on f^p(z) = z (p = exact period of the angle); the
// multiplier is then read off along the actual cycle and classified. For a
// near-parabolic result with a small period the multiplicity-aware periodic
// point solver is consulted so a genuinely double point reports multiplier 1
// rather than two half-resolved simple points.
//
// Truncated rays are accepted too: a parabolic point of high petal count
// attracts its ray so slowly that no practical trace budget resolves the
// tail, yet Newton from the last sample still identifies the point. Rays
// whose tail does not converge to a periodic point raise "no-landing".
template <typename Map>
FixedPointInfo landing_point(const Ray& ray, const Map& map) {
  if (ray.samples.empty())
    throw std::invalid_argument("landing_point: ray has no samples");
  const detail::RayDomain dom = detail::make_domain(map, ray.basin);
  const AngleOrbit ao = orbit(ray.angle, dom.d);
  const int p = ao.period;

  auto iterate_with_derivative = [&](Cx z, int n) {
    Cx v = z, dv = Cx(1);
    for (int i = 0; i < n; ++i) {
      const auto [num, dnum] = dom.num.eval_with_derivative(v);
      const auto [den, dden] = dom.den.eval_with_derivative(v);
      dv *= (dnum * den - num * dden) / (den * den);
      v = num / den;
    }
    return std::pair<Cx, Cx>(v, dv);
  };

  Cx z = ray.landing_point ? *ray.landing_point : ray.samples.back();
  for (int it = 0; it < 120; ++it) {
    const auto [v, dv] = iterate_with_derivative(z, p);
    const Cx g = v - z;
    const Cx gp = dv - Cx(1);
    if (std::abs(gp) < 1e-9) break;  // (near-)parabolic: Newton step explodes
    const Cx step = g / gp;
    z -= step;
    if (std::abs(step) < 1e-14 * (1.0 + std::abs(z))) break;
  }
  if (std::abs(iterate_with_derivative(z, p).first - z) > 1e-6 * (1.0 + std::abs(z)))
    throw std::runtime_error("landing_point: no-landing");

  // exact period: smallest divisor of the orbit that returns to z
  int period = p;
  for (int qq = 1; qq <= p; ++qq) {
    if (p % qq != 0) continue;
    if (std::abs(iterate_with_derivative(z, qq).first - z) < 1e-6) {
      period = qq;
      break;
    }
  }

  FixedPointInfo info;
  info.location = z;
  info.period = period;
  info.multiplier = iterate_with_derivative(z, period).second;
  info.kind = classify_multiplier(info.multiplier);

  // near multiplier 1 the simple Newton above cannot separate a genuine
  // double point from a pair of simple ones; defer to the cluster-aware
  // periodic point solver when the composition degree allows it
  const bool near_parabolic = std::abs(info.multiplier - Cx(1)) < 1e-3;
  const double comp_degree = std::pow(static_cast<double>(dom.num.degree()), period);
  if (near_parabolic && comp_degree <= 4096) {
    auto pts = periodic_points(map, period);
    const FixedPointInfo* best = nullptr;
    double bestd = 1e300;
    for (const auto& fp : pts) {
      if (fp.at_infinity) continue;
      const double dd = std::abs(fp.location - z);
      if (dd < bestd) {
        bestd = dd;
        best = &fp;
      }
    }
    if (best && bestd < 1e-2) info = *best;
  }

  if (info.kind == CycleKind::Attracting || info.kind == CycleKind::Superattracting)
    throw std::runtime_error("landing_point: inconsistent-landing");
  return info;
}

// Open-ladder trace at an arbitrary (double) angle, used by the crash-angle
// scan. Runs exactly `levels` pullback passes so the tail sits at potential
// s0 / d^levels; the slot array shifts down one per level.
namespace detail {

inline Cx ray_point_at(const RayDomain& dom, double theta, double s0, int levels) {
  std::vector<Cx> slots(levels + 1);
  double th = theta;
  for (int j = 0; j <= levels; ++j) {
    // first-order seeds suffice here: the ladder corrects them within a few
    // levels, and this routine runs thousands of times inside the angle scan
    slots[j] = dom.seed_guess(s0, th);
    th = th * dom.d;
    th -= std::floor(th);
  }
  for (int lv = 0; lv < levels; ++lv) {
    const int valid = levels + 1 - lv;
    std::vector<Cx> fresh(valid - 1);
    for (int j = 0; j + 1 < valid; ++j) fresh[j] = dom.pull(slots[j + 1], slots[j]);
    slots = std::move(fresh);
  }
  return slots[0];
}

}  // namespace detail

struct CrashAngle {
  double angle = 0.0;   // external angle whose ray runs into the critical point
  double dip = 0.0;     // residual distance at the refined angle
  Cx critical_point;
};

// Find the external angles of rays that crash into escaping critical points.
// The ray at the crash angle, traced to the critical point's own potential,
// ends exactly at the critical point; nearby angles miss it by ~ sqrt of the
// angle offset. So scan a fine grid of angles, locate the sharp dips of
// |tail - critical point|, and refine each by golden-section search.
inline std::vector<CrashAngle> critical_ray_angles(const MarkedPoly& f, int n_scan = 4096,
                                                   double accept_dip = 1e-3) {
  const detail::RayDomain dom = detail::make_domain(f, BasinTag::Infinity);
  std::vector<CrashAngle> out;
  for (const Cx& c : f.free_critical_points()) {
    const double gc = green_infinity(f, c);
    if (gc <= 0.0)
      throw std::runtime_error("critical_ray_angles: critical point does not escape");
    // choose the level count so the schedule lands exactly on potential gc
    const int levels = static_cast<int>(std::ceil(std::log(4.0 / gc) / std::log(double(dom.d))));
    const double s0 = gc * std::pow(double(dom.d), levels);

    auto dip = [&](double th) {
      return std::abs(detail::ray_point_at(dom, th - std::floor(th), s0, levels) - c);
    };

    std::vector<double> vals(n_scan);
    for (int i = 0; i < n_scan; ++i) vals[i] = dip(double(i) / n_scan);

    // local minima, most promising first
    std::vector<int> minima;
    for (int i = 0; i < n_scan; ++i) {
      const double v = vals[i];
      if (v <= vals[(i + 1) % n_scan] && v <= vals[(i + n_scan - 1) % n_scan])
        minima.push_back(i);
    }
    std::sort(minima.begin(), minima.end(),
              [&](int a, int b) { return vals[a] < vals[b]; });
    if (minima.size() > 8) minima.resize(8);

    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int idx : minima) {
      double a = (idx - 1.0) / n_scan, b = (idx + 1.0) / n_scan;
      double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
      double f1 = dip(x1), f2 = dip(x2);
      while (b - a > 1e-13) {
        if (f1 < f2) {
          b = x2; x2 = x1; f2 = f1;
          x1 = b - gr * (b - a);
          f1 = dip(x1);
        } else {
          a = x1; x1 = x2; f1 = f2;
          x2 = a + gr * (b - a);
          f2 = dip(x2);
        }
      }
      const double th = 0.5 * (a + b) - std::floor(0.5 * (a + b));
      const double v = dip(th);
      if (v < accept_dip) {
        bool dup = false;
        for (const auto& ca : out)
          if (std::abs(ca.angle - th) < 1e-6 || std::abs(std::abs(ca.angle - th) - 1.0) < 1e-6)
            dup = true;
        if (!dup) out.push_back({th, v, c});
      }
    }
  }
  std::sort(out.begin(), out.end(),
            [](const CrashAngle& a, const CrashAngle& b) { return a.angle < b.angle; });
  return out;
}

// Serialize rays sample by sample. One row per sample; the header line and
// column order are part of the format.
inline void write_ray_csv(std::ostream& os, const std::vector<Ray>& rays) {
  os << "basin, angle_num, angle_den, sample_index, re, im\n";
  os << std::setprecision(17);
  for (const Ray& r : rays) {
    for (std::size_t i = 0; i < r.samples.size(); ++i) {
      os << to_string(r.basin) << ", " << r.angle.num << ", " << r.angle.den << ", " << i
         << ", " << r.samples[i].real() << ", " << r.samples[i].imag() << "\n";
    }
  }
}

}  // namespace polyglue
