#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "polyglue/maps.hpp"
#include "polyglue/poly.hpp"
#include "polyglue/roots.hpp"

namespace polyglue {

// Closed polyline separating the basin of 0 from the basin of infinity,
// obtained by pulling a round start circle back through the map until the
// shape stops moving. The limit is the common boundary of the two basins.
struct GluingCurve {
  std::vector<Cx> samples;  // closed: the last sample connects back to the first
  double hausdorff_residual = 0.0;       // distance between the last two pullbacks
  int iteration_count = 0;               // pullback levels actually performed
  int cover_degree = 0;                  // the map covers the final curve this many times
  std::vector<double> residual_history;  // one Hausdorff distance per level
};

// Winding number of a closed polyline around p, by summing turn angles.
// Meaningful only when p stays clear of the polyline.
inline int polyline_winding(const std::vector<Cx>& pts, Cx p) {
  double total = 0.0;
  const std::size_t n = pts.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Cx a = pts[i] - p;
    const Cx b = pts[(i + 1) % n] - p;
    if (std::abs(a) < 1e-300 || std::abs(b) < 1e-300) continue;
    total += std::arg(b / a);
  }
  return static_cast<int>(std::lround(total / (2.0 * M_PI)));
}

// Distance from p to a closed polyline, segments included (not just vertices).
inline double polyline_distance(Cx p, const std::vector<Cx>& pts) {
  const std::size_t n = pts.size();
  if (n == 0) throw std::invalid_argument("polyline_distance: empty polyline");
  double best = std::abs(p - pts[0]);
  for (std::size_t i = 0; i < n; ++i) {
    const Cx a = pts[i];
    const Cx b = pts[(i + 1) % n];
    const Cx ab = b - a;
    const double len2 = std::norm(ab);
    double t = 0.0;
    if (len2 > 0.0) {
      t = ((p - a).real() * ab.real() + (p - a).imag() * ab.imag()) / len2;
      t = std::clamp(t, 0.0, 1.0);
    }
    best = std::min(best, std::abs(p - (a + t * ab)));
  }
  return best;
}

// Symmetric Hausdorff distance between two closed polylines, measured from
// the samples of each to the segments of the other.
inline double hausdorff_distance(const std::vector<Cx>& a, const std::vector<Cx>& b) {
  double h = 0.0;
  for (const Cx& p : a) h = std::max(h, polyline_distance(p, b));
  for (const Cx& p : b) h = std::max(h, polyline_distance(p, a));
  return h;
}

namespace detail {

// Preimages of one target value w, i.e. roots of num(x) - w den(x). The
// degree (and so the sheet count) is m + k for every finite nonzero w.
inline std::vector<Cx> curve_preimages(const Poly& num, const Poly& den, Cx w) {
  return root_all(num - den * w);
}

}  // namespace detail

// Pullback tracing of the curve along which the two basins meet. Starting
// from a round circle with the poles inside and the zeros outside, each level
// replaces the curve by the component of its preimage that still separates 0
// from infinity. All m + k preimage sheets are marched around the curve by
// continuity; the sheets close up into cycles after a full loop, each cycle
// is one preimage component, and the separating one is recognized by winding
// once around the origin. A component covering the current curve c times
// closes after c loops, and the parameterization stays aligned through
// G(curve[i]) = prev[(c i) mod n]. Early levels can have any c between 1 and
// m + k (it counts zeros minus poles enclosed so far); once the curve has
// converged combinatorially it settles at m - l.
//
// Sampling must be fine enough that distinct sheets stay separated by more
// than one marching step; when they cannot be told apart (which happens
// exactly when the curve runs into a critical point) tracing stops with
// "curve-through-critical-point" rather than guessing a branch.
//
// The aligned parameterization makes the iteration exactly stationary once
// converged, which is what lets the residual reach rounding level. Its price
// is uneven spacing: near a parabolic boundary point samples thin out
// logarithmically, so the polyline may take one long chord there even though
// every sample sits on the pulled-back curve to root-finding accuracy.
inline GluingCurve trace_gluing_curve(const GluingForm& G, int iterations, int n_samples,
                                      double tol = 1e-12) {
  if (iterations < 1 || n_samples < 16)
    throw std::invalid_argument("trace_gluing_curve: need iterations >= 1 and n_samples >= 16");
  if (G.m < 2 || G.degree_at_infinity() < 2)
    throw std::invalid_argument(
        "trace_gluing_curve: basins at 0 and infinity must both be superattracting");
  const int d0 = G.m - G.l();
  if (d0 < 1)
    throw std::invalid_argument("trace_gluing_curve: pole count must stay below the local degree at 0");

  const Poly num = G.numerator();
  const Poly den = G.denominator();
  const int sheets = G.m + G.k();

  // start circle: geometric mean radius between the outermost pole and the
  // innermost zero (or a plain guess when one side is empty)
  double rin = 0.0;
  double rout = std::numeric_limits<double>::infinity();
  for (const Cx& b : G.poles) rin = std::max(rin, std::abs(b));
  for (const Cx& a : G.zeros) rout = std::min(rout, std::abs(a));
  double r = 1.0;
  if (G.l() > 0 && G.k() > 0)
    r = std::sqrt(rin * rout);
  else if (G.k() > 0)
    r = 0.5 * rout;
  else if (G.l() > 0)
    r = 2.0 * rin;

  std::vector<Cx> cur(n_samples);
  for (int i = 0; i < n_samples; ++i)
    cur[i] = std::polar(r, 2.0 * M_PI * static_cast<double>(i) / n_samples);

  const std::vector<Cx> crit = G.critical_points();
  auto near_critical = [&crit](Cx z) {
    for (const Cx& c : crit)
      if (std::abs(z - c) < 1e-6 * (1.0 + std::abs(c))) return true;
    return false;
  };
  for (const Cx& z : cur)
    if (near_critical(z))
      throw std::runtime_error("trace_gluing_curve: curve-through-critical-point");

  // the image of the start circle must wind m - l times around the origin;
  // anything else means the circle failed to separate the zeros from the poles
  {
    std::vector<Cx> img(cur.size());
    for (std::size_t i = 0; i < cur.size(); ++i) img[i] = G(cur[i]);
    if (polyline_winding(img, Cx(0)) != d0)
      throw std::invalid_argument(
          "trace_gluing_curve: start circle does not separate the zeros from the poles");
  }

  GluingCurve out;

  for (int level = 1; level <= iterations; ++level) {
    // march all sheets once around the curve
    std::vector<std::vector<Cx>> track(sheets, std::vector<Cx>(n_samples));
    std::vector<Cx> sheet = detail::curve_preimages(num, den, cur[0]);
    if (static_cast<int>(sheet.size()) != sheets)
      throw std::runtime_error("trace_gluing_curve: preimage sheet count is not m + k");
    for (int b = 0; b < sheets; ++b) track[b][0] = sheet[b];

    for (int s = 1; s <= n_samples; ++s) {
      const std::vector<Cx> roots = detail::curve_preimages(num, den, cur[s % n_samples]);
      std::vector<int> claimed(roots.size(), -1);
      for (int b = 0; b < sheets; ++b) {
        int best = 0;
        double bd = std::abs(roots[0] - sheet[b]);
        for (std::size_t j = 1; j < roots.size(); ++j) {
          const double dj = std::abs(roots[j] - sheet[b]);
          if (dj < bd) {
            bd = dj;
            best = static_cast<int>(j);
          }
        }
        if (claimed[best] != -1)
          throw std::runtime_error("trace_gluing_curve: curve-through-critical-point");
        claimed[best] = b;
        sheet[b] = roots[best];
        if (near_critical(sheet[b]))
          throw std::runtime_error("trace_gluing_curve: curve-through-critical-point");
        if (s < n_samples) track[b][s] = sheet[b];
      }
    }

    // sheet[b] now continues track b past a full loop; matching it against the
    // sheet starts gives the monodromy permutation, whose cycles are the
    // connected components of the preimage
    std::vector<int> sigma(sheets, -1);
    {
      std::vector<char> used(sheets, 0);
      for (int b = 0; b < sheets; ++b) {
        int best = -1;
        double bd = std::numeric_limits<double>::infinity();
        for (int j = 0; j < sheets; ++j) {
          if (used[j]) continue;
          const double dj = std::abs(track[j][0] - sheet[b]);
          if (dj < bd) {
            bd = dj;
            best = j;
          }
        }
        sigma[b] = best;
        used[best] = 1;
      }
    }

    // assemble each component and keep the one winding once around the origin
    std::vector<Cx> comp;
    bool found = false;
    std::vector<char> visited(sheets, 0);
    for (int b0 = 0; b0 < sheets && !found; ++b0) {
      if (visited[b0]) continue;
      std::vector<int> cycle;
      for (int b = b0; !visited[b]; b = sigma[b]) {
        visited[b] = 1;
        cycle.push_back(b);
      }
      std::vector<Cx> cand;
      cand.reserve(cycle.size() * n_samples);
      for (int b : cycle)
        cand.insert(cand.end(), track[b].begin(), track[b].end());
      if (polyline_winding(cand, Cx(0)) == 1) {
        // the cycle's start sheets all parameterize the same component; pick
        // the rotation that keeps sample 0 near its previous position
        int q0 = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (std::size_t q = 0; q < cycle.size(); ++q) {
          const double dq = std::abs(track[cycle[q]][0] - cur[0]);
          if (dq < bd) {
            bd = dq;
            q0 = static_cast<int>(q);
          }
        }
        std::rotate(cand.begin(), cand.begin() + q0 * n_samples, cand.end());
        comp = std::move(cand);
        out.cover_degree = static_cast<int>(cycle.size());
        found = true;
      }
    }
    if (!found)
      throw std::runtime_error("trace_gluing_curve: no separating component");

    // stride-c downsampling keeps n_samples points with aligned parameterization
    const std::size_t stride = comp.size() / n_samples;
    std::vector<Cx> next(n_samples);
    for (int i = 0; i < n_samples; ++i) next[i] = comp[stride * i];

    const double res = hausdorff_distance(cur, next);
    out.residual_history.push_back(res);
    out.iteration_count = level;
    cur = std::move(next);
    if (res < tol) break;
  }

  out.samples = std::move(cur);
  out.hausdorff_residual = out.residual_history.back();
  return out;
}

// sample_index, re, im rows; same dialect as the ray export
inline void write_curve_csv(std::ostream& os, const GluingCurve& curve) {
  os << "sample_index, re, im\n" << std::setprecision(17);
  for (std::size_t i = 0; i < curve.samples.size(); ++i)
    os << i << ", " << curve.samples[i].real() << ", " << curve.samples[i].imag() << "\n";
}

}  // namespace polyglue
