#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "polyglue/poly.hpp"

namespace polyglue {

inline constexpr int kMaxRootDegree = 64;

// All complex roots via Aberth-Ehrlich simultaneous iteration, one entry per
// root counted with multiplicity. Multiple roots come back as tight clusters
// (the method cannot do better in floating point); callers that care about
// multiplicity consolidate the clusters themselves.
inline std::vector<Cx> root_all(const Poly& p_in, double tol = 1e-13,
                                int max_iter = 300) {
  Poly p = p_in;
  p.trim();
  if (p.degree() > kMaxRootDegree)
    throw std::invalid_argument("root_all: degree exceeds supported budget");
  if (p.degree() < 1) return {};

  // strip exact roots at the origin first; keeps the iteration well scaled
  std::size_t zero_count = 0;
  while (zero_count + 1 < p.c.size() && p.c[zero_count] == Cx(0)) ++zero_count;
  std::vector<Cx> roots(zero_count, Cx(0));
  if (zero_count > 0) p = Poly(std::vector<Cx>(p.c.begin() + zero_count, p.c.end()));

  const int n = p.degree();
  if (n == 0) return roots;
  // monic scaling for conditioning
  const Cx lead = p.c.back();
  for (Cx& v : p.c) v /= lead;

  if (n == 1) {
    roots.push_back(-p.c[0]);
    return roots;
  }

  // Cauchy-style inclusion radius
  double R = 0.0;
  for (int i = 0; i < n; ++i) R = std::max(R, std::abs(p.c[i]));
  R = 1.0 + R;

  std::vector<Cx> z(n);
  for (int k = 0; k < n; ++k) {
    const double phase = 2.0 * M_PI * (k + 0.25) / n + 0.7;
    z[k] = R * Cx(std::cos(phase), std::sin(phase));
  }

  for (int it = 0; it < max_iter; ++it) {
    double worst = 0.0;
    for (int k = 0; k < n; ++k) {
      const auto [pv, dv] = p.eval_with_derivative(z[k]);
      if (pv == Cx(0)) continue;
      Cx w = (dv == Cx(0)) ? Cx(tol) : pv / dv;
      Cx s(0);
      for (int j = 0; j < n; ++j) {
        if (j == k) continue;
        Cx d = z[k] - z[j];
        if (std::abs(d) < 1e-300) d = Cx(1e-300);
        s += Cx(1) / d;
      }
      const Cx denom = Cx(1) - w * s;
      const Cx step = (std::abs(denom) < 1e-300) ? w : w / denom;
      z[k] -= step;
      worst = std::max(worst, std::abs(step) / (1.0 + std::abs(z[k])));
    }
    if (worst < tol) break;
  }

  // final Newton polish (simple roots converge to full precision; clusters
  // stay as clusters, which is what we want to observe)
  for (int k = 0; k < n; ++k) {
    for (int it = 0; it < 16; ++it) {
      const auto [pv, dv] = p.eval_with_derivative(z[k]);
      if (dv == Cx(0)) break;
      const Cx step = pv / dv;
      z[k] -= step;
      if (std::abs(step) < tol * (1.0 + std::abs(z[k]))) break;
    }
    roots.push_back(z[k]);
  }
  return roots;
}

// Root of p nearest to guess. Solves for the full root set and selects,
// which is far more robust near branch structure than damped Newton from
// the guess (two preimages colliding is the common case on ray ladders).
inline Cx root_near(const Poly& p, Cx guess, double tol = 1e-13) {
  const std::vector<Cx> rs = root_all(p, tol);
  if (rs.empty()) throw std::invalid_argument("root_near: constant polynomial");
  Cx best = rs[0];
  double bd = std::abs(rs[0] - guess);
  for (const Cx& r : rs) {
    const double d = std::abs(r - guess);
    if (d < bd) {
      bd = d;
      best = r;
    }
  }
  return best;
}

struct RootCluster {
  Cx center;        // polished representative
  int multiplicity = 1;
  std::vector<Cx> members;
};

// Consolidate a root list into clusters of nearby roots and polish each
// cluster center. A cluster of size m approximates an m-fold root; the
// center is recovered as a simple root of the (m-1)-th derivative, which
// restores full Newton accuracy there.
inline std::vector<RootCluster> consolidate_roots(const Poly& p,
                                                  const std::vector<Cx>& roots,
                                                  double cluster_eps) {
  std::vector<RootCluster> out;
  std::vector<bool> used(roots.size(), false);
  for (std::size_t i = 0; i < roots.size(); ++i) {
    if (used[i]) continue;
    RootCluster cl;
    cl.members.push_back(roots[i]);
    used[i] = true;
    bool grew = true;
    while (grew) {
      grew = false;
      for (std::size_t j = 0; j < roots.size(); ++j) {
        if (used[j]) continue;
        for (const Cx& m : cl.members) {
          if (std::abs(roots[j] - m) < cluster_eps * (1.0 + std::abs(m))) {
            cl.members.push_back(roots[j]);
            used[j] = true;
            grew = true;
            break;
          }
        }
      }
    }
    cl.multiplicity = static_cast<int>(cl.members.size());
    Cx mean(0);
    for (const Cx& m : cl.members) mean += m;
    mean /= static_cast<double>(cl.multiplicity);
    cl.center = mean;
    if (cl.multiplicity > 1) {
      Poly d = p;
      for (int k = 1; k < cl.multiplicity; ++k) d = d.derivative();
      for (int it = 0; it < 60; ++it) {
        const auto [pv, dv] = d.eval_with_derivative(cl.center);
        if (dv == Cx(0)) break;
        const Cx step = pv / dv;
        cl.center -= step;
        if (std::abs(step) < 1e-14 * (1.0 + std::abs(cl.center))) break;
      }
    }
    out.push_back(std::move(cl));
  }
  return out;
}

}  // namespace polyglue
