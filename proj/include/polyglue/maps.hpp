#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "polyglue/poly.hpp"
#include "polyglue/roots.hpp"

namespace polyglue {

enum class BasinTag { Infinity, Origin, OtherCycle };

inline std::string to_string(BasinTag t) {
  switch (t) {
    case BasinTag::Infinity: return "infinity";
    case BasinTag::Origin: return "origin";
    default: return "other-cycle";
  }
}

// Polynomial together with its marked superattracting data: the basin at
// infinity (always present, local degree = deg) and optionally a finite
// superattracting fixed point (for us: the origin with local degree d0).
struct MarkedPoly {
  Poly p;
  Cx basin_center = Cx(0);
  int center_degree = 0;  // 0 means no finite marker

  int degree() const { return p.degree(); }

  Cx operator()(Cx z) const { return p(z); }

  // z^d
  static MarkedPoly power_map(int d) {
    std::vector<Cx> c(d + 1, Cx(0));
    c[d] = Cx(1);
    MarkedPoly m{Poly(std::move(c)), Cx(0), d};
    return m;
  }

  // z^3 + (3/2) a z^2: cubic with a superattracting double point at the
  // origin and one free critical point at -a.
  static MarkedPoly cubic_superattracting_origin(Cx a) {
    return MarkedPoly{Poly({Cx(0), Cx(0), 1.5 * a, Cx(1)}), Cx(0), 2};
  }

  std::vector<Cx> critical_points() const { return root_all(p.derivative()); }

  // critical points other than the marked basin center
  std::vector<Cx> free_critical_points(double tol = 1e-9) const {
    std::vector<Cx> out;
    for (const Cx& c : critical_points())
      if (center_degree == 0 || std::abs(c - basin_center) > tol) out.push_back(c);
    return out;
  }
};

// Rational map in gluing normal form:
//    G(z) = gamma z^m (z - zeros[0])...(z - zeros[k-1]) / (z - poles[0])...(z - poles[l-1])
// with 0 and infinity superattracting (local degrees m and m + k - l).
struct GluingForm {
  Cx gamma = Cx(1);
  int m = 2;
  std::vector<Cx> zeros;
  std::vector<Cx> poles;

  int k() const { return static_cast<int>(zeros.size()); }
  int l() const { return static_cast<int>(poles.size()); }
  int degree_at_infinity() const { return m + k() - l(); }
  int degree() const { return std::max(m + k(), l()); }

  Poly numerator() const {
    std::vector<Cx> zm(m + 1, Cx(0));
    zm[m] = gamma;
    return Poly(std::move(zm)) * Poly::from_roots(Cx(1), zeros);
  }

  Poly denominator() const { return Poly::from_roots(Cx(1), poles); }

  Cx operator()(Cx z) const {
    Cx num = gamma;
    for (int i = 0; i < m; ++i) num *= z;
    for (const Cx& a : zeros) num *= (z - a);
    Cx den(1);
    for (const Cx& b : poles) den *= (z - b);
    return num / den;
  }

  // G'(z) computed from the quotient rule on the factored parts; stable at
  // zeros of G where the logarithmic derivative blows up.
  Cx derivative(Cx z) const {
    const auto [n, dn] = numerator().eval_with_derivative(z);
    const auto [d, dd] = denominator().eval_with_derivative(z);
    return (dn * d - n * dd) / (d * d);
  }

  // z G'(z)/G(z); this is the fixed-point multiplier when z is fixed,
  // and it is cheap and accurate away from zeros/poles.
  Cx log_derivative_times_z(Cx z) const {
    Cx s(static_cast<double>(m));
    for (const Cx& a : zeros) s += z / (z - a);
    for (const Cx& b : poles) s -= z / (z - b);
    return s;
  }

  // conjugate by z -> lambda z: same dynamics viewed in rescaled coordinates
  GluingForm rescale(Cx lambda) const {
    GluingForm g = *this;
    g.gamma = gamma * std::pow(lambda, m - 1 + k() - l());
    for (Cx& a : g.zeros) a /= lambda;
    for (Cx& b : g.poles) b /= lambda;
    return g;
  }

  // Finite critical points (the Wronskian of numerator and denominator),
  // with the m-1 copies sitting at the origin stripped when requested.
  std::vector<Cx> critical_points(bool include_origin_copies = false) const {
    const Poly n = numerator(), d = denominator();
    Poly w = n.derivative() * d - n * d.derivative();
    if (!include_origin_copies) {
      // factor out z^{m-1}
      std::size_t s = 0;
      while (s + 1 < w.c.size() && std::abs(w.c[s]) < 1e-13 &&
             s < static_cast<std::size_t>(m - 1))
        ++s;
      w = Poly(std::vector<Cx>(w.c.begin() + s, w.c.end()));
    }
    return root_all(w);
  }

  std::vector<Cx> free_critical_points(double tol = 1e-9) const {
    std::vector<Cx> out;
    for (const Cx& c : critical_points())
      if (std::abs(c) > tol) out.push_back(c);
    return out;
  }
};

inline void to_json(nlohmann::json& j, const GluingForm& g) {
  j = nlohmann::json{{"gamma", {g.gamma.real(), g.gamma.imag()}},
                     {"m", g.m},
                     {"zeros", nlohmann::json::array()},
                     {"poles", nlohmann::json::array()}};
  for (const Cx& a : g.zeros) j["zeros"].push_back({a.real(), a.imag()});
  for (const Cx& b : g.poles) j["poles"].push_back({b.real(), b.imag()});
}

inline void from_json(const nlohmann::json& j, GluingForm& g) {
  g.gamma = Cx(j.at("gamma")[0].get<double>(), j.at("gamma")[1].get<double>());
  g.m = j.at("m").get<int>();
  g.zeros.clear();
  g.poles.clear();
  for (const auto& a : j.at("zeros")) g.zeros.emplace_back(a[0].get<double>(), a[1].get<double>());
  for (const auto& b : j.at("poles")) g.poles.emplace_back(b[0].get<double>(), b[1].get<double>());
}

inline void to_json(nlohmann::json& j, const Poly& p) {
  j = nlohmann::json{{"coeffs", nlohmann::json::array()}};
  for (const Cx& v : p.c) j["coeffs"].push_back({v.real(), v.imag()});
}

inline void from_json(const nlohmann::json& j, Poly& p) {
  std::vector<Cx> c;
  for (const auto& v : j.at("coeffs")) c.emplace_back(v[0].get<double>(), v[1].get<double>());
  p = Poly(std::move(c));
}

enum class CycleKind {
  Superattracting,
  Attracting,
  Repelling,
  Parabolic,
  IrrationallyIndifferent,
};

inline std::string to_string(CycleKind k) {
  switch (k) {
    case CycleKind::Superattracting: return "superattracting";
    case CycleKind::Attracting: return "attracting";
    case CycleKind::Repelling: return "repelling";
    case CycleKind::Parabolic: return "parabolic";
    default: return "irrationally-indifferent";
  }
}

// Classification by modulus with an indifference band of width eps_mult; on
// the band, rational rotation numbers are detected by testing lambda^q
// against 1 for q up to q_max.
inline CycleKind classify_multiplier(Cx lambda, double eps_mult = 1e-6, int q_max = 24) {
  const double r = std::abs(lambda);
  if (r < eps_mult) return CycleKind::Superattracting;
  if (r < 1.0 - eps_mult) return CycleKind::Attracting;
  if (r > 1.0 + eps_mult) return CycleKind::Repelling;
  Cx lq(1);
  for (int q = 1; q <= q_max; ++q) {
    lq *= lambda;
    if (std::abs(lq - Cx(1)) < eps_mult * q) return CycleKind::Parabolic;
  }
  return CycleKind::IrrationallyIndifferent;
}

struct FixedPointInfo {
  Cx location;
  bool at_infinity = false;
  int period = 1;       // period of the cycle the point belongs to (divides the query)
  int multiplicity = 1; // root multiplicity of the periodic equation (collapsed cluster size)
  Cx multiplier;
  CycleKind kind = CycleKind::Repelling;
};

struct PeriodicOpts {
  double eps_mult = 1e-6;
  int q_max = 24;
  double cluster_eps = 1e-2;  // relative gap below which roots merge
  bool include_infinity = true;
};

// Periodic points of period dividing `period`, computed as roots of the
// polynomial equation N_p(z) - z D_p(z) = 0 where G^p = N_p / D_p. Near-
// multiple roots are collapsed into one entry carrying the multiplicity, the
// center re-polished on the appropriate derivative; this is what makes the
// multiplier read 1 (to rounding) at a genuinely parabolic double point even
// when the parameters are only known to a few decimals.
inline std::vector<FixedPointInfo> periodic_points(const GluingForm& G, int period,
                                                   const PeriodicOpts& opts = {}) {
  if (period < 1) throw std::invalid_argument("periodic_points: period must be positive");
  Poly N = G.numerator(), D = G.denominator();
  const Poly N1 = N, D1 = D;
  const int d = G.degree();
  for (int j = 1; j < period; ++j) {
    // substitute G into N/D keeping a common power of the denominator
    std::vector<Poly> npow(d + 1), dpow(d + 1);
    npow[0] = dpow[0] = Poly::constant(Cx(1));
    for (int i = 1; i <= d; ++i) {
      npow[i] = npow[i - 1] * N;
      dpow[i] = dpow[i - 1] * D;
    }
    Poly Nn = Poly::constant(Cx(0)), Dn = Poly::constant(Cx(0));
    for (int i = 0; i <= N1.degree(); ++i) Nn = Nn + npow[i] * dpow[d - i] * N1.c[i];
    for (int i = 0; i <= D1.degree(); ++i) Dn = Dn + npow[i] * dpow[d - i] * D1.c[i];
    N = Nn;
    D = Dn;
    if (N.degree() > kMaxRootDegree)
      throw std::invalid_argument("periodic_points: period exceeds the degree budget");
  }
  const Poly F = N - Poly::identity() * D;
  if (F.degree() > kMaxRootDegree)
    throw std::invalid_argument("periodic_points: period exceeds the degree budget");

  double scale = 1.0;
  for (const Cx& a : G.zeros) scale = std::max(scale, std::abs(a));
  for (const Cx& b : G.poles) scale = std::max(scale, std::abs(b));

  const std::vector<Cx> raw = root_all(F);
  // drop spurious roots sitting on poles of the iterate (common-factor artifacts)
  std::vector<Cx> kept;
  for (const Cx& r : raw) {
    const Cx dv = D(r);
    const Cx nv = N(r);
    if (std::abs(dv) < 1e-9 && std::abs(nv) < 1e-9) continue;
    kept.push_back(r);
  }

  std::vector<FixedPointInfo> out;
  for (const RootCluster& cl : consolidate_roots(F, kept, opts.cluster_eps)) {
    FixedPointInfo fp;
    fp.location = cl.center;
    fp.multiplicity = cl.multiplicity;
    // multiplier along the actual orbit of the polished center
    Cx lam(1);
    Cx z = cl.center;
    int exact = period;
    for (int j = 0; j < period; ++j) {
      lam *= G.derivative(z);
      z = G(z);
      if (j + 1 < period && std::abs(z - cl.center) < 1e-8 * (1.0 + scale)) {
        exact = j + 1;
        break;
      }
    }
    if (exact != period) {
      // recompute the multiplier over the exact cycle only
      lam = Cx(1);
      z = cl.center;
      for (int j = 0; j < exact; ++j) {
        lam *= G.derivative(z);
        z = G(z);
      }
    }
    fp.period = exact;
    fp.multiplier = lam;
    fp.kind = classify_multiplier(lam, opts.eps_mult, opts.q_max);
    out.push_back(fp);
  }

  if (opts.include_infinity && G.degree_at_infinity() >= 2) {
    FixedPointInfo inf;
    inf.location = Cx(0);
    inf.at_infinity = true;
    inf.period = 1;
    inf.multiplier = Cx(0);
    inf.kind = CycleKind::Superattracting;
    out.push_back(inf);
  }
  return out;
}

// same machinery for a polynomial (denominator 1)
inline std::vector<FixedPointInfo> periodic_points(const MarkedPoly& f, int period,
                                                   const PeriodicOpts& opts = {}) {
  Poly it = f.p;
  for (int j = 1; j < period; ++j) {
    it = f.p.compose(it);
    if (it.degree() > kMaxRootDegree)
      throw std::invalid_argument("periodic_points: period exceeds the degree budget");
  }
  const Poly F = it - Poly::identity();
  std::vector<FixedPointInfo> out;
  for (const RootCluster& cl : consolidate_roots(F, root_all(F), opts.cluster_eps)) {
    FixedPointInfo fp;
    fp.location = cl.center;
    fp.multiplicity = cl.multiplicity;
    Cx lam(1);
    Cx z = cl.center;
    int exact = period;
    for (int j = 0; j < period; ++j) {
      lam *= f.p.eval_with_derivative(z).second;
      z = f.p(z);
      if (j + 1 < period && std::abs(z - cl.center) < 1e-8 * (1.0 + std::abs(cl.center))) {
        exact = j + 1;
        break;
      }
    }
    if (exact != period) {
      lam = Cx(1);
      z = cl.center;
      for (int j = 0; j < exact; ++j) {
        lam *= f.p.eval_with_derivative(z).second;
        z = f.p(z);
      }
    }
    fp.period = exact;
    fp.multiplier = lam;
    fp.kind = classify_multiplier(lam, opts.eps_mult, opts.q_max);
    out.push_back(fp);
  }
  return out;
}

}  // namespace polyglue
