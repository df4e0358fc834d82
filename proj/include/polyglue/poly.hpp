#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

namespace polyglue {

using Cx = std::complex<double>;

// Dense polynomial over C, coefficients in ascending order (c[k] multiplies z^k).
struct Poly {
  std::vector<Cx> c;

  Poly() = default;
  explicit Poly(std::vector<Cx> coeffs) : c(std::move(coeffs)) { trim(); }

  static Poly constant(Cx v) { return Poly({v}); }
  static Poly identity() { return Poly({Cx(0), Cx(1)}); }

  // leading * prod (z - r_i)
  static Poly from_roots(Cx leading, const std::vector<Cx>& roots) {
    Poly p({leading});
    for (const Cx& r : roots) p = p * Poly({-r, Cx(1)});
    return p;
  }

  void trim() {
    while (c.size() > 1 && std::abs(c.back()) == 0.0) c.pop_back();
    if (c.empty()) c.push_back(Cx(0));
  }

  int degree() const { return static_cast<int>(c.size()) - 1; }
  bool is_zero() const { return c.size() == 1 && c[0] == Cx(0); }

  Cx operator()(Cx z) const {
    Cx acc(0);
    for (std::size_t i = c.size(); i-- > 0;) acc = acc * z + c[i];
    return acc;
  }

  // Horner pass that also accumulates the derivative; one traversal, no
  // extra allocation, used heavily inside Newton loops.
  std::pair<Cx, Cx> eval_with_derivative(Cx z) const {
    Cx p(0), dp(0);
    for (std::size_t i = c.size(); i-- > 0;) {
      dp = dp * z + p;
      p = p * z + c[i];
    }
    return {p, dp};
  }

  Poly derivative() const {
    if (c.size() <= 1) return Poly::constant(Cx(0));
    std::vector<Cx> d(c.size() - 1);
    for (std::size_t i = 1; i < c.size(); ++i) d[i - 1] = c[i] * static_cast<double>(i);
    return Poly(std::move(d));
  }

  Poly operator+(const Poly& o) const {
    std::vector<Cx> s(std::max(c.size(), o.c.size()), Cx(0));
    for (std::size_t i = 0; i < c.size(); ++i) s[i] += c[i];
    for (std::size_t i = 0; i < o.c.size(); ++i) s[i] += o.c[i];
    return Poly(std::move(s));
  }

  Poly operator-(const Poly& o) const {
    std::vector<Cx> s(std::max(c.size(), o.c.size()), Cx(0));
    for (std::size_t i = 0; i < c.size(); ++i) s[i] += c[i];
    for (std::size_t i = 0; i < o.c.size(); ++i) s[i] -= o.c[i];
    return Poly(std::move(s));
  }

  Poly operator*(const Poly& o) const {
    if (is_zero() || o.is_zero()) return Poly::constant(Cx(0));
    std::vector<Cx> s(c.size() + o.c.size() - 1, Cx(0));
    for (std::size_t i = 0; i < c.size(); ++i)
      for (std::size_t j = 0; j < o.c.size(); ++j) s[i + j] += c[i] * o.c[j];
    return Poly(std::move(s));
  }

  Poly operator*(Cx k) const {
    std::vector<Cx> s(c);
    for (Cx& v : s) v *= k;
    return Poly(std::move(s));
  }

  // p(q(z)); fine for the small compositions we build (iterates of low degree)
  Poly compose(const Poly& q) const {
    Poly acc = Poly::constant(Cx(0));
    for (std::size_t i = c.size(); i-- > 0;) acc = acc * q + Poly::constant(c[i]);
    return acc;
  }
};

}  // namespace polyglue
