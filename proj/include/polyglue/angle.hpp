#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace polyglue {

// Angle on the circle R/Z stored as an exact fraction in lowest terms.
// Everything downstream that reasons about ray combinatorics (orbits,
// pairings, puzzle boundaries) works with these; floating point enters
// only when a ray is actually traced.
struct RationalAngle {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  RationalAngle() = default;

  RationalAngle(std::uint64_t n, std::uint64_t d) {
    if (d == 0) throw std::invalid_argument("RationalAngle: zero denominator");
    n %= d;
    const std::uint64_t g = std::gcd(n, d);
    num = n / g;
    den = d / g;
  }

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }

  bool operator==(const RationalAngle&) const = default;

  // Lexicographic by value; exact (cross-multiplication in 128 bits).
  bool operator<(const RationalAngle& o) const {
    return static_cast<unsigned __int128>(num) * o.den <
           static_cast<unsigned __int128>(o.num) * den;
  }

  std::string str() const { return std::to_string(num) + "/" + std::to_string(den); }
};

inline RationalAngle parse_angle(const std::string& s) {
  const auto slash = s.find('/');
  if (slash == std::string::npos)
    return RationalAngle(std::stoull(s), 1);
  return RationalAngle(std::stoull(s.substr(0, slash)), std::stoull(s.substr(slash + 1)));
}

// theta -> d * theta (mod 1)
inline RationalAngle mul_d(const RationalAngle& t, std::uint64_t d) {
  const unsigned __int128 n = static_cast<unsigned __int128>(t.num) * d;
  return RationalAngle(static_cast<std::uint64_t>(n % t.den), t.den);
}

// a + b (mod 1)
inline RationalAngle add(const RationalAngle& a, const RationalAngle& b) {
  const std::uint64_t g = std::gcd(a.den, b.den);
  const std::uint64_t d = a.den / g * b.den;
  const unsigned __int128 n = static_cast<unsigned __int128>(a.num) * (b.den / g) +
                              static_cast<unsigned __int128>(b.num) * (a.den / g);
  return RationalAngle(static_cast<std::uint64_t>(n % d), d);
}

// a - b (mod 1)
inline RationalAngle sub(const RationalAngle& a, const RationalAngle& b) {
  const std::uint64_t g = std::gcd(a.den, b.den);
  const std::uint64_t d = a.den / g * b.den;
  const unsigned __int128 bn = static_cast<unsigned __int128>(b.num) * (a.den / g);
  unsigned __int128 an = static_cast<unsigned __int128>(a.num) * (b.den / g);
  if (an < bn) an += d;
  return RationalAngle(static_cast<std::uint64_t>(an - bn), d);
}

struct AngleOrbit {
  std::vector<RationalAngle> points;  // preperiodic tail followed by one full cycle
  std::size_t preperiod = 0;
  std::size_t period = 0;
};

// Forward orbit of t under multiplication by d until the first repeat.
// Rational angles are always eventually periodic; the denominator bounds
// the orbit length, and the budget guards against pathological inputs.
inline AngleOrbit orbit(const RationalAngle& t, std::uint64_t d,
                        std::size_t budget = 1u << 20) {
  AngleOrbit out;
  std::vector<RationalAngle> seen;
  RationalAngle cur = t;
  for (std::size_t i = 0; i < budget; ++i) {
    for (std::size_t j = 0; j < seen.size(); ++j) {
      if (seen[j] == cur) {
        out.points = std::move(seen);
        out.preperiod = j;
        out.period = i - j;
        return out;
      }
    }
    seen.push_back(cur);
    cur = mul_d(cur, d);
  }
  throw std::runtime_error("orbit: budget exhausted (denominator too large?)");
}

// Boundary pairing for a gluing along the basin boundary of local degree d0.
// The two glued circles carry the d0-tupling map with opposite orientations;
// the k offset selects which of the d0-1 fixed rays is matched to angle zero
// on the far side.
struct GluingPairing {
  std::uint64_t d0 = 2;
  std::uint64_t k = 0;

  RationalAngle pair(const RationalAngle& t) const {
    return sub(RationalAngle(k, d0 - 1), t);
  }
};

// Orbit of the characteristic angle under the boundary dynamics (d0-tupling).
inline AngleOrbit characteristic_angle_orbit(const RationalAngle& theta, std::uint64_t d0) {
  return orbit(theta, d0);
}

}  // namespace polyglue
