#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "polyglue/angle.hpp"
#include "polyglue/maps.hpp"
#include "polyglue/potential.hpp"

// Puzzle pieces for a glued pair of super-attracting basins.
//
// The model: an invariant curve separates the basin of infinity (degree d1
// out there, the "outside") from the basin of the origin (degree d2, the
// "inside"), and the map acts on the curve itself by angle d0-tupling. The
// depth-zero graph consists of finitely many cross-cuts (an external ray and
// an internal ray landing at a common curve point) together with one
// equipotential arc on each side, and optionally some unpaired rays. Pulling
// the graph back once refines the complement into the depth-one pieces, and
// so on.
//
// When d1 > d0 or d2 > d0 the map carries critical decorations: at each
// marked curve point a bubble hangs off one side, mapping over the whole of
// the *other* side with the excess degree. Each pullback then sprouts copies
// of pieces inside every bubble (and bubbles inside bubbles), so the piece
// count outgrows the plain d0-fold subdivision. All of that bookkeeping is
// combinatorial: bubbles are tracked as "sites", rays by where they land, and
// pieces by the curve interval or bubble they live on. No numerics is
// involved until locate(), which classifies an actual complex point against
// the pulled-back graph of a concrete rational map.

namespace polyglue {

// A critical point of the glued map sitting on the curve, with the side its
// decoration hangs on. Positions are measured in the common curve coordinate
// (the one d0-tupled by the dynamics).
struct CriticalMark {
  RationalAngle angle;
  bool outside = true;
  std::string label;
};

// One cross-cut of the depth-zero graph: an external and an internal ray
// landing at the same curve point.
struct RayPairCut {
  RationalAngle curve;     // landing position on the curve
  RationalAngle external;  // Boettcher angle at infinity
  RationalAngle internal;  // Boettcher angle at the origin, in the glued map's
                           // own internal coordinate (same orientation as the
                           // curve, not the pre-gluing model's)
};

// Depth-zero input data. build_depth0 validates it and throws
// std::invalid_argument("graph-not-admissible: ...") if the pullback could
// not work: the cut set must be forward invariant triple-wise, ray angles
// must land in circular order, and no ray may land on a critical orbit.
struct InitialGraph {
  int d0 = 2;  // degree on the curve
  int d1 = 3;  // degree in the basin of infinity
  int d2 = 3;  // degree in the basin of the origin
  std::vector<RayPairCut> cuts;
  // Unpaired rays; they land at the curve point with their own angle and
  // never bound a cross-cut. A graph made only of these never splits.
  std::vector<RationalAngle> free_external;
  std::vector<RationalAngle> free_internal;
  GluingPairing pairing;  // boundary pairing of the glued circles; carried
                          // along for the record, the pullback never uses it
  std::vector<CriticalMark> marks;
  double level_inf = 1.0;   // Green's level of the outer equipotential
  double level_zero = 1.0;  // |Green's level| of the inner equipotential
};

struct PieceId {
  int depth = 0;
  int index = 0;  // 1-based within its depth
  bool operator==(const PieceId&) const = default;
  std::string str() const {
    return "P(" + std::to_string(depth) + "," + std::to_string(index) + ")";
  }
};

// One puzzle piece. Sectors straddle the curve and occupy the open interval
// (lo, hi); with a single cut the interval wraps all the way around
// (lo == hi), and with no cuts the piece is the whole band. Satellite pieces
// are the copies created inside critical decorations; they sit on one side
// only, and lo == hi holds the curve position of the bubble tower they hang
// from. A satellite's listed boundary names the rays that cut it off from
// its own side when such rays exist; a copy sitting in a bubble that no ray
// of its side reaches (the bubble's image lies across the curve) is enclosed
// by pulled-back graph arcs instead, listed as lifts of its image's
// boundary. Arcs running strictly inside a decoration are never listed
// separately; they are implied by the image piece.
struct PuzzlePiece {
  PieceId id;
  bool is_sector = true;
  RationalAngle lo, hi;
  std::optional<PieceId> parent;  // enclosing piece one depth up
  std::optional<PieceId> image;   // piece this one maps onto
  std::vector<std::string> boundary;
  std::vector<std::string> critical_marks;  // labels of marks inside this piece
  bool straddles_curve = true;
};

namespace detail {

// A decoration bubble, or one of its iterated preimages. Gen-1 bubbles sit
// at the marks and map over the far side of the curve; every bubble has
// exactly (d1 - d0) + (d2 - d0) + d0 preimage bubbles, one hosted on each
// same-image bubble plus d0 on the curve.
struct PuzzleSite {
  int mark = 0;       // index of the gen-1 ancestor's mark
  bool outside = true;
  int born = 0;       // depth at which the pullback created it (gen-1: 0)
  int image = -1;     // site this one maps onto; -1 for gen-1
  int host = -1;      // -1: attached to the curve, else hosted on that site
  RationalAngle att;  // curve position, or boundary parameter on the host
};

}  // namespace detail

// Where a pulled-back ray lands: on the curve (site == -1) or on a bubble
// boundary. Off the curve, param is the curve position the landing point
// reaches under enough iterates, which parametrizes the bubble boundary.
struct RayLanding {
  int site = -1;
  RationalAngle param;
};

struct GraphRay {
  RationalAngle angle;
  RayLanding at;
};

struct PuzzleSystem {
  InitialGraph graph;
  std::vector<std::vector<PuzzlePiece>> depths;
  std::vector<std::vector<RayPairCut>> cut_levels;  // per depth, by position

  // Pullback bookkeeping for the deepest level built so far.
  std::vector<detail::PuzzleSite> sites;
  std::vector<std::vector<int>> hosted;      // site -> sites on its boundary
  std::vector<GraphRay> ext_rays, int_rays;  // sorted by angle
  std::vector<std::vector<int>> satellites;  // site -> piece indices

  int depth() const { return static_cast<int>(depths.size()) - 1; }

  const std::vector<PuzzlePiece>& pieces(int n) const {
    if (n < 0 || n > depth())
      throw std::invalid_argument("PuzzleSystem: depth " + std::to_string(n) + " not built");
    return depths[n];
  }

  const std::vector<RayPairCut>& cuts_at(int n) const {
    if (n < 0 || n > depth())
      throw std::invalid_argument("PuzzleSystem: depth " + std::to_string(n) + " not built");
    return cut_levels[n];
  }
};

namespace detail {

// Strict membership in the open arc from lo counterclockwise to hi. When
// lo == hi the arc is the full circle minus the point.
inline bool in_open_arc(const RationalAngle& t, const RationalAngle& lo, const RationalAngle& hi) {
  if (lo == hi) return !(t == lo);
  if (lo < hi) return lo < t && t < hi;
  return lo < t || t < hi;
}

inline RationalAngle arc_midpoint(const RationalAngle& lo, const RationalAngle& hi) {
  if (lo == hi) return add(lo, RationalAngle(1, 2));
  const RationalAngle span = sub(hi, lo);
  return add(lo, RationalAngle(span.num, span.den * 2));
}

// The d preimages of t under angle d-tupling, in ascending order.
inline std::vector<RationalAngle> angle_lifts(const RationalAngle& t, int d) {
  std::vector<RationalAngle> out;
  out.reserve(static_cast<std::size_t>(d));
  for (std::uint64_t k = 0; k < static_cast<std::uint64_t>(d); ++k)
    out.emplace_back(t.num + k * t.den, t.den * static_cast<std::uint64_t>(d));
  return out;
}

// Curve position of the bubble tower a site hangs from. Used only as a sort
// key for its pieces.
inline RationalAngle site_locale(const PuzzleSystem& s, int x) {
  while (s.sites[static_cast<std::size_t>(x)].host >= 0)
    x = s.sites[static_cast<std::size_t>(x)].host;
  return s.sites[static_cast<std::size_t>(x)].att;
}

// Curve position of a mark's critical value. Each bubble's pinch point maps
// there eventually, so this is where every boundary walk of the tower starts.
inline RationalAngle mark_value_position(const PuzzleSystem& s, int mark) {
  return mul_d(s.graph.marks[static_cast<std::size_t>(mark)].angle, static_cast<std::uint64_t>(s.graph.d0));
}

// Index into depths[n] of the sector whose open interval holds t. Exactly on
// a cut there is no piece, only graph.
inline int sector_index_at(const PuzzleSystem& s, int n, const RationalAngle& t) {
  const auto& ps = s.pieces(n);
  const bool undivided = s.cut_levels[static_cast<std::size_t>(n)].empty();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (!ps[i].is_sector) continue;
    if (undivided || in_open_arc(t, ps[i].lo, ps[i].hi)) return static_cast<int>(i);
  }
  throw std::runtime_error("on-graph-ambiguous: angle " + t.str() + " lies on the depth-" +
                           std::to_string(n) + " graph");
}

inline const PuzzlePiece& piece_ref(const PuzzleSystem& s, PieceId id) {
  return s.depths[static_cast<std::size_t>(id.depth)][static_cast<std::size_t>(id.index - 1)];
}

// The curve interval a piece projects over: its own for a sector, the
// eventual sector image's for a satellite copy.
inline std::pair<RationalAngle, RationalAngle> footprint(const PuzzleSystem& s, const PuzzlePiece& p) {
  const PuzzlePiece* q = &p;
  while (!q->is_sector) q = &piece_ref(s, *q->image);
  return {q->lo, q->hi};
}

int outer_collar(const PuzzleSystem& s, int x, int n);

// Piece index at depth n covering the inside collar of bubble x near
// boundary parameter t: a satellite of x if one projects over t, otherwise
// whatever surrounds the whole bubble. Valid while s.satellites still holds
// the depth-n piece indices.
inline int inner_collar(const PuzzleSystem& s, int x, const RationalAngle& t, int n) {
  for (int q : s.satellites[static_cast<std::size_t>(x)]) {
    const auto fp = footprint(s, s.depths[static_cast<std::size_t>(n)][static_cast<std::size_t>(q)]);
    if (in_open_arc(t, fp.first, fp.second)) return q;
  }
  return outer_collar(s, x, n);
}

inline int outer_collar(const PuzzleSystem& s, int x, int n) {
  const PuzzleSite& X = s.sites[static_cast<std::size_t>(x)];
  if (X.host < 0) return sector_index_at(s, n, X.att);
  return inner_collar(s, X.host, X.att, n);
}

struct WalkSlot {
  RayLanding where;
  int parent_ray;  // index into the old same-side ray list
};

// Append the landing slots on bubble x's boundary (and recursively on the
// bubbles hosted there) in the order a walk around the boundary meets them,
// parameters ascending cyclically from the pinch. Slots come from old rays
// landing on the image bubble; for a gen-1 bubble, from old rays landing on
// the curve, since those are the ones whose extra preimage peels off here.
inline void walk_site(const PuzzleSystem& s, int x, const std::vector<GraphRay>& old_rays,
                      std::vector<WalkSlot>& out) {
  struct Item {
    RationalAngle dist;   // parameter distance past the pinch
    int slot_ray;         // >= 0: slot contributed by this old ray
    int sub_site;         // >= 0: recurse into this hosted bubble
    RationalAngle param;
  };
  const PuzzleSite& X = s.sites[static_cast<std::size_t>(x)];
  const RationalAngle pinch = mark_value_position(s, X.mark);
  std::vector<Item> items;
  for (std::size_t r = 0; r < old_rays.size(); ++r) {
    const RayLanding& at = old_rays[r].at;
    const bool lands_here = X.image < 0 ? at.site < 0 : at.site == X.image;
    if (!lands_here) continue;
    items.push_back({sub(at.param, pinch), static_cast<int>(r), -1, at.param});
  }
  for (int c : s.hosted[static_cast<std::size_t>(x)])
    items.push_back({sub(s.sites[static_cast<std::size_t>(c)].att, pinch), -1, c,
                     s.sites[static_cast<std::size_t>(c)].att});
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
    if (!(a.dist == b.dist)) return a.dist < b.dist;
    if ((a.slot_ray >= 0) != (b.slot_ray >= 0)) return a.slot_ray >= 0;
    return a.sub_site < b.sub_site;
  });
  for (const Item& it : items) {
    if (it.slot_ray >= 0)
      out.push_back({RayLanding{x, it.param}, it.slot_ray});
    else
      walk_site(s, it.sub_site, old_rays, out);
  }
}

// Pull one side's rays back one depth. The d_side-fold preimages of the old
// angles are matched to landing slots by walking the side's boundary of the
// filled curve: along the curve by ascending position, detouring around each
// bubble tower met on the way. Both sequences are cyclic and get aligned at
// the smallest old ray, which persists (its angle is its own lift and its
// landing point is one of its own slots). Every assignment is then checked
// against the dynamics; a failure means the walk and the angle arithmetic
// disagree, which is a bug, not bad input.
inline std::vector<GraphRay> pull_back_rays(const PuzzleSystem& s, const std::vector<GraphRay>& old_rays,
                                            bool outside, int d_side) {
  if (old_rays.empty()) return {};
  std::vector<RationalAngle> angles;
  angles.reserve(old_rays.size() * static_cast<std::size_t>(d_side));
  for (const GraphRay& r : old_rays)
    for (const RationalAngle& a : angle_lifts(r.angle, d_side)) angles.push_back(a);
  std::sort(angles.begin(), angles.end());

  struct Entry {
    RationalAngle pos;
    int slot_ray;  // >= 0: curve slot from this old ray
    int site;      // >= 0: bubble tower pinched at pos
    RationalAngle param;
  };
  std::vector<Entry> entries;
  for (std::size_t r = 0; r < old_rays.size(); ++r) {
    if (old_rays[r].at.site >= 0) continue;
    for (const RationalAngle& p : angle_lifts(old_rays[r].at.param, s.graph.d0))
      entries.push_back({p, static_cast<int>(r), -1, p});
  }
  for (std::size_t x = 0; x < s.sites.size(); ++x)
    if (s.sites[x].host < 0 && s.sites[x].outside == outside)
      entries.push_back({s.sites[x].att, -1, static_cast<int>(x), s.sites[x].att});
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (!(a.pos == b.pos)) return a.pos < b.pos;
    if ((a.slot_ray >= 0) != (b.slot_ray >= 0)) return a.slot_ray >= 0;
    return a.site < b.site;
  });

  std::vector<WalkSlot> slots;
  slots.reserve(angles.size());
  for (const Entry& e : entries) {
    if (e.slot_ray >= 0)
      slots.push_back({RayLanding{-1, e.param}, e.slot_ray});
    else
      walk_site(s, e.site, old_rays, slots);
  }
  if (slots.size() != angles.size())
    throw std::logic_error("pullback: inconsistent lift (ray and slot counts differ)");

  const GraphRay& anchor = old_rays.front();
  const auto ai = std::find(angles.begin(), angles.end(), anchor.angle);
  if (ai == angles.end())
    throw std::logic_error("pullback: inconsistent lift (anchor angle vanished)");
  const auto si = std::find_if(slots.begin(), slots.end(), [&](const WalkSlot& w) {
    return w.where.site == anchor.at.site && w.where.param == anchor.at.param;
  });
  if (si == slots.end())
    throw std::logic_error("pullback: inconsistent lift (anchor slot vanished)");
  std::rotate(angles.begin(), ai, angles.end());
  std::rotate(slots.begin(), si, slots.end());

  std::vector<GraphRay> out;
  out.reserve(angles.size());
  for (std::size_t i = 0; i < angles.size(); ++i) {
    if (!(mul_d(angles[i], static_cast<std::uint64_t>(d_side)) ==
          old_rays[static_cast<std::size_t>(slots[i].parent_ray)].angle))
      throw std::logic_error("pullback: inconsistent lift (ray does not cover its slot's parent)");
    out.push_back({angles[i], slots[i].where});
  }
  std::sort(out.begin(), out.end(),
            [](const GraphRay& a, const GraphRay& b) { return a.angle < b.angle; });
  return out;
}

// Cross-cuts lift to cross-cuts: each preimage of a cut position picks up
// exactly one external and one internal curve-landing ray.
inline std::vector<RayPairCut> pull_back_cuts(const PuzzleSystem& s,
                                              const std::vector<GraphRay>& new_ext,
                                              const std::vector<GraphRay>& new_int) {
  std::map<RationalAngle, RationalAngle> ext_at, int_at;
  for (const GraphRay& r : new_ext)
    if (r.at.site < 0) ext_at.emplace(r.at.param, r.angle);
  for (const GraphRay& r : new_int)
    if (r.at.site < 0) int_at.emplace(r.at.param, r.angle);
  std::vector<RayPairCut> out;
  for (const RayPairCut& c : s.cut_levels.back())
    for (const RationalAngle& p : angle_lifts(c.curve, s.graph.d0)) {
      const auto e = ext_at.find(p);
      const auto i = int_at.find(p);
      if (e == ext_at.end() || i == int_at.end())
        throw std::logic_error("pullback: inconsistent lift (cross-cut lost a ray)");
      out.push_back({p, e->second, i->second});
    }
  std::sort(out.begin(), out.end(),
            [](const RayPairCut& a, const RayPairCut& b) { return a.curve < b.curve; });
  return out;
}

// The curve-straddling pieces cut out by a sorted cut list. Ids, parents and
// images are the caller's job.
inline std::vector<PuzzlePiece> make_sectors(const InitialGraph& g, const std::vector<RayPairCut>& cuts) {
  std::vector<PuzzlePiece> out;
  auto labels_in = [&](const RationalAngle& lo, const RationalAngle& hi, bool everything) {
    std::vector<std::string> l;
    for (const CriticalMark& m : g.marks)
      if (everything || in_open_arc(m.angle, lo, hi)) l.push_back(m.label);
    return l;
  };
  if (cuts.empty()) {
    PuzzlePiece p;
    p.lo = p.hi = RationalAngle(0, 1);
    p.boundary = {"outer equipotential arc", "inner equipotential arc"};
    p.critical_marks = labels_in(p.lo, p.hi, true);
    out.push_back(std::move(p));
    return out;
  }
  for (std::size_t i = 0; i < cuts.size(); ++i) {
    const RayPairCut& a = cuts[i];
    const RayPairCut& b = cuts[(i + 1) % cuts.size()];
    PuzzlePiece p;
    p.lo = a.curve;
    p.hi = b.curve;
    p.boundary = {"external ray " + a.external.str(), "internal ray " + a.internal.str()};
    if (cuts.size() > 1) {
      p.boundary.push_back("external ray " + b.external.str());
      p.boundary.push_back("internal ray " + b.internal.str());
    }
    p.boundary.push_back("outer equipotential arc");
    p.boundary.push_back("inner equipotential arc");
    p.critical_marks = labels_in(p.lo, p.hi, false);
    out.push_back(std::move(p));
  }
  return out;
}

inline void validate_graph(const InitialGraph& g) {
  auto bad = [](const std::string& why) {
    throw std::invalid_argument("graph-not-admissible: " + why);
  };
  if (g.d0 < 2) bad("curve degree d0 must be at least 2");
  if (g.d1 < g.d0 || g.d2 < g.d0) bad("basin degrees must satisfy d1, d2 >= d0");
  if (g.pairing.d0 != static_cast<std::uint64_t>(g.d0)) bad("pairing degree differs from d0");
  if (!(g.level_inf > 0.0) || !(g.level_zero > 0.0)) bad("equipotential levels must be positive");

  int excess_out = 0, excess_in = 0;
  for (const CriticalMark& m : g.marks) (m.outside ? excess_out : excess_in)++;
  if (excess_out != g.d1 - g.d0 || excess_in != g.d2 - g.d0)
    bad("critical marks must balance the degree excess on each side");
  for (std::size_t i = 0; i < g.marks.size(); ++i)
    for (std::size_t j = i + 1; j < g.marks.size(); ++j)
      if (g.marks[i].angle == g.marks[j].angle) bad("two critical marks share a curve point");

  // Each side's full ray list: (landing position, angle).
  std::vector<std::pair<RationalAngle, RationalAngle>> ext, intl;
  for (const RayPairCut& c : g.cuts) {
    ext.push_back({c.curve, c.external});
    intl.push_back({c.curve, c.internal});
  }
  for (const RationalAngle& a : g.free_external) ext.push_back({a, a});
  for (const RationalAngle& a : g.free_internal) intl.push_back({a, a});

  auto check_side = [&](std::vector<std::pair<RationalAngle, RationalAngle>> v, const char* side) {
    for (std::size_t i = 0; i < v.size(); ++i)
      for (std::size_t j = i + 1; j < v.size(); ++j) {
        if (v[i].first == v[j].first) bad(std::string("two ") + side + " rays land at the same point");
        if (v[i].second == v[j].second) bad(std::string("duplicate ") + side + " ray angle");
      }
    if (v.size() < 2) return;
    // Rays land in circular order exactly when the angle sequence, read by
    // ascending position, descends exactly once around the circle.
    std::sort(v.begin(), v.end());
    int descents = 0;
    for (std::size_t i = 0; i < v.size(); ++i)
      if (!(v[i].second < v[(i + 1) % v.size()].second)) ++descents;
    if (descents != 1) bad(std::string(side) + " ray angles do not match the circular order of their landings");
  };
  check_side(ext, "external");
  check_side(intl, "internal");

  // Forward invariance: cut triples map onto cut triples, free rays onto rays.
  for (const RayPairCut& c : g.cuts) {
    const RationalAngle ic = mul_d(c.curve, static_cast<std::uint64_t>(g.d0));
    const RationalAngle ie = mul_d(c.external, static_cast<std::uint64_t>(g.d1));
    const RationalAngle ii = mul_d(c.internal, static_cast<std::uint64_t>(g.d2));
    bool found = false;
    for (const RayPairCut& d : g.cuts)
      found = found || (d.curve == ic && d.external == ie && d.internal == ii);
    if (!found) bad("cut set is not forward invariant");
  }
  auto closed_under = [](const std::vector<RationalAngle>& free_side,
                         const std::vector<std::pair<RationalAngle, RationalAngle>>& all, int d) {
    for (const RationalAngle& a : free_side) {
      const RationalAngle im = mul_d(a, static_cast<std::uint64_t>(d));
      bool found = false;
      for (const auto& r : all) found = found || (r.second == im);
      if (!found) return false;
    }
    return true;
  };
  if (!closed_under(g.free_external, ext, g.d1)) bad("external rays are not forward invariant");
  if (!closed_under(g.free_internal, intl, g.d2)) bad("internal rays are not forward invariant");

  // Ray landings must avoid the critical orbits; otherwise pulled-back graph
  // arcs would run into decoration pinch points and the sector/satellite
  // dichotomy breaks down.
  for (const CriticalMark& m : g.marks)
    for (const RationalAngle& p : orbit(m.angle, static_cast<std::uint64_t>(g.d0)).points) {
      for (const auto& r : ext)
        if (r.first == p) bad("an external ray lands on the orbit of mark '" + m.label + "'");
      for (const auto& r : intl)
        if (r.first == p) bad("an internal ray lands on the orbit of mark '" + m.label + "'");
    }
}

}  // namespace detail

inline PuzzleSystem build_depth0(const InitialGraph& g) {
  detail::validate_graph(g);
  PuzzleSystem s;
  s.graph = g;
  for (std::size_t i = 0; i < g.marks.size(); ++i)
    s.sites.push_back({static_cast<int>(i), g.marks[i].outside, 0, -1, -1, g.marks[i].angle});
  s.hosted.assign(s.sites.size(), {});
  s.satellites.assign(s.sites.size(), {});
  for (const RayPairCut& c : g.cuts) {
    s.ext_rays.push_back({c.external, {-1, c.curve}});
    s.int_rays.push_back({c.internal, {-1, c.curve}});
  }
  for (const RationalAngle& a : g.free_external) s.ext_rays.push_back({a, {-1, a}});
  for (const RationalAngle& a : g.free_internal) s.int_rays.push_back({a, {-1, a}});
  auto by_angle = [](const GraphRay& a, const GraphRay& b) { return a.angle < b.angle; };
  std::sort(s.ext_rays.begin(), s.ext_rays.end(), by_angle);
  std::sort(s.int_rays.begin(), s.int_rays.end(), by_angle);

  std::vector<RayPairCut> cuts = g.cuts;
  std::sort(cuts.begin(), cuts.end(),
            [](const RayPairCut& a, const RayPairCut& b) { return a.curve < b.curve; });
  auto pieces = detail::make_sectors(g, cuts);
  for (std::size_t i = 0; i < pieces.size(); ++i) pieces[i].id = {0, static_cast<int>(i) + 1};
  s.cut_levels.push_back(std::move(cuts));
  s.depths.push_back(std::move(pieces));
  return s;
}

namespace detail {

inline void pullback_once(PuzzleSystem& s) {
  const int n = s.depth();
  const InitialGraph& g = s.graph;

  // New bubbles: preimages of the youngest generation. A bubble attached to
  // the curve lifts to d0 curve bubbles plus one inside every gen-1
  // decoration (gen-1 sites come first in creation order, one per mark); a
  // bubble hosted on h lifts to one bubble on each preimage of h.
  const int old_count = static_cast<int>(s.sites.size());
  std::vector<PuzzleSite> born;
  for (int y = 0; y < old_count; ++y) {
    const PuzzleSite Y = s.sites[static_cast<std::size_t>(y)];
    if (Y.born != n) continue;
    if (Y.host < 0) {
      for (const RationalAngle& p : angle_lifts(Y.att, g.d0))
        born.push_back({Y.mark, Y.outside, n + 1, y, -1, p});
      for (std::size_t m = 0; m < g.marks.size(); ++m)
        born.push_back({Y.mark, g.marks[m].outside, n + 1, y, static_cast<int>(m), Y.att});
    } else {
      for (int h = 0; h < old_count; ++h)
        if (s.sites[static_cast<std::size_t>(h)].image == Y.host)
          born.push_back({Y.mark, s.sites[static_cast<std::size_t>(h)].outside, n + 1, y, h, Y.att});
    }
  }
  for (PuzzleSite& b : born) s.sites.push_back(b);
  s.hosted.resize(s.sites.size());
  s.satellites.resize(s.sites.size());
  for (std::size_t x = static_cast<std::size_t>(old_count); x < s.sites.size(); ++x)
    if (s.sites[x].host >= 0) s.hosted[static_cast<std::size_t>(s.sites[x].host)].push_back(static_cast<int>(x));

  auto new_ext = pull_back_rays(s, s.ext_rays, true, g.d1);
  auto new_int = pull_back_rays(s, s.int_rays, false, g.d2);
  auto cuts = pull_back_cuts(s, new_ext, new_int);
  auto mains = make_sectors(g, cuts);

  // Satellite pieces. A gen-1 decoration maps over the whole far side, so it
  // picks up a copy of every depth-n sector except the one its pinch maps
  // into (that copy merges with the collar around the bubble and stays part
  // of the sector). A deeper bubble just copies whatever its image picked up
  // one depth earlier.
  struct NewSat {
    int site;
    PieceId image;
    int parent_piece;  // index into depths[n]
    RationalAngle key;
  };
  std::vector<NewSat> sats;
  for (std::size_t x = 0; x < s.sites.size(); ++x) {
    const PuzzleSite& X = s.sites[x];
    std::vector<PieceId> images;
    if (X.image < 0) {
      const int skip = sector_index_at(s, n, mark_value_position(s, X.mark));
      for (std::size_t i = 0; i < s.depths[static_cast<std::size_t>(n)].size(); ++i)
        if (s.depths[static_cast<std::size_t>(n)][i].is_sector && static_cast<int>(i) != skip)
          images.push_back(s.depths[static_cast<std::size_t>(n)][i].id);
    } else {
      for (int q : s.satellites[static_cast<std::size_t>(X.image)])
        images.push_back(s.depths[static_cast<std::size_t>(n)][static_cast<std::size_t>(q)].id);
    }
    for (const PieceId& im : images) {
      const auto fp = footprint(s, piece_ref(s, im));
      const int par = inner_collar(s, static_cast<int>(x), arc_midpoint(fp.first, fp.second), n);
      sats.push_back({static_cast<int>(x), im, par, site_locale(s, static_cast<int>(x))});
    }
  }

  // Assemble depth n+1: sectors and satellites merged in curve order, with
  // satellites keyed by the tower position they hang from.
  struct Row {
    RationalAngle key;
    int kind;  // 0: sector, 1: satellite
    int site;
    int image_index;
    std::size_t payload;
  };
  std::vector<Row> rows;
  for (std::size_t i = 0; i < mains.size(); ++i)
    rows.push_back({mains[i].lo, 0, -1, 0, i});
  for (std::size_t i = 0; i < sats.size(); ++i)
    rows.push_back({sats[i].key, 1, sats[i].site, sats[i].image.index, i});
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (!(a.key == b.key)) return a.key < b.key;
    if (a.kind != b.kind) return a.kind < b.kind;
    if (a.site != b.site) return a.site < b.site;
    return a.image_index < b.image_index;
  });

  auto side_ray_at = [&](bool outside, int site,
                         const RationalAngle& p) -> std::optional<RationalAngle> {
    const auto& list = outside ? new_ext : new_int;
    for (const GraphRay& r : list)
      if (r.at.site == site && r.at.param == p) return r.angle;
    return std::nullopt;
  };

  std::vector<PuzzlePiece> level;
  level.reserve(rows.size());
  std::vector<std::vector<int>> new_satellites(s.sites.size());
  for (const Row& row : rows) {
    if (row.kind == 0) {
      PuzzlePiece p = std::move(mains[row.payload]);
      p.id = {n + 1, static_cast<int>(level.size()) + 1};
      const RationalAngle mid = arc_midpoint(p.lo, p.hi);
      p.parent = s.depths[static_cast<std::size_t>(n)][static_cast<std::size_t>(
          sector_index_at(s, n, mid))].id;
      p.image = s.depths[static_cast<std::size_t>(n)][static_cast<std::size_t>(
          sector_index_at(s, n, mul_d(mid, static_cast<std::uint64_t>(g.d0))))].id;
      level.push_back(std::move(p));
    } else {
      const NewSat& ns = sats[row.payload];
      const PuzzleSite& X = s.sites[static_cast<std::size_t>(ns.site)];
      PuzzlePiece p;
      p.id = {n + 1, static_cast<int>(level.size()) + 1};
      p.is_sector = false;
      p.straddles_curve = false;
      p.lo = p.hi = ns.key;
      p.image = ns.image;
      p.parent = s.depths[static_cast<std::size_t>(n)][static_cast<std::size_t>(ns.parent_piece)].id;
      const auto fp = footprint(s, piece_ref(s, ns.image));
      const auto a = side_ray_at(X.outside, ns.site, fp.first);
      const auto b = side_ray_at(X.outside, ns.site, fp.second);
      if (a.has_value() != b.has_value())
        throw std::logic_error("pullback: inconsistent lift (decoration copy lost a bracketing ray)");
      if (a) {
        const char* word = X.outside ? "external" : "internal";
        p.boundary = {std::string(word) + " ray " + a->str(),
                      std::string(word) + " ray " + b->str(),
                      X.outside ? "outer equipotential arc" : "inner equipotential arc"};
      } else {
        // No ray of this side reaches the bubble: its image sits across the
        // curve, so the copy is enclosed by pulled-back arcs named after
        // what they lift.
        for (const std::string& entry : piece_ref(s, ns.image).boundary)
          p.boundary.push_back("lift of " + entry);
      }
      new_satellites[static_cast<std::size_t>(ns.site)].push_back(static_cast<int>(level.size()));
      level.push_back(std::move(p));
    }
  }

  s.depths.push_back(std::move(level));
  s.cut_levels.push_back(std::move(cuts));
  s.ext_rays = std::move(new_ext);
  s.int_rays = std::move(new_int);
  s.satellites = std::move(new_satellites);
}

}  // namespace detail

inline PuzzleSystem pullback(PuzzleSystem s, int to_depth) {
  if (to_depth < 0) throw std::invalid_argument("pullback: negative depth");
  while (s.depth() < to_depth) detail::pullback_once(s);
  return s;
}

// The piece whose curve interval holds the given angle. Throws
// std::runtime_error("on-graph-ambiguous: ...") exactly on a cut.
inline const PuzzlePiece& locate_angle(const PuzzleSystem& s, const RationalAngle& t, int depth) {
  return s.pieces(depth)[static_cast<std::size_t>(detail::sector_index_at(s, depth, t))];
}

// Classify a complex point against the depth-n graph of a concrete glued
// map. Only meaningful for systems without critical decorations, where every
// piece is a sector bounded by rays whose angles can be compared against the
// point's Boettcher coordinate; decorated systems are combinatorial objects
// here and have no preferred embedding, so they are rejected.
//
// Returns nullopt beyond the pulled-back equipotentials (the point escapes
// the puzzle), and throws "on-graph-ambiguous" within eps of a bounding ray
// or equipotential.
inline std::optional<PuzzlePiece> locate(const PuzzleSystem& s, const GluingForm& G, Cx z,
                                         int depth, double eps = 1e-9) {
  if (!s.graph.marks.empty())
    throw std::invalid_argument(
        "locate: decorated systems have no geometric embedding; use locate_angle");
  s.pieces(depth);
  const double lvl_out = s.graph.level_inf / std::pow(static_cast<double>(s.graph.d1), depth);
  const double lvl_in = s.graph.level_zero / std::pow(static_cast<double>(s.graph.d2), depth);
  const double gi = green_infinity(G, z);
  const double go = green_origin(G, z);
  if (std::abs(gi - lvl_out) <= eps || std::abs(go + lvl_in) <= eps)
    throw std::runtime_error("on-graph-ambiguous: point sits on a depth-" + std::to_string(depth) +
                             " equipotential");
  if (gi > lvl_out || go < -lvl_in) return std::nullopt;
  bool outside;
  if (gi > 0.0)
    outside = true;
  else if (go < 0.0)
    outside = false;
  else
    throw std::runtime_error("locate: point is in neither basin");

  const Cx w = outside ? boettcher_infinity(G, z) : boettcher_origin(G, z);
  double th = std::arg(w) / (2.0 * M_PI);
  th -= std::floor(th);
  const auto& cuts = s.cuts_at(depth);
  if (cuts.empty()) return s.depths[static_cast<std::size_t>(depth)][0];

  // Cut angles run in the same cyclic order as cut positions (admissibility
  // checks depth zero, and pullbacks preserve it), so bracketing the angle
  // brackets the sector.
  std::vector<double> av;
  av.reserve(cuts.size());
  for (const RayPairCut& c : cuts) av.push_back(outside ? c.external.value() : c.internal.value());
  for (double a : av) {
    const double d = std::abs(th - a);
    if (std::min(d, 1.0 - d) <= eps)
      throw std::runtime_error("on-graph-ambiguous: point sits on a depth-" +
                               std::to_string(depth) + " ray");
  }
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double lo = av[i];
    const double hi = av[(i + 1) % av.size()];
    const bool inside_arc = lo < hi ? (lo < th && th < hi) : (th > lo || th < hi);
    if (inside_arc) return s.depths[static_cast<std::size_t>(depth)][i];
  }
  throw std::logic_error("locate: bracket search fell through");
}

// Whether the orbit of the given mark returns to the piece holding the mark
// at every depth up to max_depth, for some period. Candidate periods range
// over the mark angle's preperiod plus cycle length; the orbit check covers
// one full tail and two cycles, which is enough to certify all returns.
inline bool is_renormalizable(const PuzzleSystem& s, int mark_index, int max_depth) {
  if (s.graph.marks.empty())
    throw std::invalid_argument("is_renormalizable: the system has no critical marks");
  if (mark_index < 0 || mark_index >= static_cast<int>(s.graph.marks.size()))
    throw std::invalid_argument("is_renormalizable: mark index out of range");
  if (max_depth < 1) throw std::invalid_argument("is_renormalizable: max_depth must be at least 1");
  if (s.depth() < max_depth)
    throw std::invalid_argument("is_renormalizable: pull the system back to max_depth first");
  const RationalAngle c = s.graph.marks[static_cast<std::size_t>(mark_index)].angle;
  const AngleOrbit orb = orbit(c, static_cast<std::uint64_t>(s.graph.d0));
  const int tail = static_cast<int>(orb.preperiod);
  const int cycle = static_cast<int>(orb.period);
  for (int p = 1; p <= tail + cycle; ++p) {
    bool returns = true;
    for (int depth = 1; depth <= max_depth && returns; ++depth) {
      const int home = detail::sector_index_at(s, depth, c);
      RationalAngle a = c;
      for (int k = 1; k <= tail + 2 * cycle + 1 && returns; ++k) {
        for (int j = 0; j < p; ++j) a = mul_d(a, static_cast<std::uint64_t>(s.graph.d0));
        if (detail::sector_index_at(s, depth, a) != home) returns = false;
      }
    }
    if (returns) return true;
  }
  return false;
}

// One line per piece, depths 1 through depth: "P(n,i) -> P(m,j)" mapping
// each piece to its image. Stable across runs; meant for golden comparisons.
inline std::string orbit_relations(const PuzzleSystem& s, int depth) {
  s.pieces(depth);
  std::string out;
  for (int n = 1; n <= depth; ++n)
    for (const PuzzlePiece& p : s.depths[static_cast<std::size_t>(n)])
      out += p.id.str() + " -> " + p.image->str() + "\n";
  return out;
}

inline void to_json(nlohmann::json& j, const PuzzleSystem& s) {
  j = nlohmann::json{{"degrees", {s.graph.d0, s.graph.d1, s.graph.d2}},
                     {"depth", s.depth()},
                     {"nodes", nlohmann::json::array()},
                     {"edges", nlohmann::json::array()}};
  for (const auto& level : s.depths)
    for (const PuzzlePiece& p : level) {
      nlohmann::json node{{"id", p.id.str()},
                          {"depth", p.id.depth},
                          {"kind", p.is_sector ? "sector" : "satellite"},
                          {"critical", p.critical_marks},
                          {"straddles_curve", p.straddles_curve},
                          {"boundary", p.boundary}};
      if (p.is_sector)
        node["interval"] = {p.lo.str(), p.hi.str()};
      else
        node["key"] = p.lo.str();
      j["nodes"].push_back(std::move(node));
    }
  for (const auto& level : s.depths)
    for (const PuzzlePiece& p : level) {
      if (p.parent)
        j["edges"].push_back({{"from", p.id.str()}, {"to", p.parent->str()}, {"type", "parent"}});
      if (p.image)
        j["edges"].push_back({{"from", p.id.str()}, {"to", p.image->str()}, {"type", "image"}});
    }
}

}  // namespace polyglue
