#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "polyglue/puzzle.hpp"

// Orbit closing at a fixed puzzle depth.
//
// A non-renormalizable critical point never settles into a single puzzle
// nest, so its depth-N itinerary keeps moving. The closing construction
// replaces the map inside critical depth-N pieces only, redirecting each
// Julia critical point onto a nearby candidate orbit that returns to its own
// piece. The result is hyperbolic combinatorics: every critical itinerary is
// eventually periodic and every reached cycle carries a critical point.
//
// Everything here is piece-level. The geometric surgery (choosing the curve
// around the critical value and rewiring the covering inside its preimage)
// is represented by its effect on itineraries plus a ledger of which pieces
// were touched; downstream consumers only ever read the combinatorics. The
// one genuinely geometric ingredient, pushing the gluing curve inward so the
// surgery never disturbs the curve dynamics, is kept as an explicit polar
// model (PushInProfile / push_in).

namespace polyglue {

// Transition structure of one puzzle depth: vertex i is pieces(depth)[i],
// with an edge i -> j whenever some depth+1 piece nested inside i maps onto
// j. Since every piece maps *onto* its image, walks in this graph are
// exactly the depth-N itineraries that actual orbits can realize.
struct TransitionGraph {
  struct Critical {
    std::string label;
    int vertex = 0;
    int degree = 2;  // local degree of the critical point
  };

  int depth = 0;
  std::vector<PieceId> pieces;             // vertex i = pieces[i]
  std::vector<std::vector<int>> edges;     // out-neighbours, sorted, deduplicated
  std::vector<Critical> criticals;
  std::vector<bool> on_curve;              // vertex straddles the gluing curve

  int vertex_of(const PieceId& id) const {
    for (std::size_t i = 0; i < pieces.size(); ++i)
      if (pieces[i] == id) return static_cast<int>(i);
    return -1;
  }

  bool has_edge(int from, int to) const {
    const auto& out = edges[static_cast<std::size_t>(from)];
    return std::binary_search(out.begin(), out.end(), to);
  }
};

inline TransitionGraph transition_graph(const PuzzleSystem& s, int depth) {
  if (depth < 0 || s.depth() < depth + 1)
    throw std::invalid_argument("transition-graph: level " + std::to_string(depth) +
                                " needs the system pulled back to depth " +
                                std::to_string(depth + 1) + " (have " +
                                std::to_string(s.depth()) + ")");
  const auto& verts = s.pieces(depth);
  TransitionGraph g;
  g.depth = depth;
  g.edges.resize(verts.size());
  for (const auto& p : verts) {
    g.pieces.push_back(p.id);
    g.on_curve.push_back(p.straddles_curve);
    for (const auto& label : p.critical_marks)
      // initial graphs declare simple critical points only; a degenerate
      // mark would need a multiplicity the graph does not carry
      g.criticals.push_back({label, static_cast<int>(g.pieces.size()) - 1, 2});
  }
  for (const auto& child : s.pieces(depth + 1)) {
    const int from = child.parent->index - 1;
    const int to = child.image->index - 1;
    g.edges[static_cast<std::size_t>(from)].push_back(to);
  }
  for (auto& out : g.edges) {
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
  }
  return g;
}

// A first-return orbit through the transition graph: chain[0] is the
// critical point's own piece, the walk revisits it after exactly k steps,
// and minimality of k forces the intermediate pieces to be pairwise
// distinct (a repeat could be cut out, shortening the return).
struct Candidate {
  std::string critical_label;
  int k = 0;
  std::vector<PieceId> chain;  // the k pairwise-distinct pieces visited
};

namespace detail {

inline int critical_vertex(const TransitionGraph& g, const std::string& label) {
  for (const auto& c : g.criticals)
    if (c.label == label) return c.vertex;
  throw std::invalid_argument("closing: no critical point labelled '" + label + "'");
}

}  // namespace detail

// Breadth-first search for the minimal first-return time of the piece
// holding the given critical point, then the lexicographically smallest
// closed walk of that length (smallest vertex index at each step among
// those that can still make it back in time). The budget scales with the
// system: returns exist by the eventually-onto property, but how soon is
// not bounded a priori, so running out is reported as a budget problem,
// never as nonexistence.
inline Candidate find_candidate(const TransitionGraph& g, const std::string& critical_label) {
  const int n = static_cast<int>(g.pieces.size());
  const int a = detail::critical_vertex(g, critical_label);
  const int k_max = 10 * n;

  // reach[j][v] = a walk of length j from v ends at a
  std::vector<std::vector<char>> reach;
  std::vector<char> row(static_cast<std::size_t>(n), 0);
  row[static_cast<std::size_t>(a)] = 1;
  reach.push_back(row);
  int k = 0;
  for (int j = 1; j <= k_max && k == 0; ++j) {
    const auto& prev = reach.back();
    std::vector<char> next(static_cast<std::size_t>(n), 0);
    for (int v = 0; v < n; ++v)
      for (int w : g.edges[static_cast<std::size_t>(v)])
        if (prev[static_cast<std::size_t>(w)]) {
          next[static_cast<std::size_t>(v)] = 1;
          break;
        }
    if (next[static_cast<std::size_t>(a)]) k = j;
    reach.push_back(std::move(next));
  }
  if (k == 0)
    throw std::runtime_error("candidate-budget-exhausted: no return to " +
                             g.pieces[static_cast<std::size_t>(a)].str() + " within " +
                             std::to_string(k_max) + " steps (depth or budget too small, "
                             "not proof of nonexistence)");

  Candidate cand{critical_label, k, {g.pieces[static_cast<std::size_t>(a)]}};
  int cur = a;
  for (int i = 1; i < k; ++i) {
    int pick = -1;
    for (int w : g.edges[static_cast<std::size_t>(cur)])
      if (reach[static_cast<std::size_t>(k - i)][static_cast<std::size_t>(w)]) {
        pick = w;
        break;
      }
    if (pick < 0) throw std::logic_error("closing: reachability table inconsistent");
    cand.chain.push_back(g.pieces[static_cast<std::size_t>(pick)]);
    cur = pick;
  }
  for (std::size_t i = 0; i < cand.chain.size(); ++i)
    for (std::size_t j = i + 1; j < cand.chain.size(); ++j)
      if (cand.chain[i] == cand.chain[j])
        throw std::logic_error("closing: minimal return revisited a piece");
  return cand;
}

inline Candidate find_candidate(const PuzzleSystem& s, const std::string& critical_label,
                                int depth) {
  return find_candidate(transition_graph(s, depth), critical_label);
}

// One critical point's rewritten depth-N itinerary. The stored list is long
// enough to exhibit the eventual period twice, so a checker can recover
// tail and cycle lengths from the data alone.
struct OrbitCombinatorics {
  std::string critical_label;
  std::vector<PieceId> itinerary;
  int local_degree = 2;
};

struct ClosedSystem {
  int depth = 0;
  std::vector<OrbitCombinatorics> orbits;
  std::vector<std::vector<PieceId>> marked_cycles;  // each carries >= 1 critical piece
  std::vector<PieceId> modified_pieces;             // always critical pieces
  bool curve_pushed_in = false;  // a modified piece straddled the gluing curve
};

namespace detail {

// Tail and period of a finite itinerary: split at the first revisit, then
// demand the remainder repeats with that period. consistent == false with
// tail >= 0 means the walk came back but then left its cycle; tail == -1
// means it never came back at all.
struct OrbitShape {
  int tail = -1;
  int cycle = 0;
  bool consistent = false;
};

inline OrbitShape orbit_shape(const std::vector<PieceId>& it) {
  OrbitShape shape;
  const int n = static_cast<int>(it.size());
  for (int j = 1; j < n && shape.tail < 0; ++j)
    for (int i = 0; i < j; ++i)
      if (it[static_cast<std::size_t>(j)] == it[static_cast<std::size_t>(i)]) {
        shape.tail = i;
        shape.cycle = j - i;
        break;
      }
  if (shape.tail < 0) return shape;
  shape.consistent = true;
  for (int m = shape.tail + shape.cycle; m < n; ++m)
    if (!(it[static_cast<std::size_t>(m)] == it[static_cast<std::size_t>(m - shape.cycle)]))
      shape.consistent = false;
  return shape;
}

// The induction over critical points. State: a marked piece set with one
// marked point each, represented by its successor map (marked points map to
// marked points). Fresh chains close into a cycle; a chain that hits the
// marked set is cut at the first meeting and redirected into it. Either
// way the map only changes inside critical pieces: the chain head always,
// plus any chain piece whose resident critical point gets swept into the
// orbit passing through it.
inline ClosedSystem close_orbit_impl(
    const TransitionGraph& g,
    const std::function<Candidate(const std::string&)>& candidate_for) {
  const int n = static_cast<int>(g.pieces.size());
  std::vector<const TransitionGraph::Critical*> resident(static_cast<std::size_t>(n), nullptr);
  for (const auto& c : g.criticals) {
    if (c.vertex < 0 || c.vertex >= n)
      throw std::invalid_argument("closing: critical '" + c.label + "' is off the graph");
    auto& slot = resident[static_cast<std::size_t>(c.vertex)];
    if (slot != nullptr)
      throw std::invalid_argument("closing: piece " +
                                  g.pieces[static_cast<std::size_t>(c.vertex)].str() +
                                  " holds critical points '" + slot->label + "' and '" +
                                  c.label + "'; the depth is too small to separate them");
    slot = &c;
  }

  std::vector<int> succ(static_cast<std::size_t>(n), -1);
  std::vector<char> marked(static_cast<std::size_t>(n), 0);
  std::vector<std::vector<int>> cycles;
  std::vector<int> modified;

  for (const auto& crit : g.criticals) {
    if (marked[static_cast<std::size_t>(crit.vertex)]) continue;  // swept into an earlier orbit

    const Candidate cand = candidate_for(crit.label);
    std::vector<int> verts;
    for (const auto& id : cand.chain) {
      const int v = g.vertex_of(id);
      if (v < 0)
        throw std::invalid_argument("closing: candidate for '" + crit.label +
                                    "' visits " + id.str() + ", which is not a graph vertex");
      verts.push_back(v);
    }
    const int k = static_cast<int>(verts.size());
    if (k == 0 || k != cand.k || verts[0] != crit.vertex)
      throw std::invalid_argument("closing: candidate for '" + crit.label +
                                  "' does not start a length-" + std::to_string(cand.k) +
                                  " return at its critical piece");
    for (int i = 0; i < k; ++i) {
      for (int j = i + 1; j < k; ++j)
        if (verts[static_cast<std::size_t>(i)] == verts[static_cast<std::size_t>(j)])
          throw std::invalid_argument("closing: candidate for '" + crit.label +
                                      "' revisits " + cand.chain[static_cast<std::size_t>(i)].str());
      const int from = verts[static_cast<std::size_t>(i)];
      const int to = verts[static_cast<std::size_t>((i + 1) % k)];
      if (!g.has_edge(from, to))
        throw std::invalid_argument("closing: candidate for '" + crit.label +
                                    "' uses the missing transition " +
                                    g.pieces[static_cast<std::size_t>(from)].str() + " -> " +
                                    g.pieces[static_cast<std::size_t>(to)].str());
    }

    int meet = -1;
    for (int i = 1; i < k && meet < 0; ++i)
      if (marked[static_cast<std::size_t>(verts[static_cast<std::size_t>(i)])]) meet = i;

    const int stop = meet < 0 ? k : meet;
    for (int i = 0; i < stop; ++i) {
      const int v = verts[static_cast<std::size_t>(i)];
      succ[static_cast<std::size_t>(v)] = verts[static_cast<std::size_t>((i + 1) % k)];
      marked[static_cast<std::size_t>(v)] = 1;
      if (i == 0 || resident[static_cast<std::size_t>(v)] != nullptr) modified.push_back(v);
    }
    if (meet < 0) cycles.push_back(verts);
  }

  ClosedSystem cs;
  cs.depth = g.depth;
  for (const auto& crit : g.criticals) {
    std::vector<int> walk;
    std::vector<int> first(static_cast<std::size_t>(n), -1);
    int v = crit.vertex;
    while (first[static_cast<std::size_t>(v)] < 0) {
      first[static_cast<std::size_t>(v)] = static_cast<int>(walk.size());
      walk.push_back(v);
      v = succ[static_cast<std::size_t>(v)];
      if (v < 0) throw std::logic_error("closing: marked orbit leaves the marked set");
    }
    const int tail = first[static_cast<std::size_t>(v)];
    const int cyc = static_cast<int>(walk.size()) - tail;
    OrbitCombinatorics oc;
    oc.critical_label = crit.label;
    oc.local_degree = crit.degree;
    for (int w : walk) oc.itinerary.push_back(g.pieces[static_cast<std::size_t>(w)]);
    for (int i = 0; i < cyc; ++i)  // second period, so the shape is visible in the data
      oc.itinerary.push_back(g.pieces[static_cast<std::size_t>(walk[static_cast<std::size_t>(tail + i)])]);
    cs.orbits.push_back(std::move(oc));
  }
  for (const auto& cyc : cycles) {
    std::vector<PieceId> ids;
    for (int v : cyc) ids.push_back(g.pieces[static_cast<std::size_t>(v)]);
    cs.marked_cycles.push_back(std::move(ids));
  }
  std::sort(modified.begin(), modified.end());
  for (int v : modified) {
    cs.modified_pieces.push_back(g.pieces[static_cast<std::size_t>(v)]);
    if (g.on_curve[static_cast<std::size_t>(v)]) cs.curve_pushed_in = true;
  }
  return cs;
}

}  // namespace detail

// Close every critical orbit using the supplied candidates. Candidates for
// critical points that get swept into an earlier orbit are never consulted,
// so they may be omitted.
inline ClosedSystem close_orbit(const TransitionGraph& g,
                                const std::vector<Candidate>& candidates) {
  return detail::close_orbit_impl(g, [&](const std::string& label) {
    for (const auto& c : candidates)
      if (c.critical_label == label) return c;
    throw std::invalid_argument("closing: no candidate supplied for critical '" + label + "'");
  });
}

// Same, finding candidates on demand (only for the critical points that
// actually need one).
inline ClosedSystem close_orbit(const TransitionGraph& g) {
  return detail::close_orbit_impl(
      g, [&](const std::string& label) { return find_candidate(g, label); });
}

inline ClosedSystem close_orbit(const PuzzleSystem& s, int depth) {
  return close_orbit(transition_graph(s, depth));
}

// Polar model of pushing the gluing curve inward before any surgery. The
// basin core still runs the power map; on the collar [r, r_tilde] the
// radius follows the linear profile eta with eta(r) = r^d0 (continuity
// with the core) and eta(r_tilde) = r_tilde; from r_tilde out every circle
// is invariant and the map is pure angle d0-tupling, so |z| = r_tilde can
// serve as the new gluing curve, clear of all modification sites.
struct PushInProfile {
  double r = 0.5;
  double r_tilde = 0.75;
  int d0 = 2;

  double eta(double t) const {
    const double lo = std::pow(r, d0);
    return lo + (t - r) * (r_tilde - lo) / (r_tilde - r);
  }
};

// Action of the pushed-in map on polar coordinates (radius, angle in
// turns); the returned angle is reduced to [0,1).
inline std::pair<double, double> push_in(const PushInProfile& p, double t, double theta) {
  if (!(p.d0 >= 2) || !(p.r > 0.0) || !(p.r < p.r_tilde) || !(p.r_tilde < 1.0))
    throw std::invalid_argument("push-in: profile needs 0 < r < r_tilde < 1 and d0 >= 2");
  if (!(t > 0.0) || !(t <= 1.0))
    throw std::domain_error("push-in: t = " + std::to_string(t) + " outside (0,1]");
  const double a = p.d0 * theta;
  const double ang = a - std::floor(a);
  if (t >= p.r_tilde) return {t, ang};
  if (t >= p.r) return {p.eta(t), ang};
  return {std::pow(t, p.d0), ang};
}

struct HyperbolicReport {
  struct Entry {
    std::string label;
    int tail = 0;
    int cycle = 0;
    int local_degree = 2;
  };

  bool pass = false;
  std::vector<Entry> portrait;
  std::vector<std::string> offending;  // "<label>: <reason>" per violation

  std::string str() const {
    std::string out = pass ? "hyperbolic: PASS\n" : "hyperbolic: FAIL\n";
    for (const auto& e : portrait)
      out += e.label + ": tail " + std::to_string(e.tail) + ", cycle " +
             std::to_string(e.cycle) + ", degree " + std::to_string(e.local_degree) + "\n";
    for (const auto& o : offending) out += o + "\n";
    return out;
  }
};

// Independent pass over a ClosedSystem: every itinerary must be eventually
// periodic (visible in the stored prefix), stay in its cycle once entered,
// reach a cycle holding some critical point's home piece, and match a
// registered marked cycle up to rotation. Pre-cycle pieces are distinct by
// the first-revisit split, which is the "meets a depth-N puzzle at most
// once" property.
inline HyperbolicReport verify_hyperbolic(const ClosedSystem& cs) {
  HyperbolicReport rep;
  std::vector<PieceId> homes;
  for (const auto& o : cs.orbits) {
    if (o.itinerary.empty())
      rep.offending.push_back(o.critical_label + ": empty itinerary");
    else
      homes.push_back(o.itinerary.front());
  }

  const auto is_rotation = [](const std::vector<PieceId>& a, const std::vector<PieceId>& b) {
    if (a.size() != b.size()) return false;
    const int m = static_cast<int>(a.size());
    for (int s = 0; s < m; ++s) {
      bool ok = true;
      for (int i = 0; i < m && ok; ++i)
        ok = a[static_cast<std::size_t>(i)] == b[static_cast<std::size_t>((i + s) % m)];
      if (ok) return true;
    }
    return false;
  };

  for (const auto& o : cs.orbits) {
    if (o.itinerary.empty()) continue;
    const auto shape = detail::orbit_shape(o.itinerary);
    if (shape.tail < 0) {
      rep.offending.push_back(o.critical_label + ": itinerary never revisits a piece");
      continue;
    }
    if (!shape.consistent) {
      rep.offending.push_back(o.critical_label + ": itinerary leaves its cycle");
      continue;
    }
    std::vector<PieceId> cycle(o.itinerary.begin() + shape.tail,
                               o.itinerary.begin() + shape.tail + shape.cycle);
    bool carries = false;
    for (const auto& h : homes)
      for (const auto& p : cycle)
        if (p == h) carries = true;
    if (!carries)
      rep.offending.push_back(o.critical_label + ": reached cycle holds no critical point");
    bool registered = false;
    for (const auto& mc : cs.marked_cycles)
      if (is_rotation(cycle, mc)) registered = true;
    if (!registered)
      rep.offending.push_back(o.critical_label + ": cycle is not a marked cycle");
    rep.portrait.push_back({o.critical_label, shape.tail, shape.cycle, o.local_degree});
  }

  for (const auto& mc : cs.marked_cycles) {
    bool carries = false;
    for (const auto& h : homes)
      for (const auto& p : mc)
        if (p == h) carries = true;
    if (!carries && !mc.empty())
      rep.offending.push_back(mc.front().str() + ": marked cycle holds no critical point");
  }

  rep.pass = rep.offending.empty();
  return rep;
}

// Critical portrait export, the hand-off format for realizing the closed
// combinatorics as an actual map.
inline void to_json(nlohmann::json& j, const ClosedSystem& cs) {
  j = nlohmann::json{{"depth", cs.depth},
                     {"curve_pushed_in", cs.curve_pushed_in},
                     {"orbits", nlohmann::json::array()},
                     {"marked_cycles", nlohmann::json::array()},
                     {"modified_pieces", nlohmann::json::array()}};
  for (const auto& o : cs.orbits) {
    const auto shape = detail::orbit_shape(o.itinerary);
    nlohmann::json it = nlohmann::json::array();
    for (const auto& id : o.itinerary) it.push_back(id.str());
    j["orbits"].push_back(nlohmann::json{{"label", o.critical_label},
                                         {"local_degree", o.local_degree},
                                         {"itinerary", std::move(it)},
                                         {"tail", shape.tail},
                                         {"cycle", shape.cycle}});
  }
  for (const auto& mc : cs.marked_cycles) {
    nlohmann::json c = nlohmann::json::array();
    for (const auto& id : mc) c.push_back(id.str());
    j["marked_cycles"].push_back(std::move(c));
  }
  for (const auto& id : cs.modified_pieces) j["modified_pieces"].push_back(id.str());
}

}  // namespace polyglue
