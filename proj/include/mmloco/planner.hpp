#pragma once

// Multi-modal graph construction (uniform lattice or multi-modal PRM) and
// optimal search (Dijkstra / A*) over mode-dependent energy costs.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "mmloco/env.hpp"
#include "mmloco/error.hpp"

namespace mmloco {

enum class Mode : int { Legged = 0, Aerial = 1, Transition = 2 };

inline const char* mode_name(Mode m) {
  switch (m) {
    case Mode::Legged: return "legged";
    case Mode::Aerial: return "aerial";
    case Mode::Transition: return "transition";
  }
  return "?";
}

inline Mode mode_from_name(const std::string& s) {
  if (s == "legged") return Mode::Legged;
  if (s == "aerial") return Mode::Aerial;
  if (s == "transition") return Mode::Transition;
  throw ConfigError("unknown mode '" + s + "'");
}

/// Edge-cost coefficients. Defaults come from the ROM power calibration
/// (trot in place vs hover; see mission.hpp calibrate_costs).
struct CostModel {
  double c_leg = 100.6;   // J/m
  double c_air = 2191.5;  // J/m
  double p_leg = 0.0;     // J/s
  double p_air = 0.0;     // J/s
  double E_trans = 4383.0;
  double v_leg = 0.2;
  double v_air = 1.0;

  double legged_rate() const { return c_leg + p_leg / v_leg; }
  double aerial_rate() const { return c_air + p_air / v_air; }

  void validate() const {
    if (c_leg < 0 || c_air < 0 || p_leg < 0 || p_air < 0) throw ConfigError("cost coefficients must be >= 0");
    if (!(E_trans > 0)) throw ConfigError("E_trans must be positive");
    if (!(v_leg > 0 && v_air > 0)) throw ConfigError("nominal speeds must be positive");
  }
};

inline double edge_cost(double length, Mode mode, const CostModel& c) {
  if (length < 0) throw Error("edge_cost: negative length");
  switch (mode) {
    case Mode::Legged: return c.c_leg * length + c.p_leg * length / c.v_leg;
    case Mode::Aerial: return c.c_air * length + c.p_air * length / c.v_air;
    case Mode::Transition: return c.E_trans;
  }
  return 0.0;
}

struct Node {
  int id = 0;
  Vec3 pos = Vec3::Zero();
  Mode mode = Mode::Legged;
};

struct Edge {
  int a = 0;
  int b = 0;
  Mode mode = Mode::Legged;
  double length = 0.0;
  double cost = 0.0;
};

struct PlannerOptions {
  double stand_height = 0.30;     // walkable layer above the surface
  double z_tol = 0.02;            // walkable-layer and vertical-transition tolerance
  double clearance = 0.25;        // obstacle inflation for collision checks
  double collision_step = 0.05;   // segment_free sampling
  double max_step_height = 0.10;  // largest surface jump a legged edge may cross
  int k_neighbors = 10;
  double rho_leg = 0.4;
  double transition_rise = 0.5;   // height of PRM takeoff nodes above the legged node
};

class ModalGraph {
 public:
  std::vector<Node> nodes;
  std::vector<Edge> edges;
  nlohmann::json metadata = nlohmann::json::object();

  int add_node(const Vec3& pos, Mode mode) {
    const int id = static_cast<int>(nodes.size());
    nodes.push_back({id, pos, mode});
    adjacency_.emplace_back();
    return id;
  }

  // Returns false when the pair is already connected.
  bool add_edge(int a, int b, Mode mode, const CostModel& cost) {
    if (a == b) return false;
    const auto key = pair_key(a, b);
    if (!pairs_.insert(key).second) return false;
    const double len = (nodes[static_cast<std::size_t>(a)].pos - nodes[static_cast<std::size_t>(b)].pos).norm();
    const int e = static_cast<int>(edges.size());
    edges.push_back({a, b, mode, len, edge_cost(len, mode, cost)});
    adjacency_[static_cast<std::size_t>(a)].push_back(e);
    adjacency_[static_cast<std::size_t>(b)].push_back(e);
    return true;
  }

  bool has_edge(int a, int b) const { return pairs_.count(pair_key(a, b)) > 0; }

  const std::vector<int>& incident(int n) const { return adjacency_[static_cast<std::size_t>(n)]; }

  int other(const Edge& e, int n) const { return e.a == n ? e.b : e.a; }

  std::size_t size() const { return nodes.size(); }

  std::size_t count(Mode m) const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [m](const Node& n) { return n.mode == m; }));
  }
  std::size_t edge_count(Mode m) const {
    return static_cast<std::size_t>(std::count_if(edges.begin(), edges.end(), [m](const Edge& e) { return e.mode == m; }));
  }

  // Copy keeping only edges accepted by `keep` (nodes unchanged).
  template <class Pred>
  ModalGraph filtered(Pred&& keep) const {
    ModalGraph g;
    g.metadata = metadata;
    for (const auto& n : nodes) g.add_node(n.pos, n.mode);
    for (const auto& e : edges)
      if (keep(e)) g.add_raw_edge(e);
    return g;
  }

  void add_raw_edge(const Edge& e) {
    if (!pairs_.insert(pair_key(e.a, e.b)).second) return;
    const int idx = static_cast<int>(edges.size());
    edges.push_back(e);
    adjacency_[static_cast<std::size_t>(e.a)].push_back(idx);
    adjacency_[static_cast<std::size_t>(e.b)].push_back(idx);
  }

  // Recompute all edge costs under a different cost model.
  void reprice(const CostModel& c) {
    for (auto& e : edges) e.cost = edge_cost(e.length, e.mode, c);
  }

 private:
  static std::uint64_t pair_key(int a, int b) {
    const auto lo = static_cast<std::uint64_t>(std::min(a, b));
    const auto hi = static_cast<std::uint64_t>(std::max(a, b));
    return (lo << 32) | hi;
  }

  std::vector<std::vector<int>> adjacency_;
  std::unordered_set<std::uint64_t> pairs_;
};

// ---- shared construction helpers ---------------------------------------------------

namespace detail {

struct BuildContext {
  const Environment& env;
  Environment collision;
  const PlannerOptions& opt;

  BuildContext(const Environment& e, const PlannerOptions& o)
      : env(e), collision(e.inflated(o.clearance)), opt(o) {}

  double walkable_z(double x, double y) const { return env.surface_height(x, y) + opt.stand_height; }

  bool legged_ok(const Vec3& p) const {
    return std::abs(p.z() - walkable_z(p.x(), p.y())) <= opt.z_tol && collision.is_free(p);
  }
  bool aerial_ok(const Vec3& p) const {
    return p.z() > walkable_z(p.x(), p.y()) + opt.z_tol && collision.is_free(p);
  }

  bool edge_ok(const Vec3& a, const Vec3& b, Mode mode) const {
    if (!collision.segment_free(a, b, opt.collision_step)) return false;
    if (mode != Mode::Legged) return true;
    const double len = (b - a).norm();
    const auto n = std::max<long>(1, static_cast<long>(std::ceil(len / opt.collision_step)));
    double prev = env.surface_height(a.x(), a.y());
    for (long i = 1; i <= n; ++i) {
      const Vec3 p = a + (static_cast<double>(i) / static_cast<double>(n)) * (b - a);
      const double h = env.surface_height(p.x(), p.y());
      if (std::abs(h - prev) > opt.max_step_height) return false;
      prev = h;
    }
    return true;
  }
};

// Coordinates of a lattice with the given spacing centered on [lo, hi]. When
// the extent is a multiple of the spacing the lattice touches both ends, and
// halving the spacing nests the coarse lattice inside the fine one.
inline std::vector<double> lattice_axis(double lo, double hi, double spacing) {
  const double extent = hi - lo;
  const auto n = static_cast<long>(std::floor(extent / spacing + 1e-9));
  const double center = 0.5 * (lo + hi);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n + 1));
  for (long i = 0; i <= n; ++i) out.push_back(center + (static_cast<double>(i) - 0.5 * static_cast<double>(n)) * spacing);
  return out;
}

}  // namespace detail

/// Uniform discretization: an aerial lattice over free space, a legged layer
/// at stand height over the walkable surface, 26-connected aerial and
/// 8-connected legged edges, and a vertical transition from each legged node
/// to the lowest aerial node of its column when that node is within one spacing.
inline ModalGraph discretize_uniform(const Environment& env, double spacing, const CostModel& cost,
                                     const PlannerOptions& opt = {}) {
  if (!(spacing > 0)) throw Error("discretize_uniform: spacing must be positive");
  cost.validate();
  const detail::BuildContext ctx(env, opt);
  const auto xs = detail::lattice_axis(env.bounds().min.x(), env.bounds().max.x(), spacing);
  const auto ys = detail::lattice_axis(env.bounds().min.y(), env.bounds().max.y(), spacing);
  const auto zs = detail::lattice_axis(env.bounds().min.z(), env.bounds().max.z(), spacing);
  const long nx = static_cast<long>(xs.size()), ny = static_cast<long>(ys.size()), nz = static_cast<long>(zs.size());

  ModalGraph g;
  std::vector<int> aerial(static_cast<std::size_t>(nx * ny * nz), -1), legged(static_cast<std::size_t>(nx * ny), -1);
  auto aidx = [&](long i, long j, long k) { return static_cast<std::size_t>((i * ny + j) * nz + k); };
  auto lidx = [&](long i, long j) { return static_cast<std::size_t>(i * ny + j); };

  for (long i = 0; i < nx; ++i)
    for (long j = 0; j < ny; ++j) {
      const Vec3 p(xs[static_cast<std::size_t>(i)], ys[static_cast<std::size_t>(j)],
                   ctx.walkable_z(xs[static_cast<std::size_t>(i)], ys[static_cast<std::size_t>(j)]));
      if (ctx.legged_ok(p)) legged[lidx(i, j)] = g.add_node(p, Mode::Legged);
    }
  for (long i = 0; i < nx; ++i)
    for (long j = 0; j < ny; ++j)
      for (long k = 0; k < nz; ++k) {
        const Vec3 p(xs[static_cast<std::size_t>(i)], ys[static_cast<std::size_t>(j)], zs[static_cast<std::size_t>(k)]);
        if (ctx.aerial_ok(p)) aerial[aidx(i, j, k)] = g.add_node(p, Mode::Aerial);
      }
  if (g.size() == 0) throw Error("discretize_uniform: no free lattice points");

  auto connect = [&](int a, int b, Mode m) {
    if (a < 0 || b < 0) return;
    if (ctx.edge_ok(g.nodes[static_cast<std::size_t>(a)].pos, g.nodes[static_cast<std::size_t>(b)].pos, m))
      g.add_edge(a, b, m, cost);
  };

  // forward half of each neighborhood so every pair is visited once
  for (long i = 0; i < nx; ++i)
    for (long j = 0; j < ny; ++j) {
      for (long di = -1; di <= 1; ++di)
        for (long dj = -1; dj <= 1; ++dj) {
          if (std::make_pair(di, dj) <= std::make_pair(0L, 0L)) continue;
          const long a = i + di, b = j + dj;
          if (a < 0 || a >= nx || b < 0 || b >= ny) continue;
          connect(legged[lidx(i, j)], legged[lidx(a, b)], Mode::Legged);
        }
      for (long k = 0; k < nz; ++k)
        for (long di = -1; di <= 1; ++di)
          for (long dj = -1; dj <= 1; ++dj)
            for (long dk = -1; dk <= 1; ++dk) {
              if (std::make_tuple(di, dj, dk) <= std::make_tuple(0L, 0L, 0L)) continue;
              const long a = i + di, b = j + dj, c = k + dk;
              if (a < 0 || a >= nx || b < 0 || b >= ny || c < 0 || c >= nz) continue;
              connect(aerial[aidx(i, j, k)], aerial[aidx(a, b, c)], Mode::Aerial);
            }
      const int leg = legged[lidx(i, j)];
      if (leg < 0) continue;
      const double zl = g.nodes[static_cast<std::size_t>(leg)].pos.z();
      for (long k = 0; k < nz; ++k) {
        const int air = aerial[aidx(i, j, k)];
        if (air < 0) continue;
        const double dz = g.nodes[static_cast<std::size_t>(air)].pos.z() - zl;
        if (dz > 0 && dz <= spacing + 1e-12) connect(leg, air, Mode::Transition);
        break;
      }
    }

  g.metadata = {{"method", "uniform"},
                {"spacing", spacing},
                {"stand_height", opt.stand_height},
                {"z_tol", opt.z_tol},
                {"clearance", opt.clearance},
                {"collision_step", opt.collision_step}};
  return g;
}

namespace detail {

// Uniform double in [0,1) from the top 53 bits; fixed across standard libraries.
inline double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace detail

/// Multi-modal PRM. Terminal points (start/goal) are inserted first, in
/// order, as ids 0..n-1. Samples are drawn single-threaded from the seed: a
/// fraction rho_leg projected onto the walkable layer, the rest uniform in the
/// workspace. Each node connects to its k nearest same-mode neighbours inside
/// connect_radius when the segment is free. Each legged node gets one vertical
/// transition: to the nearest aerial node overhead, or to a new aerial node
/// placed transition_rise above it.
inline ModalGraph discretize_mmprm(const Environment& env, int n_samples, double connect_radius, std::uint64_t seed,
                                   const CostModel& cost, const PlannerOptions& opt = {},
                                   std::span<const Vec3> terminals = {}) {
  if (n_samples <= 0) throw Error("discretize_mmprm: n_samples must be positive");
  if (!(connect_radius > 0)) throw Error("discretize_mmprm: connect_radius must be positive");
  cost.validate();
  const detail::BuildContext ctx(env, opt);
  const Box& bb = env.bounds();
  ModalGraph g;

  for (const auto& t : terminals) {
    const double wz = ctx.walkable_z(t.x(), t.y());
    if (std::abs(t.z() - wz) <= opt.z_tol) {
      const Vec3 p(t.x(), t.y(), wz);
      if (!ctx.legged_ok(p)) throw Error("discretize_mmprm: terminal point is not free");
      g.add_node(p, Mode::Legged);
    } else {
      if (!ctx.aerial_ok(t)) throw Error("discretize_mmprm: terminal point is not free");
      g.add_node(t, Mode::Aerial);
    }
  }

  std::mt19937_64 rng(seed);
  for (int s = 0; s < n_samples; ++s) {
    const double ux = detail::unit(rng), uy = detail::unit(rng), uz = detail::unit(rng), um = detail::unit(rng);
    const double x = bb.min.x() + ux * (bb.max.x() - bb.min.x());
    const double y = bb.min.y() + uy * (bb.max.y() - bb.min.y());
    if (um < opt.rho_leg) {
      const Vec3 p(x, y, ctx.walkable_z(x, y));
      if (ctx.legged_ok(p)) g.add_node(p, Mode::Legged);
    } else {
      const Vec3 p(x, y, bb.min.z() + uz * (bb.max.z() - bb.min.z()));
      if (ctx.aerial_ok(p)) g.add_node(p, Mode::Aerial);
    }
  }
  if (g.size() == 0) throw Error("discretize_mmprm: no valid samples");

  // takeoff columns
  const std::size_t sampled = g.size();
  for (std::size_t i = 0; i < sampled; ++i) {
    if (g.nodes[i].mode != Mode::Legged) continue;
    const Vec3 leg = g.nodes[i].pos;
    int best = -1;
    double best_dz = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < g.size(); ++j) {
      const auto& n = g.nodes[j];
      if (n.mode != Mode::Aerial) continue;
      const double dz = n.pos.z() - leg.z();
      if ((n.pos.head<2>() - leg.head<2>()).norm() <= opt.z_tol && dz > 0 && dz <= connect_radius && dz < best_dz) {
        best = static_cast<int>(j);
        best_dz = dz;
      }
    }
    if (best < 0) {
      const Vec3 above(leg.x(), leg.y(), leg.z() + std::min(opt.transition_rise, connect_radius));
      if (ctx.aerial_ok(above) && ctx.edge_ok(leg, above, Mode::Transition)) best = g.add_node(above, Mode::Aerial);
    }
    if (best >= 0 && ctx.edge_ok(leg, g.nodes[static_cast<std::size_t>(best)].pos, Mode::Transition))
      g.add_edge(static_cast<int>(i), best, Mode::Transition, cost);
  }

  // k nearest same-mode neighbours
  const double r2 = connect_radius * connect_radius;
  std::vector<std::pair<double, int>> cand;
  for (std::size_t i = 0; i < g.size(); ++i) {
    cand.clear();
    const auto& ni = g.nodes[i];
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (j == i || g.nodes[j].mode != ni.mode) continue;
      const double d2 = (g.nodes[j].pos - ni.pos).squaredNorm();
      if (d2 <= r2) cand.emplace_back(d2, static_cast<int>(j));
    }
    std::sort(cand.begin(), cand.end());
    const std::size_t k = std::min(cand.size(), static_cast<std::size_t>(opt.k_neighbors));
    for (std::size_t c = 0; c < k; ++c) {
      const int j = cand[c].second;
      if (g.has_edge(static_cast<int>(i), j)) continue;
      if (ctx.edge_ok(ni.pos, g.nodes[static_cast<std::size_t>(j)].pos, ni.mode))
        g.add_edge(static_cast<int>(i), j, ni.mode, cost);
    }
  }

  g.metadata = {{"method", "mmprm"},
                {"n_samples", n_samples},
                {"connect_radius", connect_radius},
                {"seed", seed},
                {"rho_leg", opt.rho_leg},
                {"k_neighbors", opt.k_neighbors},
                {"stand_height", opt.stand_height},
                {"z_tol", opt.z_tol},
                {"clearance", opt.clearance},
                {"collision_step", opt.collision_step}};
  return g;
}

// Nearest node of the given mode, -1 if none.
inline int nearest_node(const ModalGraph& g, const Vec3& p, Mode mode) {
  int best = -1;
  double bd = std::numeric_limits<double>::infinity();
  for (const auto& n : g.nodes) {
    if (n.mode != mode) continue;
    const double d = (n.pos - p).squaredNorm();
    if (d < bd) {
      bd = d;
      best = n.id;
    }
  }
  return best;
}

// ---- search --------------------------------------------------------------------------

struct Plan {
  std::vector<int> nodes;
  std::vector<Vec3> positions;
  std::vector<Mode> modes;        // per node
  std::vector<Mode> edge_modes;   // per edge
  std::vector<double> edge_costs;
  std::vector<double> edge_lengths;
  std::vector<std::size_t> transitions;  // indices into the edge lists
  double total_cost = 0.0;

  std::size_t edge_count() const { return edge_costs.size(); }

  // Mode changes only across transition edges, and the total matches.
  bool consistent() const {
    if (nodes.empty() || positions.size() != nodes.size() || modes.size() != nodes.size()) return false;
    if (edge_modes.size() + 1 != nodes.size() || edge_costs.size() + 1 != nodes.size()) return false;
    double sum = 0.0;
    for (std::size_t e = 0; e < edge_costs.size(); ++e) {
      sum += edge_costs[e];
      const bool change = modes[e] != modes[e + 1];
      if (change != (edge_modes[e] == Mode::Transition)) return false;
    }
    return std::abs(sum - total_cost) <= 1e-9 * std::max(1.0, std::abs(total_cost));
  }
};

struct SearchResult {
  std::optional<Plan> plan;  // empty: goal unreachable
  std::size_t expansions = 0;
  std::vector<int> expansion_order;

  bool found() const { return plan.has_value(); }
};

/// Best-first search with heuristic h (h == 0 gives Dijkstra). Ties on cost
/// are broken by fewer edges, then by the lexicographically smaller node-id
/// sequence; the open list is ordered by (f, edges, node id).
template <class Heuristic>
SearchResult best_first(const ModalGraph& g, int start, int goal, Heuristic&& h) {
  const auto n = g.size();
  if (start < 0 || goal < 0 || static_cast<std::size_t>(start) >= n || static_cast<std::size_t>(goal) >= n)
    throw Error("search: node id out of range");

  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> cost(n, inf);
  std::vector<std::size_t> hops(n, std::numeric_limits<std::size_t>::max());
  std::vector<int> parent(n, -1), parent_edge(n, -1);
  std::vector<char> closed(n, 0);

  auto path_of = [&](int v) {
    std::vector<int> p;
    for (int x = v; x >= 0; x = parent[static_cast<std::size_t>(x)]) p.push_back(x);
    std::reverse(p.begin(), p.end());
    return p;
  };

  using Key = std::tuple<double, std::size_t, int>;
  std::priority_queue<Key, std::vector<Key>, std::greater<>> open;
  const auto s = static_cast<std::size_t>(start);
  cost[s] = 0.0;
  hops[s] = 0;
  open.emplace(h(start), 0, start);

  SearchResult res;
  while (!open.empty()) {
    const auto [f, hop, u] = open.top();
    open.pop();
    const auto uu = static_cast<std::size_t>(u);
    if (closed[uu] || hop != hops[uu] || f != cost[uu] + h(u)) continue;
    closed[uu] = 1;
    ++res.expansions;
    res.expansion_order.push_back(u);
    if (u == goal) break;
    for (int ei : g.incident(u)) {
      const Edge& e = g.edges[static_cast<std::size_t>(ei)];
      const int v = g.other(e, u);
      const auto vv = static_cast<std::size_t>(v);
      if (closed[vv]) continue;
      const double c = cost[uu] + e.cost;
      const std::size_t hc = hops[uu] + 1;
      bool better = c < cost[vv] || (c == cost[vv] && hc < hops[vv]);
      if (!better && c == cost[vv] && hc == hops[vv]) {
        auto mine = path_of(u);
        mine.push_back(v);
        better = mine < path_of(v);
      }
      if (!better) continue;
      cost[vv] = c;
      hops[vv] = hc;
      parent[vv] = u;
      parent_edge[vv] = ei;
      open.emplace(c + h(v), hc, v);
    }
  }

  const auto gg = static_cast<std::size_t>(goal);
  if (!closed[gg]) return res;
  Plan plan;
  plan.nodes = path_of(goal);
  for (std::size_t i = 0; i < plan.nodes.size(); ++i) {
    const Node& nd = g.nodes[static_cast<std::size_t>(plan.nodes[i])];
    plan.positions.push_back(nd.pos);
    plan.modes.push_back(nd.mode);
    if (i == 0) continue;
    const Edge& e = g.edges[static_cast<std::size_t>(parent_edge[static_cast<std::size_t>(plan.nodes[i])])];
    if (e.mode == Mode::Transition) plan.transitions.push_back(plan.edge_modes.size());
    plan.edge_modes.push_back(e.mode);
    plan.edge_costs.push_back(e.cost);
    plan.edge_lengths.push_back(e.length);
  }
  plan.total_cost = cost[gg];
  res.plan = std::move(plan);
  return res;
}

inline SearchResult dijkstra(const ModalGraph& g, int start, int goal) {
  return best_first(g, start, goal, [](int) { return 0.0; });
}

/// Cost-per-metre lower bound used by the A* heuristic: the cheaper of the two
/// locomotion rates, further capped by E_trans / length for the longest
/// transition edge so vertical takeoff edges cannot break consistency.
inline double heuristic_rate(const ModalGraph& g, const CostModel& c) {
  double rate = std::min(c.legged_rate(), c.aerial_rate());
  for (const auto& e : g.edges)
    if (e.mode == Mode::Transition && e.length > 0) rate = std::min(rate, e.cost / e.length);
  return rate;
}

inline SearchResult astar(const ModalGraph& g, int start, int goal, const CostModel& c) {
  const double rate = heuristic_rate(g, c);
  const Vec3 target = g.nodes.at(static_cast<std::size_t>(goal)).pos;
  return best_first(g, start, goal,
                    [&](int n) { return rate * (g.nodes[static_cast<std::size_t>(n)].pos - target).norm(); });
}

/// Exhaustive check that cost(a,b) >= h(a) - h(b) in both directions of every edge.
inline bool heuristic_consistent(const ModalGraph& g, int goal, const CostModel& c, double tol = 1e-9) {
  const double rate = heuristic_rate(g, c);
  const Vec3 target = g.nodes.at(static_cast<std::size_t>(goal)).pos;
  auto h = [&](int n) { return rate * (g.nodes[static_cast<std::size_t>(n)].pos - target).norm(); };
  for (const auto& e : g.edges) {
    const double slack = tol * std::max(1.0, e.cost);
    if (e.cost + slack < h(e.a) - h(e.b) || e.cost + slack < h(e.b) - h(e.a)) return false;
  }
  return true;
}

// ---- start/goal routing ---------------------------------------------------------------

struct RouteOptions {
  std::string method = "uniform";  // "uniform" | "mmprm"
  std::string search = "astar";    // "astar" | "dijkstra"
  double spacing = 0.5;
  int samples = 600;
  double radius = 1.5;
  std::uint64_t seed = 1;
  bool legged_only = false;  // drop aerial and transition edges
};

struct Route {
  ModalGraph graph;
  int start = -1;
  int goal = -1;
  SearchResult result;
};

namespace detail {

// Terminal on a uniform graph: reuse a coincident node, otherwise add one and
// link it to same-mode nodes within one lattice diagonal.
inline int attach_terminal(ModalGraph& g, const BuildContext& ctx, const Vec3& p, double spacing,
                           const CostModel& cost) {
  const double wz = ctx.walkable_z(p.x(), p.y());
  const Mode mode = std::abs(p.z() - wz) <= ctx.opt.z_tol ? Mode::Legged : Mode::Aerial;
  const Vec3 q = mode == Mode::Legged ? Vec3(p.x(), p.y(), wz) : p;
  if (!(mode == Mode::Legged ? ctx.legged_ok(q) : ctx.aerial_ok(q)))
    throw Error("plan_route: start or goal is not free");
  for (const auto& n : g.nodes)
    if (n.mode == mode && (n.pos - q).norm() <= 1e-9) return n.id;
  const int id = g.add_node(q, mode);
  const double reach = spacing * (mode == Mode::Legged ? std::sqrt(2.0) : std::sqrt(3.0)) + 1e-9;
  for (std::size_t j = 0; j + 1 < g.size(); ++j) {
    const auto& n = g.nodes[j];
    if (n.mode == mode && (n.pos - q).norm() <= reach && ctx.edge_ok(q, n.pos, mode))
      g.add_edge(id, n.id, mode, cost);
  }
  return id;
}

}  // namespace detail

/// Build the requested discretization around start and goal and search it.
inline Route plan_route(const Environment& env, const Vec3& start, const Vec3& goal, const CostModel& cost,
                        const PlannerOptions& opt, const RouteOptions& ro) {
  Route r;
  if (ro.method == "uniform") {
    r.graph = discretize_uniform(env, ro.spacing, cost, opt);
    const detail::BuildContext ctx(env, opt);
    r.start = detail::attach_terminal(r.graph, ctx, start, ro.spacing, cost);
    r.goal = detail::attach_terminal(r.graph, ctx, goal, ro.spacing, cost);
  } else if (ro.method == "mmprm") {
    const std::array<Vec3, 2> terminals{start, goal};
    r.graph = discretize_mmprm(env, ro.samples, ro.radius, ro.seed, cost, opt, terminals);
    r.start = 0;
    r.goal = 1;
  } else {
    throw ConfigError("unknown discretization '" + ro.method + "'");
  }
  if (ro.legged_only) r.graph = r.graph.filtered([](const Edge& e) { return e.mode == Mode::Legged; });
  if (ro.search == "astar")
    r.result = astar(r.graph, r.start, r.goal, cost);
  else if (ro.search == "dijkstra")
    r.result = dijkstra(r.graph, r.start, r.goal);
  else
    throw ConfigError("unknown search '" + ro.search + "'");
  return r;
}

inline nlohmann::json to_json(const RouteOptions& o) {
  return {{"method", o.method},   {"search", o.search}, {"spacing", o.spacing},         {"samples", o.samples},
          {"radius", o.radius},   {"seed", o.seed},     {"legged_only", o.legged_only}};
}

inline RouteOptions route_options_from_json(const nlohmann::json& j, RouteOptions o = {}) {
  try {
    o.method = j.value("method", o.method);
    o.search = j.value("search", o.search);
    o.spacing = j.value("spacing", o.spacing);
    o.samples = j.value("samples", o.samples);
    o.radius = j.value("radius", o.radius);
    o.seed = j.value("seed", o.seed);
    o.legged_only = j.value("legged_only", o.legged_only);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("route options: ") + e.what());
  }
  return o;
}

// ---- structured-text formats ------------------------------------------------------

inline nlohmann::json to_json(const CostModel& c) {
  return {{"c_leg", c.c_leg}, {"c_air", c.c_air}, {"p_leg", c.p_leg}, {"p_air", c.p_air},
          {"E_trans", c.E_trans}, {"v_leg", c.v_leg}, {"v_air", c.v_air}};
}

inline CostModel cost_from_json(const nlohmann::json& j, CostModel c = {}) {
  c.c_leg = j.value("c_leg", c.c_leg);
  c.c_air = j.value("c_air", c.c_air);
  c.p_leg = j.value("p_leg", c.p_leg);
  c.p_air = j.value("p_air", c.p_air);
  c.E_trans = j.value("E_trans", c.E_trans);
  c.v_leg = j.value("v_leg", c.v_leg);
  c.v_air = j.value("v_air", c.v_air);
  c.validate();
  return c;
}

inline nlohmann::json to_json(const PlannerOptions& o) {
  return {{"stand_height", o.stand_height}, {"z_tol", o.z_tol},
          {"clearance", o.clearance},       {"collision_step", o.collision_step},
          {"max_step_height", o.max_step_height}, {"k_neighbors", o.k_neighbors},
          {"rho_leg", o.rho_leg},           {"transition_rise", o.transition_rise}};
}

inline PlannerOptions planner_options_from_json(const nlohmann::json& j, PlannerOptions o = {}) {
  o.stand_height = j.value("stand_height", o.stand_height);
  o.z_tol = j.value("z_tol", o.z_tol);
  o.clearance = j.value("clearance", o.clearance);
  o.collision_step = j.value("collision_step", o.collision_step);
  o.max_step_height = j.value("max_step_height", o.max_step_height);
  o.k_neighbors = j.value("k_neighbors", o.k_neighbors);
  o.rho_leg = j.value("rho_leg", o.rho_leg);
  o.transition_rise = j.value("transition_rise", o.transition_rise);
  return o;
}

inline nlohmann::json to_json(const ModalGraph& g) {
  nlohmann::json nodes = nlohmann::json::array(), edges = nlohmann::json::array();
  for (const auto& n : g.nodes) nodes.push_back({{"id", n.id}, {"pos", vec_to_json(n.pos)}, {"mode", mode_name(n.mode)}});
  for (const auto& e : g.edges)
    edges.push_back({{"a", e.a}, {"b", e.b}, {"mode", mode_name(e.mode)}, {"length", e.length}, {"cost", e.cost}});
  return {{"metadata", g.metadata}, {"nodes", nodes}, {"edges", edges}};
}

inline ModalGraph graph_from_json(const nlohmann::json& j) {
  ModalGraph g;
  try {
    g.metadata = j.value("metadata", nlohmann::json::object());
    for (const auto& n : j.at("nodes")) {
      const int id = g.add_node(vec_from_json(n.at("pos")), mode_from_name(n.at("mode")));
      if (id != n.at("id").get<int>()) throw ConfigError("graph file: node ids must be 0..n-1 in order");
    }
    for (const auto& e : j.at("edges")) {
      Edge ed{e.at("a"), e.at("b"), mode_from_name(e.at("mode")), e.at("length"), e.at("cost")};
      if (ed.a < 0 || ed.b < 0 || static_cast<std::size_t>(ed.a) >= g.size() || static_cast<std::size_t>(ed.b) >= g.size())
        throw ConfigError("graph file: edge endpoint does not exist");
      g.add_raw_edge(ed);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("graph file: ") + e.what());
  }
  return g;
}

inline nlohmann::json to_json(const Plan& p) {
  nlohmann::json wps = nlohmann::json::array(), edges = nlohmann::json::array();
  for (std::size_t i = 0; i < p.nodes.size(); ++i)
    wps.push_back({{"id", p.nodes[i]}, {"pos", vec_to_json(p.positions[i])}, {"mode", mode_name(p.modes[i])}});
  for (std::size_t e = 0; e < p.edge_costs.size(); ++e)
    edges.push_back({{"mode", mode_name(p.edge_modes[e])}, {"cost", p.edge_costs[e]}, {"length", p.edge_lengths[e]}});
  return {{"status", "ok"}, {"waypoints", wps}, {"edges", edges}, {"transitions", p.transitions},
          {"total_cost", p.total_cost}};
}

inline Plan plan_from_json(const nlohmann::json& j) {
  try {
    if (j.value("status", std::string("ok")) != "ok") throw ConfigError("plan file holds no path");
    Plan p;
    for (const auto& w : j.at("waypoints")) {
      p.nodes.push_back(w.at("id"));
      p.positions.push_back(vec_from_json(w.at("pos")));
      p.modes.push_back(mode_from_name(w.at("mode")));
    }
    for (const auto& e : j.at("edges")) {
      p.edge_modes.push_back(mode_from_name(e.at("mode")));
      p.edge_costs.push_back(e.at("cost"));
      p.edge_lengths.push_back(e.value("length", 0.0));
    }
    p.transitions = j.at("transitions").get<std::vector<std::size_t>>();
    p.total_cost = j.at("total_cost");
    if (!p.consistent()) throw ConfigError("plan file is inconsistent");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("plan file: ") + e.what());
  }
}

}  // namespace mmloco
