#pragma once

// Independent reference computations for tests. None of these call into the
// softmin DP or the solvers; they enumerate, integrate or search directly.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "tapeq/network.hpp"

namespace tapeq::oracle {

struct Walk {
  std::vector<int> edges;
  double length = 0.0;
};

/// Every walk origin -> dest with 1..hops edges (plus the empty walk when
/// origin == dest).
inline std::vector<Walk> enumerate_walks(const LevelGraph& g, const std::vector<double>& w, int origin, int dest,
                                         int hops) {
  std::vector<Walk> out;
  Walk cur;
  std::function<void(int)> dfs = [&](int v) {
    if (v == dest) out.push_back(cur);
    if (static_cast<int>(cur.edges.size()) == hops) return;
    for (int e = 0; e < static_cast<int>(g.edges.size()); ++e) {
      if (g.edges[e].tail != v) continue;
      cur.edges.push_back(e);
      cur.length += w[e];
      dfs(g.edges[e].head);
      cur.length -= w[e];
      cur.edges.pop_back();
    }
  };
  dfs(origin);
  return out;
}

/// -gamma ln sum exp(-len / gamma), computed in long double without the DP.
inline double enumerated_softmin(const std::vector<Walk>& walks, double gamma) {
  long double lo = std::numeric_limits<long double>::infinity();
  for (const auto& p : walks) lo = std::min<long double>(lo, p.length);
  long double s = 0.0L;
  for (const auto& p : walks) s += std::exp(-(static_cast<long double>(p.length) - lo) / gamma);
  return static_cast<double>(lo - gamma * std::log(s));
}

/// Gibbs edge flows of one OD by explicit enumeration.
inline std::vector<double> enumerated_flows(const std::vector<Walk>& walks, std::size_t num_edges, double gamma,
                                            double demand) {
  long double lo = std::numeric_limits<long double>::infinity();
  for (const auto& p : walks) lo = std::min<long double>(lo, p.length);
  std::vector<long double> weight(walks.size());
  long double z = 0.0L;
  for (std::size_t i = 0; i < walks.size(); ++i) z += weight[i] = std::exp(-(walks[i].length - lo) / gamma);
  std::vector<long double> f(num_edges, 0.0L);
  for (std::size_t i = 0; i < walks.size(); ++i)
    for (int e : walks[i].edges) f[e] += demand * weight[i] / z;
  return {f.begin(), f.end()};
}

/// Central differences of a scalar function of a vector.
inline Eigen::VectorXd central_differences(const std::function<double(const Eigen::VectorXd&)>& fn,
                                           const Eigen::VectorXd& x, double step) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd a = x, b = x;
    a[i] += step;
    b[i] -= step;
    g[i] = (fn(a) - fn(b)) / (2.0 * step);
  }
  return g;
}

/// Composite Simpson rule on [a, b] with n (even) panels, after the change
/// of variable z = a + (b - a) u^4 that smooths power-law kinks at a.
inline double simpson(const std::function<double(double)>& fn, double a, double b, int n = 2000) {
  if (n % 2) ++n;
  auto g = [&](double u) { return fn(a + (b - a) * u * u * u * u) * 4.0 * (b - a) * u * u * u; };
  const double h = 1.0 / n;
  double s = g(0.0) + g(1.0);
  for (int i = 1; i < n; ++i) s += g(i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

/// Golden-section minimisation of a unimodal function on [a, b].
inline double golden_min(const std::function<double(double)>& fn, double a, double b, double tol = 1e-12) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = fn(c), fd = fn(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = fn(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = fn(d);
    }
  }
  return 0.5 * (a + b);
}

/// Random single-level graph: a guaranteed path 0 -> 1 -> ... -> n-1 plus
/// random extra edges, all BPR. ODs start at vertex 0 or 1.
inline LevelGraph random_level(std::mt19937_64& rng, int n, int max_edges, int num_ods) {
  std::uniform_int_distribution<int> vert(0, n - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  LevelGraph g;
  g.num_vertices = n;
  auto add = [&](int a, int b) {
    Edge e;
    e.tail = a;
    e.head = b;
    e.cost = EdgeCostModel::bpr(0.5 + unit(rng), 1.0 + unit(rng), 0.15 + unit(rng), 0.25 + 0.75 * unit(rng));
    g.edges.push_back(e);
  };
  for (int v = 0; v + 1 < n; ++v) add(v, v + 1);
  while (static_cast<int>(g.edges.size()) < max_edges) {
    const int a = vert(rng), b = vert(rng);
    if (a != b) add(a, b);
  }
  for (int w = 0; w < num_ods; ++w) {
    OdPair od;
    od.origin = w % 2;
    od.dest = n - 1 - (w / 2) % 2;
    if (od.dest <= od.origin) od.dest = n - 1;
    od.demand = 0.5 + unit(rng);
    g.ods.push_back(od);
  }
  return g;
}

/// Random network with one or two levels, and times a little above free
/// flow. The second level replaces the first two level-1 edges by nested
/// references.
struct RandomCase {
  Network net;
  TimeVector t;
};

inline RandomCase random_network(std::mt19937_64& rng, int levels, double gamma) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> nv(3, 8);
  std::vector<LevelGraph> gs;
  const int n = nv(rng);
  gs.push_back(random_level(rng, n, std::min(14, n + 4), 1 + static_cast<int>(u(rng) * 3)));
  gs[0].gamma = gamma;
  if (levels == 2) {
    const int n2 = nv(rng);
    auto top = random_level(rng, n2, std::min(14, n2 + 3), 2);
    for (auto& od : top.ods) od.demand = 0.0;
    top.gamma = gamma;
    for (int i = 0; i < 2; ++i) {
      gs[0].edges[i].nested = true;
      gs[0].edges[i].od_ref = i;
    }
    gs.push_back(top);
  }
  Network net(std::move(gs));
  TimeVector t = net.free_flow_times();
  for (Eigen::Index i = 0; i < t.size(); ++i) t[i] += u(rng);
  return {std::move(net), std::move(t)};
}

/// sigma(f) written out for BPR edges; SD edges give t_free f below
/// capacity and +inf above.
inline double edge_integral(const EdgeCostModel& c, double f) {
  if (c.kind == CostKind::sd) return f <= c.capacity ? c.t_free * f : std::numeric_limits<double>::infinity();
  const double p = c.bpr_power;
  return c.t_free * (f + c.bpr_gain * c.capacity * std::pow(f / c.capacity, p + 1.0) / (p + 1.0));
}

/// Explicit path sets of a tiny network: level -> OD -> walks.
using PathSets = std::vector<std::vector<std::vector<Walk>>>;

inline PathSets enumerate_paths(const Network& net) {
  PathSets ps(net.num_levels());
  for (int k = 0; k < net.num_levels(); ++k) {
    const auto& g = net.level(k);
    const std::vector<double> zero(g.edges.size(), 0.0);
    for (const auto& od : g.ods) ps[k].push_back(enumerate_walks(g, zero, od.origin, od.dest, g.hop_bound()));
  }
  return ps;
}

/// Primal objective of the nested model restricted to levels >= k, given
/// the level-k OD demands and path shares of every level:
///   sum_k [ sum_{plain e} sigma(f_e) + gamma_k sum_w sum_p x_p ln(x_p / d_w) ].
/// Nested edge flows of level k become the OD demands of level k + 1.
inline double primal_from_level(const Network& net, const PathSets& ps, int k, const std::vector<double>& demand,
                                const std::vector<std::vector<std::vector<double>>>& shares,
                                std::vector<std::vector<double>>* flows_out = nullptr) {
  const auto& g = net.level(k);
  std::vector<double> f(g.edges.size(), 0.0);
  double ent = 0.0;
  for (std::size_t w = 0; w < ps[k].size(); ++w) {
    for (std::size_t p = 0; p < ps[k][w].size(); ++p) {
      const double x = shares[k][w][p] * demand[w];
      for (int e : ps[k][w][p].edges) f[e] += x;
      if (shares[k][w][p] > 0.0) ent += demand[w] * shares[k][w][p] * std::log(shares[k][w][p]);
    }
  }
  double value = g.gamma * ent;
  std::vector<double> upper;
  if (k + 1 < net.num_levels()) upper.assign(net.level(k + 1).ods.size(), 0.0);
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    if (g.edges[e].nested) upper[g.edges[e].od_ref] += f[e];
    else value += edge_integral(g.edges[e].cost, f[e]);
  }
  if (flows_out) (*flows_out)[k] = f;
  if (k + 1 < net.num_levels()) value += primal_from_level(net, ps, k + 1, upper, shares, flows_out);
  return value;
}

/// Brute-force minimum of the primal objective over explicit path shares:
/// nested pairwise transfers between the paths of one OD, each a golden
/// section search, cycled until no transfer improves. Level k + 1 is fully
/// re-optimised for every level-k trial point, which keeps each search
/// convex. Returns the minimum; `shares` holds the minimiser.
inline double brute_force_primal(const Network& net, const PathSets& ps,
                                 std::vector<std::vector<std::vector<double>>>& shares, int k,
                                 const std::vector<double>& demand) {
  auto value = [&]() {
    // Level k trial: optimise the levels above for the induced demands.
    if (k + 1 < net.num_levels()) {
      std::vector<std::vector<double>> fl(net.num_levels());
      primal_from_level(net, ps, k, demand, shares, &fl);
      std::vector<double> upper(net.level(k + 1).ods.size(), 0.0);
      const auto& g = net.level(k);
      for (std::size_t e = 0; e < g.edges.size(); ++e)
        if (g.edges[e].nested) upper[g.edges[e].od_ref] += fl[k][e];
      brute_force_primal(net, ps, shares, k + 1, upper);
    }
    return primal_from_level(net, ps, k, demand, shares);
  };
  double best = value();
  for (int sweep = 0; sweep < 200; ++sweep) {
    const double before = best;
    for (std::size_t w = 0; w < ps[k].size(); ++w) {
      auto& s = shares[k][w];
      for (std::size_t p = 0; p < s.size(); ++p) {
        for (std::size_t q = p + 1; q < s.size(); ++q) {
          const double sp = s[p], sq = s[q];
          auto at = [&](double delta) {
            s[p] = sp - delta;
            s[q] = sq + delta;
            return value();
          };
          const double delta = golden_min(at, -sq, sp, 1e-13);
          const double v = at(delta);
          if (v <= best) {
            best = v;
          } else {
            s[p] = sp;
            s[q] = sq;
            value();
          }
        }
      }
    }
    if (before - best <= 1e-15 * (1.0 + std::abs(best))) break;
  }
  return best;
}

/// Uniform starting shares for brute_force_primal.
inline std::vector<std::vector<std::vector<double>>> uniform_shares(const PathSets& ps) {
  std::vector<std::vector<std::vector<double>>> s(ps.size());
  for (std::size_t k = 0; k < ps.size(); ++k)
    for (const auto& paths : ps[k]) s[k].emplace_back(paths.size(), 1.0 / static_cast<double>(paths.size()));
  return s;
}

}  // namespace tapeq::oracle
