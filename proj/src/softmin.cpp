#include "tapeq/softmin.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <queue>
#include <string>

#include <fmt/format.h>

#include "softmin_sweep.hpp"

namespace tapeq {

namespace detail {

Incidence::Incidence(const LevelGraph& g) {
  const int n = g.num_vertices;
  const int m = static_cast<int>(g.edges.size());
  in_offsets.assign(n + 1, 0);
  out_offsets.assign(n + 1, 0);
  for (const auto& e : g.edges) {
    ++in_offsets[e.head + 1];
    ++out_offsets[e.tail + 1];
  }
  for (int v = 0; v < n; ++v) {
    in_offsets[v + 1] += in_offsets[v];
    out_offsets[v + 1] += out_offsets[v];
  }
  in_edges.resize(m);
  out_edges.resize(m);
  auto in_fill = in_offsets;
  auto out_fill = out_offsets;
  for (int i = 0; i < m; ++i) {
    in_edges[in_fill[g.edges[i].head]++] = i;
    out_edges[out_fill[g.edges[i].tail]++] = i;
  }
}

OriginGroups::OriginGroups(const LevelGraph& g) {
  std::map<int, std::vector<int>> by_origin;
  for (int w = 0; w < static_cast<int>(g.ods.size()); ++w) by_origin[g.ods[w].origin].push_back(w);
  for (auto& [o, ods] : by_origin) groups.push_back({o, std::move(ods)});
}

void OriginSweep::forward(const LevelGraph& g, const Incidence& inc, std::span<const double> weights, int origin,
                          double gamma, int hops) {
  n_ = g.num_vertices;
  hops_ = hops;
  gamma_ = gamma;
  const double inv_gamma = 1.0 / gamma;
  ell_.assign(static_cast<std::size_t>(hops + 1) * n_, kNegInf);
  ell(0, origin) = 0.0;
  for (int h = 1; h <= hops; ++h) {
    for (int v = 0; v < n_; ++v) {
      double shift = v == origin ? 0.0 : kNegInf;
      for (int k = inc.in_offsets[v]; k < inc.in_offsets[v + 1]; ++k) {
        const int e = inc.in_edges[k];
        shift = std::max(shift, ell(h - 1, g.edges[e].tail) - weights[e] * inv_gamma);
      }
      if (shift == kNegInf) continue;
      long double sum = v == origin ? std::exp(-shift) : 0.0;
      for (int k = inc.in_offsets[v]; k < inc.in_offsets[v + 1]; ++k) {
        const int e = inc.in_edges[k];
        sum += std::exp(ell(h - 1, g.edges[e].tail) - weights[e] * inv_gamma - shift);
      }
      ell(h, v) = shift + static_cast<double>(std::log(sum));
    }
  }
}

void OriginSweep::backward(const LevelGraph& g, const Incidence& inc, std::span<const double> weights,
                           std::span<const double> seeds, std::span<double> flows) {
  const double inv_gamma = 1.0 / gamma_;
  const int m = static_cast<int>(g.edges.size());
  lam_.assign(n_, kNegInf);
  for (int v = 0; v < n_; ++v) {
    if (seeds[v] > 0.0) lam_[v] = std::log(seeds[v]) - log_partition(v);
  }
  lam_next_.assign(n_, kNegInf);
  for (int h = hops_; h >= 1; --h) {
    for (int e = 0; e < m; ++e) {
      const auto& edge = g.edges[e];
      const double a = lam_[edge.head];
      const double b = ell(h - 1, edge.tail);
      if (a == kNegInf || b == kNegInf) continue;
      flows[e] += std::exp(a + b - weights[e] * inv_gamma);
    }
    if (h == 1) break;
    for (int u = 0; u < n_; ++u) {
      double shift = kNegInf;
      for (int k = inc.out_offsets[u]; k < inc.out_offsets[u + 1]; ++k) {
        const int e = inc.out_edges[k];
        shift = std::max(shift, lam_[g.edges[e].head] - weights[e] * inv_gamma);
      }
      if (shift == kNegInf) {
        lam_next_[u] = kNegInf;
        continue;
      }
      long double sum = 0.0;
      for (int k = inc.out_offsets[u]; k < inc.out_offsets[u + 1]; ++k) {
        const int e = inc.out_edges[k];
        sum += std::exp(lam_[g.edges[e].head] - weights[e] * inv_gamma - shift);
      }
      lam_next_[u] = shift + static_cast<double>(std::log(sum));
    }
    std::swap(lam_, lam_next_);
  }
}

std::string unreachable_message(const LevelGraph& g, int w, int hops) {
  const auto& od = g.ods[w];
  return fmt::format("OD {} ({}->{}) has no walk of at most {} edges", w, od.origin, od.dest, hops);
}

void check_inputs(const LevelGraph& g, std::span<const double> weights, std::span<const double> demands) {
  if (weights.size() != g.edges.size()) throw DomainError("weight vector does not match the edge count");
  if (demands.size() != g.ods.size()) throw DomainError("demand vector does not match the OD count");
  for (double w : weights)
    if (!std::isfinite(w)) throw DomainError("edge weights must be finite");
}

// Two-phase evaluator of one level: forward sweeps give the OD values (needed
// to weight nested edges one level down), the reverse sweeps load demands.
class LevelKernel {
 public:
  LevelKernel(const LevelGraph& g, std::vector<double> weights, double gamma, int hops, Execution exec)
      : g_(g), weights_(std::move(weights)), gamma_(gamma), hops_(hops), exec_(exec), inc_(g), groups_(g) {
    for (double w : weights_)
      if (!std::isfinite(w)) throw DomainError("edge weights must be finite");
    if (hops_ < 1) throw DomainError("hop bound must be at least 1");
    od_values_.assign(g.ods.size(), 0.0);
    const int ng = static_cast<int>(groups_.groups.size());
    if (gamma_ > 0.0) {
      sweeps_.resize(ng);
    } else {
      paths_.resize(ng);
    }
    std::vector<std::string> errors(ng);
#pragma omp parallel for schedule(dynamic) if (exec_ == Execution::parallel)
    for (int gi = 0; gi < ng; ++gi) {
      const auto& grp = groups_.groups[gi];
      if (gamma_ > 0.0) {
        sweeps_[gi].forward(g_, inc_, weights_, grp.origin, gamma_, hops_);
        for (int w : grp.ods) {
          const double lz = sweeps_[gi].log_partition(g_.ods[w].dest);
          if (lz == detail::kNegInf) errors[gi] = unreachable_message(g_, w, hops_);
          od_values_[w] = -gamma_ * lz;
        }
      } else {
        paths_[gi].emplace(g_, weights_, grp.origin);
        for (int w : grp.ods) {
          const double d = paths_[gi]->distance(g_.ods[w].dest);
          if (!std::isfinite(d)) errors[gi] = unreachable_message(g_, w, g_.num_vertices - 1);
          od_values_[w] = d;
        }
      }
    }
    for (const auto& e : errors)
      if (!e.empty()) throw DomainError(e);
  }

  const std::vector<double>& od_values() const { return od_values_; }

  LevelFlows load(std::span<const double> demands) {
    if (demands.size() != g_.ods.size()) throw DomainError("demand vector does not match the OD count");
    const int ng = static_cast<int>(groups_.groups.size());
    const std::size_t m = g_.edges.size();
    std::vector<std::vector<double>> buffers(ng, std::vector<double>(m, 0.0));
    std::vector<double> values(ng, 0.0);
#pragma omp parallel for schedule(dynamic) if (exec_ == Execution::parallel)
    for (int gi = 0; gi < ng; ++gi) {
      const auto& grp = groups_.groups[gi];
      double value = 0.0;
      for (int w : grp.ods) value += demands[w] * od_values_[w];
      values[gi] = value;
      if (gamma_ > 0.0) {
        std::vector<double> seeds(g_.num_vertices, 0.0);
        for (int w : grp.ods) seeds[g_.ods[w].dest] += demands[w];
        sweeps_[gi].backward(g_, inc_, weights_, seeds, buffers[gi]);
      } else {
        for (int w : grp.ods) {
          if (demands[w] == 0.0) continue;
          for (int e : paths_[gi]->path(g_.ods[w].dest)) buffers[gi][e] += demands[w];
        }
      }
    }
    // Fixed-order reduction keeps the result independent of the thread count.
    LevelFlows out;
    out.od_values = od_values_;
    out.edge_flows.assign(m, 0.0);
    for (int gi = 0; gi < ng; ++gi) {
      out.value += values[gi];
      for (std::size_t e = 0; e < m; ++e) out.edge_flows[e] += buffers[gi][e];
    }
    return out;
  }

 private:
  const LevelGraph& g_;
  std::vector<double> weights_;
  double gamma_;
  int hops_;
  Execution exec_;
  Incidence inc_;
  OriginGroups groups_;
  std::vector<double> od_values_;
  std::vector<OriginSweep> sweeps_;
  std::vector<std::optional<ShortestPaths>> paths_;
};

}  // namespace detail

using detail::kNegInf;

std::vector<double> level_weights(const Network& net, const TimeVector& t, int level,
                                  std::span<const double> upper_od_values) {
  const auto& g = net.level(level);
  std::vector<double> w(g.edges.size());
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    const auto& e = g.edges[i];
    w[i] = e.nested ? upper_od_values[e.od_ref] : t[e.time_index];
  }
  return w;
}

std::vector<double> softmin_potentials(const LevelGraph& g, std::span<const double> weights, int origin,
                                       double gamma, int hops) {
  if (!(gamma > 0.0)) throw DomainError("softmin_potentials needs gamma > 0");
  if (hops < 1) throw DomainError("hop bound must be at least 1");
  if (weights.size() != g.edges.size()) throw DomainError("weight vector does not match the edge count");
  detail::Incidence inc(g);
  detail::OriginSweep sweep;
  sweep.forward(g, inc, weights, origin, gamma, hops);
  std::vector<double> u(g.num_vertices);
  for (int v = 0; v < g.num_vertices; ++v) {
    const double lz = sweep.log_partition(v);
    u[v] = lz == kNegInf ? std::numeric_limits<double>::infinity() : -gamma * lz;
  }
  return u;
}

LevelFlows softmin_flows(const LevelGraph& g, std::span<const double> weights, std::span<const double> demands,
                         double gamma, int hops, Execution exec) {
  if (!(gamma > 0.0)) throw DomainError("softmin_flows needs gamma > 0");
  detail::check_inputs(g, weights, demands);
  detail::LevelKernel kernel(g, {weights.begin(), weights.end()}, gamma, hops, exec);
  return kernel.load(demands);
}

LevelFlows all_or_nothing(const LevelGraph& g, std::span<const double> weights, std::span<const double> demands,
                          Execution exec) {
  detail::check_inputs(g, weights, demands);
  detail::LevelKernel kernel(g, {weights.begin(), weights.end()}, 0.0, std::max(1, g.num_vertices - 1), exec);
  return kernel.load(demands);
}

// ---------------------------------------------------------------------------

ShortestPaths::ShortestPaths(const LevelGraph& g, std::span<const double> weights, int origin)
    : graph_(&g), origin_(origin) {
  const int n = g.num_vertices;
  const int m = static_cast<int>(g.edges.size());
  if (weights.size() != g.edges.size()) throw DomainError("weight vector does not match the edge count");
  constexpr double inf = std::numeric_limits<double>::infinity();
  dist_.assign(n, inf);
  dist_[origin] = 0.0;
  const bool nonnegative = std::all_of(weights.begin(), weights.end(), [](double w) { return w >= 0.0; });

  if (nonnegative) {
    detail::Incidence inc(g);
    std::vector<int> rank(n, -1);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    heap.push({0.0, origin});
    int settled = 0;
    while (!heap.empty()) {
      const auto [d, u] = heap.top();
      heap.pop();
      if (rank[u] >= 0 || d > dist_[u]) continue;
      rank[u] = settled++;
      for (int k = inc.out_offsets[u]; k < inc.out_offsets[u + 1]; ++k) {
        const int e = inc.out_edges[k];
        const int v = g.edges[e].head;
        const double cand = d + weights[e];
        if (cand < dist_[v]) {
          dist_[v] = cand;
          heap.push({cand, v});
        }
      }
    }
    // Among tight edges whose tail settled earlier, the smallest index wins.
    pred_.assign(n, -1);
    for (int e = 0; e < m; ++e) {
      const auto& edge = g.edges[e];
      const int a = edge.tail, v = edge.head;
      if (v == origin || rank[a] < 0 || rank[a] >= rank[v]) continue;
      const double slack = 1e-12 * std::max(1.0, std::abs(dist_[v]));
      if (pred_[v] < 0 && dist_[a] + weights[e] <= dist_[v] + slack) pred_[v] = e;
    }
    return;
  }

  // Hop-layered Bellman-Ford: shortest walks of at most n - 1 edges.
  const int hops = std::max(1, n - 1);
  layered_pred_.assign(hops + 1, std::vector<int>(n, -1));
  std::vector<double> prev = dist_;
  for (int h = 1; h <= hops; ++h) {
    std::vector<double> cur = prev;
    for (int e = 0; e < m; ++e) {
      const auto& edge = g.edges[e];
      if (!std::isfinite(prev[edge.tail])) continue;
      const double cand = prev[edge.tail] + weights[e];
      if (cand < cur[edge.head]) {
        cur[edge.head] = cand;
        layered_pred_[h][edge.head] = e;
      }
    }
    prev = std::move(cur);
  }
  dist_ = prev;
  best_hops_.assign(n, hops);
}

int ShortestPaths::predecessor(int v) const {
  if (used_dijkstra()) return pred_.at(v);
  const auto p = path(v);
  return p.empty() ? -1 : p.back();
}

std::vector<int> ShortestPaths::path(int v) const {
  std::vector<int> edges;
  if (!std::isfinite(dist_.at(v))) return edges;
  const auto& g = *graph_;
  if (used_dijkstra()) {
    for (int cur = v, guard = 0; cur != origin_ && guard <= g.num_vertices; ++guard) {
      const int e = pred_[cur];
      if (e < 0) break;
      edges.push_back(e);
      cur = g.edges[e].tail;
    }
  } else {
    int cur = v;
    for (int h = best_hops_[v]; h >= 1; --h) {
      const int e = layered_pred_[h][cur];
      if (e < 0) continue;
      edges.push_back(e);
      cur = g.edges[e].tail;
    }
  }
  std::reverse(edges.begin(), edges.end());
  return edges;
}

ShortestPaths hard_shortest(const LevelGraph& g, std::span<const double> weights, int origin) {
  return ShortestPaths(g, weights, origin);
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::vector<double>> upper_od_values(const Network& net, const TimeVector& t, int down_to,
                                                 Execution exec,
                                                 std::vector<std::optional<detail::LevelKernel>>* kernels) {
  const int m = net.num_levels();
  std::vector<std::vector<double>> values(m);
  for (int k = m - 1; k >= down_to; --k) {
    const auto& g = net.level(k);
    auto w = level_weights(net, t, k, k + 1 < m ? std::span<const double>(values[k + 1]) : std::span<const double>{});
    detail::LevelKernel kernel(g, std::move(w), g.gamma, g.hop_bound(), exec);
    values[k] = kernel.od_values();
    if (kernels) (*kernels)[k].emplace(std::move(kernel));
  }
  return values;
}

}  // namespace

NetworkEvaluation evaluate_network(const Network& net, const TimeVector& t, EvaluationOptions opts) {
  if (t.size() != net.num_times()) throw DomainError("time vector does not match the network");
  const int m = net.num_levels();
  std::vector<std::optional<detail::LevelKernel>> kernels(m);
  NetworkEvaluation out;
  out.od_values = upper_od_values(net, t, 0, opts.exec, &kernels);

  std::vector<double> demands;
  for (const auto& od : net.level(0).ods) demands.push_back(od.demand);
  if (!opts.with_flows) {
    for (std::size_t w = 0; w < demands.size(); ++w) out.value += demands[w] * out.od_values[0][w];
    return out;
  }

  out.flows.edge_flows.resize(m);
  for (int k = 0; k < m; ++k) {
    auto loaded = kernels[k]->load(demands);
    if (k == 0) out.value = loaded.value;
    out.flows.edge_flows[k] = std::move(loaded.edge_flows);
    if (k + 1 < m) {
      demands.assign(net.level(k + 1).ods.size(), 0.0);
      const auto& g = net.level(k);
      for (std::size_t i = 0; i < g.edges.size(); ++i)
        if (g.edges[i].nested) demands[g.edges[i].od_ref] += out.flows.edge_flows[k][i];
    }
  }
  out.plain_flows = out.flows.plain(net);
  return out;
}

std::vector<double> nested_softmin(const Network& net, const TimeVector& t, int level) {
  if (level < 1 || level >= net.num_levels()) throw DomainError("nested_softmin: level has no lower level");
  const auto values = upper_od_values(net, t, level, Execution::parallel, nullptr);
  return level_weights(net, t, level - 1, values[level]);
}

double softmin_lipschitz_bound(const Network& net) {
  const int m = net.num_levels();
  double min_gamma = std::numeric_limits<double>::infinity();
  for (const auto& g : net.levels()) min_gamma = std::min(min_gamma, g.gamma);
  if (!(min_gamma > 0.0)) return std::numeric_limits<double>::infinity();
  std::vector<double> longest(m, 0.0);
  for (int k = m - 1; k >= 0; --k) {
    const auto& g = net.level(k);
    double per_edge = 1.0;
    for (const auto& e : g.edges)
      if (e.nested) per_edge = std::max(per_edge, longest[k + 1]);
    longest[k] = g.hop_bound() * per_edge;
  }
  double sum = 0.0;
  for (const auto& od : net.level(0).ods) sum += od.demand * longest[0] * longest[0];
  return sum / min_gamma;
}

}  // namespace tapeq
