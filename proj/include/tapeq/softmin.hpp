#pragma once

#include <span>
#include <vector>

#include "tapeq/network.hpp"

namespace tapeq {

enum class Execution { serial, parallel };

/// Edge weights of one level: plain edges take their time from t, nested
/// edges take the travel value of the OD pair they reference one level up.
std::vector<double> level_weights(const Network& net, const TimeVector& t, int level,
                                  std::span<const double> upper_od_values);

/// u_v = -gamma * ln sum over walks o -> v of at most `hops` edges of
/// exp(-length / gamma). The empty walk gives u_o <= 0. Unreachable
/// vertices get +inf.
std::vector<double> softmin_potentials(const LevelGraph& g, std::span<const double> weights, int origin,
                                       double gamma, int hops);

struct LevelFlows {
  double value = 0.0;               // sum_w demand_w * od_values[w]
  std::vector<double> od_values;    // soft-min (or hard, gamma = 0) travel value per OD
  std::vector<double> edge_flows;   // per edge of the level, plain and nested
};

/// Gibbs (logit) loading of one level. Flows are the exact gradient of
/// `value` with respect to the edge weights, obtained with one reverse
/// sweep per origin. Throws DomainError naming an OD that has no walk of
/// at most `hops` edges.
LevelFlows softmin_flows(const LevelGraph& g, std::span<const double> weights, std::span<const double> demands,
                         double gamma, int hops, Execution exec = Execution::parallel);

/// Single-source shortest walks (Dijkstra for nonnegative weights, a
/// hop-layered Bellman-Ford otherwise). Ties go to the smallest edge index.
class ShortestPaths {
 public:
  ShortestPaths(const LevelGraph& g, std::span<const double> weights, int origin);

  const std::vector<double>& distances() const { return dist_; }
  double distance(int v) const { return dist_.at(v); }
  /// Last edge on the chosen walk to v, -1 for the origin or unreachable.
  int predecessor(int v) const;
  /// Edge indices of the chosen walk origin -> v.
  std::vector<int> path(int v) const;
  bool used_dijkstra() const { return layered_pred_.empty(); }

 private:
  const LevelGraph* graph_;
  int origin_;
  std::vector<double> dist_;
  std::vector<int> pred_;                       // Dijkstra
  std::vector<std::vector<int>> layered_pred_;  // Bellman-Ford, per hop
  std::vector<int> best_hops_;
};

ShortestPaths hard_shortest(const LevelGraph& g, std::span<const double> weights, int origin);

/// Loads every OD demand on its tie-broken shortest walk.
LevelFlows all_or_nothing(const LevelGraph& g, std::span<const double> weights, std::span<const double> demands,
                          Execution exec = Execution::parallel);

/// Full multilevel evaluation at times t.
struct NetworkEvaluation {
  double value = 0.0;  // S(t) = sum_w d_w * softmin_w(t) on level 1; equals -gamma psi(t / gamma)
  std::vector<std::vector<double>> od_values;
  FlowState flows;     // filled when requested
  Vector plain_flows;  // gradient of value w.r.t. t
};

struct EvaluationOptions {
  bool with_flows = true;
  Execution exec = Execution::parallel;
};

NetworkEvaluation evaluate_network(const Network& net, const TimeVector& t, EvaluationOptions opts = {});

/// Weights of the nested edges of level k-1 (0-based k >= 1): the travel
/// values of the referenced level-k OD pairs, with all levels above k
/// folded in. Returns one entry per edge of level k-1 (plain edges get t).
std::vector<double> nested_softmin(const Network& net, const TimeVector& t, int level);

/// Upper bound on the gradient Lipschitz constant of S in the 2-norm:
/// (1 / min gamma) * sum_w d_w * l_w^2 with l_w the most edges (all
/// levels) a walk of that OD can use.
double softmin_lipschitz_bound(const Network& net);

namespace reference {
/// Plain serial loop over origins, accumulating straight into the output.
/// Kept as the reference the parallel driver is tested against.
LevelFlows softmin_flows_serial(const LevelGraph& g, std::span<const double> weights,
                                std::span<const double> demands, double gamma, int hops);
}  // namespace reference

}  // namespace tapeq
