#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tapeq/softmin.hpp"
#include "tapeq/umt.hpp"

namespace tapeq {

/// Dual of the equilibrium problem over edge times t:
///   D(t) = -S(t) + sum_{BPR e} sigma*_e(t_e) + sum_{SD e} cap_e (t_e - t_free_e)
/// with S the level-1 demand-weighted soft-min travel value. The SD terms
/// form the linear composite; the feasible set is t >= t_free, with fixed
/// edges pinned at t_free.
struct DualEvaluation {
  double value = 0.0;       // D(t)
  double softmin = 0.0;     // S(t)
  double smooth = 0.0;      // -S(t) + sum over BPR edges
  Vector grad;              // gradient of the smooth part
  Vector plain_flows;       // gradient of S, TimeVector order
  FlowState flows;          // all levels, plain and nested edges
};

/// Throws DomainError when t leaves the feasible set.
DualEvaluation dual_value_grad(const Network& net, const TimeVector& t, Execution exec = Execution::parallel);

/// Lower and upper bounds of the feasible set.
Vector time_lower(const Network& net);
Vector time_upper(const Network& net);

struct GapBreakdown {
  std::vector<double> per_edge;  // sigma(f) - f t + sigma*(t), TimeVector order
  double edges = 0.0;
  double routing = 0.0;          // path-choice part, 0 for Gibbs flows at t
  double total = 0.0;
};

/// Edge-wise Fenchel gap of (t, f). For flows that are Gibbs-consistent with
/// t the total equals primal plus dual value.
GapBreakdown duality_gap(const Network& net, const TimeVector& t, const Vector& plain_flows);

/// Gap of averaged flows f = sum lambda_k f(t_k) against times t. The
/// routing part is bounded through sum lambda_k (S_k - <f_k, t_k>), which
/// dominates the entropy of the averaged path flows.
GapBreakdown averaged_gap(const Network& net, const TimeVector& t, const Vector& plain_flows, double softmin_at_t,
                          double weighted_entropy);

enum class Model { stochastic, beckmann, stable_dynamics, mixed };
std::string to_string(Model m);
Model parse_model(const std::string& name);

struct SolveOptions {
  double eps = 1e-6;
  double eps_residual = 1e-6;
  int max_iter = 100000;
  std::uint64_t seed = 0;
  /// Sample origins with probability proportional to their demand and run
  /// the mini-batch UMT; only the last-iterate certificate is then used.
  bool sample_origins = false;
  Execution exec = Execution::parallel;
  /// beckmann only: staged mirror descent instead of UMT.
  bool beckmann_mirror_descent = false;
};

struct EquilibriumReport {
  Model model = Model::stochastic;
  double eps = 0.0;
  double eps_residual = 0.0;
  TimeVector t;
  FlowState flows;
  Vector plain_flows;
  std::vector<double> edge_gap;
  double total_gap = 0.0;
  double routing_gap = 0.0;
  double dual_value = 0.0;
  double total_travel_time = 0.0;    // sum_e c_e f_e, c = tau(f) on BPR edges, t on SD edges
  /// SD edges: cap - f, the pairing of the time surcharge t - t_free.
  /// NaN on other edges.
  std::vector<double> multiplier;
  double capacity_violation = 0.0;   // ||(f - cap)_+||_2 over SD edges
  double complementarity = 0.0;      // max over SD edges of (t - t_free)(cap - f)
  std::string certificate;           // "averaged", "last_iterate" or "frank_wolfe"
  bool certified = false;
  double lipschitz_max = 0.0;        // largest accepted line-search L, original units
  SolverReport solver;
};

/// Single-level solve. stochastic needs gamma > 0 and BPR edges,
/// stable_dynamics SD edges only, mixed takes both. beckmann forces
/// gamma = 0 and certifies averaged all-or-nothing flows with the
/// Frank-Wolfe gap.
EquilibriumReport solve_assignment(const Network& net, Model model, const SolveOptions& opts);

/// Joint UMT solve of a network with two or more levels.
EquilibriumReport solve_multistage(const Network& net, const SolveOptions& opts);

/// Origin-sampling estimator of the gradient of S.
class OriginSampler {
 public:
  explicit OriginSampler(const Network& net);

  int num_origins() const { return static_cast<int>(origins_.size()); }
  const std::vector<int>& origins() const { return origins_; }
  double origin_demand(int i) const { return origin_demand_[i]; }

  /// Mean over `batch` draws of (N / d_o) grad S_o(t), o ~ d_o / N.
  Vector sample(const TimeVector& t, long batch, Rng& rng, Execution exec = Execution::parallel) const;
  /// How many times each origin is drawn in a batch (multinomial).
  std::vector<long> draw_counts(long batch, Rng& rng) const;
  /// Estimate built from per-origin draw counts.
  Vector estimate(const TimeVector& t, const std::vector<long>& counts, Execution exec = Execution::parallel) const;
  /// Bound on E||estimate - grad S||^2 for a single draw.
  double variance_bound() const;

 private:
  const Network* net_;
  std::vector<int> origins_;
  std::vector<double> origin_demand_;
  std::vector<Network> parts_;  // the network restricted to one origin's ODs
  double total_ = 0.0;
};

/// Unbiased estimate of the gradient of the smooth dual part using a batch
/// of sampled origins.
Vector stochastic_origin_oracle(const Network& net, const TimeVector& t, long batch, Rng& rng);

}  // namespace tapeq
