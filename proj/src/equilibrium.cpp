#include "tapeq/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <memory>

#include <fmt/format.h>

#include "tapeq/mirror_descent.hpp"

namespace tapeq {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_sd(const EdgeCostModel& c) { return c.kind == CostKind::sd; }

// Composite slope of an SD edge; fixed edges contribute nothing.
double sd_slope(const EdgeCostModel& c) { return is_sd(c) && !c.time_is_fixed() ? c.capacity : 0.0; }

Vector clamp_to(const Vector& t, const Vector& lo, const Vector& hi) { return t.cwiseMax(lo).cwiseMin(hi); }

double edge_gap(const EdgeCostModel& c, double t, double f) {
  if (is_sd(c)) return c.time_is_fixed() ? 0.0 : (t - c.t_free) * (c.capacity - f);
  if (c.time_is_fixed()) return 0.0;
  return bpr_integral(c, f) - f * t + bpr_conjugate(c, t).value;
}

// Memo of the last few dual evaluations, keyed by the exact point.
class DualOracle {
 public:
  DualOracle(const Network& net, Execution exec) : net_(net), exec_(exec), lo_(time_lower(net)), hi_(time_upper(net)) {}

  const DualEvaluation& at(const Vector& t) {
    for (const auto& [p, ev] : memo_)
      if (p.size() == t.size() && p == t) return *ev;
    auto ev = std::make_shared<DualEvaluation>(dual_value_grad(net_, clamp_to(t, lo_, hi_), exec_));
    memo_.emplace_back(t, ev);
    if (memo_.size() > 3) memo_.pop_front();
    return *memo_.back().second;
  }

 private:
  const Network& net_;
  Execution exec_;
  Vector lo_, hi_;
  std::deque<std::pair<Vector, std::shared_ptr<DualEvaluation>>> memo_;
};

struct Candidate {
  Vector t;
  Vector plain;
  FlowState flows;
  GapBreakdown gap;
  double residual = 0.0;
  std::string kind;
  double score = kInf;
};

double capacity_violation(const Network& net, const Vector& f) {
  double s = 0.0;
  for (int i = 0; i < net.num_times(); ++i) {
    const auto& c = net.cost(i);
    if (is_sd(c) && std::isfinite(c.capacity)) {
      const double over = std::max(0.0, f[i] - c.capacity);
      s += over * over;
    }
  }
  return std::sqrt(s);
}

bool has_sd(const Network& net) {
  for (int i = 0; i < net.num_times(); ++i)
    if (is_sd(net.cost(i))) return true;
  return false;
}

double score_of(double gap, double residual, const SolveOptions& o, bool sd) {
  double s = gap / o.eps;
  if (sd) s = std::max(s, residual / o.eps_residual);
  return s;
}

EquilibriumReport assemble(const Network& net, Model model, const SolveOptions& opts, const Candidate& c,
                           SolverReport solver, double L_scale) {
  EquilibriumReport r;
  r.model = model;
  r.eps = opts.eps;
  r.eps_residual = opts.eps_residual;
  r.t = c.t;
  r.flows = c.flows;
  r.plain_flows = c.plain;
  r.edge_gap = c.gap.per_edge;
  r.total_gap = c.gap.total;
  r.routing_gap = c.gap.routing;
  r.certificate = c.kind;
  r.dual_value = dual_value_grad(net, c.t, Execution::serial).value;
  for (int i = 0; i < net.num_times(); ++i) {
    const auto& m = net.cost(i);
    const double cost = is_sd(m) ? c.t[i] : bpr_cost(m, std::max(0.0, c.plain[i]));
    r.total_travel_time += cost * c.plain[i];
  }
  r.multiplier.assign(net.num_times(), kNaN);
  r.complementarity = 0.0;
  for (int i = 0; i < net.num_times(); ++i) {
    const auto& m = net.cost(i);
    if (!is_sd(m) || m.time_is_fixed()) continue;
    r.multiplier[i] = m.capacity - c.plain[i];
    r.complementarity = std::max(r.complementarity, (c.t[i] - m.t_free) * r.multiplier[i]);
  }
  r.capacity_violation = capacity_violation(net, c.plain);
  const bool sd = has_sd(net);
  r.certified = r.total_gap <= opts.eps && (!sd || r.capacity_violation <= opts.eps_residual);
  for (double L : solver.L_trace) r.lipschitz_max = std::max(r.lipschitz_max, L * L_scale);
  solver.termination = r.certified ? Termination::converged : Termination::max_iter;
  r.solver = std::move(solver);
  return r;
}

void check_options(const SolveOptions& o) {
  if (!(o.eps > 0.0)) throw DomainError("eps must be positive");
  if (!(o.eps_residual > 0.0)) throw DomainError("eps_residual must be positive");
  if (o.max_iter < 1) throw DomainError("max_iter must be >= 1");
}

FlowState zero_like(const FlowState& f) {
  FlowState z;
  z.edge_flows = f.edge_flows;
  for (auto& lv : z.edge_flows) std::fill(lv.begin(), lv.end(), 0.0);
  return z;
}

void add_scaled(FlowState& acc, const FlowState& f, double w) {
  for (std::size_t k = 0; k < acc.edge_flows.size(); ++k)
    for (std::size_t e = 0; e < acc.edge_flows[k].size(); ++e) acc.edge_flows[k][e] += w * f.edge_flows[k][e];
}

FlowState scaled(const FlowState& f, double w) {
  FlowState out = zero_like(f);
  add_scaled(out, f, w);
  return out;
}

// Frank-Wolfe certificate of flows f on a gamma = 0 BPR network: t = tau(f),
// gap = <tau(f), f> - S(tau(f)) plus the (zero) edge terms.
Candidate frank_wolfe_candidate(const Network& net, const Vector& f, Execution exec) {
  Candidate c;
  c.plain = f;
  c.t.resize(net.num_times());
  for (int i = 0; i < net.num_times(); ++i) c.t[i] = bpr_cost(net.cost(i), std::max(0.0, f[i]));
  const auto ev = evaluate_network(net, c.t, {false, exec});
  c.gap = duality_gap(net, c.t, f);
  c.gap.routing = c.t.dot(f) - ev.value;
  c.gap.total = c.gap.edges + c.gap.routing;
  c.kind = "frank_wolfe";
  return c;
}

// UMT on the normalised dual D / N with primal averaging of the flows
// at the model points.
EquilibriumReport solve_by_umt(const Network& net, Model model, const SolveOptions& opts, bool frank_wolfe) {
  const double N = net.total_demand();
  const Vector lo = time_lower(net), hi = time_upper(net), t0 = net.free_flow_times();
  Vector slope(net.num_times());
  for (int i = 0; i < net.num_times(); ++i) slope[i] = sd_slope(net.cost(i)) / N;
  const EuclideanBox prox(t0, lo, hi, slope, t0);
  const bool sd = has_sd(net);

  DualOracle oracle(net, opts.exec);
  SmoothOracle f;
  f.value = [&](const Vector& t) { return oracle.at(t).smooth / N; };
  f.value_grad = [&](const Vector& t) {
    const auto& ev = oracle.at(t);
    return OracleValue{ev.smooth / N, ev.grad / N};
  };

  std::unique_ptr<OriginSampler> sampler;
  if (opts.sample_origins) {
    for (const auto& lv : net.levels())
      if (!(lv.gamma > 0.0)) throw DomainError("origin sampling needs gamma > 0 on every level");
    sampler = std::make_unique<OriginSampler>(net);
    f.variance = sampler->variance_bound() / (N * N);
    f.sample_batch = [&](const Vector& t, long m, Rng& rng) {
      const Vector tc = clamp_to(t, lo, hi);
      Vector g = -sampler->sample(tc, m, rng, opts.exec);
      for (int i = 0; i < net.num_times(); ++i) {
        const auto& c = net.cost(i);
        if (c.kind == CostKind::bpr && !c.time_is_fixed()) g[i] += bpr_conjugate(c, tc[i]).flow;
      }
      return Vector(g / N);
    };
    f.sample_grad = [&](const Vector& t, Rng& rng) { return f.sample_batch(t, 1, rng); };
  }

  Vector sum_plain = Vector::Zero(net.num_times());
  FlowState sum_flows;
  double sum_entropy = 0.0;
  Candidate best;

  UmtOptions o;
  o.eps = opts.eps / N;
  o.max_iter = opts.max_iter;
  o.observe = [&](const UmtStep& s) {
    if (sampler) return;
    const auto& ev = oracle.at(s.y);
    if (sum_flows.edge_flows.empty()) sum_flows = zero_like(ev.flows);
    sum_plain += s.alpha * ev.plain_flows;
    add_scaled(sum_flows, ev.flows, s.alpha);
    sum_entropy += s.alpha * (ev.softmin - ev.plain_flows.dot(clamp_to(s.y, lo, hi)));
  };
  o.stop = [&](const UmtStep& s) {
    const Vector t = clamp_to(s.x, lo, hi);
    const auto& ev = oracle.at(s.x);
    auto consider = [&](Candidate&& c) {
      c.score = score_of(c.gap.total, c.residual, opts, sd);
      if (c.score < best.score) best = std::move(c);
    };
    {
      Candidate c;
      c.t = t;
      c.plain = ev.plain_flows;
      c.flows = ev.flows;
      c.gap = duality_gap(net, t, c.plain);
      c.residual = capacity_violation(net, c.plain);
      c.kind = "last_iterate";
      consider(std::move(c));
    }
    if (!sampler) {
      Candidate c;
      c.t = t;
      c.plain = sum_plain / s.A;
      c.gap = averaged_gap(net, t, c.plain, ev.softmin, sum_entropy / s.A);
      c.residual = capacity_violation(net, c.plain);
      c.kind = "averaged";
      c.score = score_of(c.gap.total, c.residual, opts, sd);
      if (c.score < best.score) {
        c.flows = scaled(sum_flows, 1.0 / s.A);
        best = std::move(c);
      }
    }
    if (frank_wolfe) {
      Candidate c = frank_wolfe_candidate(net, sum_plain / s.A, opts.exec);
      c.score = score_of(c.gap.total, 0.0, opts, false);
      if (c.score < best.score) {
        c.flows = scaled(sum_flows, 1.0 / s.A);
        best = std::move(c);
      }
    }
    return best.score <= 1.0;
  };

  const UmtResult res = sampler ? umt_stochastic(f, prox, o, opts.seed) : umt_minimize(f, prox, o);
  return assemble(net, model, opts, best, res.report, N);
}

// Staged mirror descent on the nonsmooth dual with all-or-nothing
// subgradients; each stage halves eps and restarts the flow average.
EquilibriumReport solve_beckmann_md(const Network& net, const SolveOptions& opts) {
  const double N = net.total_demand();
  const Vector lo = time_lower(net), hi = time_upper(net), t0 = net.free_flow_times();
  std::unique_ptr<ProxSetup> prox = EuclideanBox(t0, lo, hi).recentered(t0);

  auto subgradient = [&](const Vector& t, Vector* aon) {
    const auto ev = dual_value_grad(net, clamp_to(t, lo, hi), opts.exec);
    if (aon) *aon = ev.plain_flows;
    return Vector(ev.grad / N);
  };
  double eps_stage = 0.0;
  for (int i = 0; i < net.num_times(); ++i) eps_stage = std::max(eps_stage, 0.1 * net.cost(i).t_free);
  double M = std::max(subgradient(t0, nullptr).norm(), 1e-12);
  int stage_len = 100;
  int used = 0;

  SolverReport total;
  Candidate best;
  while (used < opts.max_iter) {
    Vector sum = Vector::Zero(net.num_times());
    int count = 0;
    double M_seen = 0.0;
    bool done = false;
    ConstrainedProblem problem;
    problem.f_subgrad = [&](const Vector& x, Rng&) {
      Vector aon;
      Vector g = subgradient(x, &aon);
      M_seen = std::max(M_seen, g.norm());
      sum += aon;
      ++count;
      Candidate c = frank_wolfe_candidate(net, sum / count, opts.exec);
      c.score = c.gap.total / opts.eps;
      total.value_trace.push_back(c.gap.total);
      total.gap_trace.push_back(c.gap.total);
      if (c.score < best.score) best = std::move(c);
      done = best.score <= 1.0;
      return g;
    };
    MdOptions mo;
    mo.eps = eps_stage;
    mo.M_f = M;
    mo.N = std::min(stage_len, opts.max_iter - used);
    mo.seed = opts.seed;
    mo.stop = [&](int) { return done; };
    const auto r = mirror_descent_constrained(problem, *prox, mo);
    used += r.report.iterations;
    total.iterations += r.report.iterations;
    total.grad_calls += r.report.grad_calls;
    if (done) break;
    prox = prox->recentered(r.x_bar);
    eps_stage /= 2.0;
    stage_len *= 4;
    M = std::max(M_seen, 1e-12);
  }
  best.flows.edge_flows.assign(1, std::vector<double>(best.plain.data(), best.plain.data() + best.plain.size()));
  best.flows.edge_flows.front().resize(net.level(0).edges.size(), 0.0);
  if (!total.value_trace.empty()) total.final_value = total.value_trace.back();
  auto rep = assemble(net, Model::beckmann, opts, best, std::move(total), 0.0);
  rep.lipschitz_max = 0.0;
  return rep;
}

void require_no_sd(const Network& net, Model m) {
  if (has_sd(net))
    throw DomainError(fmt::format("model '{}' takes BPR edges only; use 'mixed' for SD edges", to_string(m)));
}

}  // namespace

Vector time_lower(const Network& net) { return net.free_flow_times(); }

Vector time_upper(const Network& net) {
  Vector hi(net.num_times());
  for (int i = 0; i < net.num_times(); ++i) hi[i] = net.cost(i).time_is_fixed() ? net.cost(i).t_free : kInf;
  return hi;
}

DualEvaluation dual_value_grad(const Network& net, const TimeVector& t, Execution exec) {
  if (t.size() != net.num_times())
    throw DomainError(fmt::format("time vector has {} entries, the network {}", t.size(), net.num_times()));
  for (int i = 0; i < net.num_times(); ++i) {
    const auto& c = net.cost(i);
    const bool fixed_ok = !c.time_is_fixed() || t[i] == c.t_free;
    if (!(t[i] >= c.t_free) || !fixed_ok)
      throw DomainError(fmt::format("time {:.17g} of edge slot {} is outside the dual domain", t[i], i));
  }
  DualEvaluation ev;
  auto eval = evaluate_network(net, t, {true, exec});
  ev.softmin = eval.value;
  ev.plain_flows = std::move(eval.plain_flows);
  ev.flows = std::move(eval.flows);
  ev.grad = -ev.plain_flows;
  double conj = 0.0, composite = 0.0;
  for (int i = 0; i < net.num_times(); ++i) {
    const auto& c = net.cost(i);
    if (is_sd(c)) {
      if (!c.time_is_fixed()) composite += c.capacity * (t[i] - c.t_free);
    } else if (!c.time_is_fixed()) {
      const auto cj = bpr_conjugate(c, t[i]);
      conj += cj.value;
      ev.grad[i] += cj.flow;
    }
  }
  ev.smooth = -ev.softmin + conj;
  ev.value = ev.smooth + composite;
  return ev;
}

GapBreakdown duality_gap(const Network& net, const TimeVector& t, const Vector& plain_flows) {
  GapBreakdown g;
  g.per_edge.resize(net.num_times());
  for (int i = 0; i < net.num_times(); ++i) {
    g.per_edge[i] = edge_gap(net.cost(i), t[i], plain_flows[i]);
    g.edges += g.per_edge[i];
  }
  g.total = g.edges;
  return g;
}

GapBreakdown averaged_gap(const Network& net, const TimeVector& t, const Vector& plain_flows, double softmin_at_t,
                          double weighted_entropy) {
  GapBreakdown g = duality_gap(net, t, plain_flows);
  g.routing = weighted_entropy + plain_flows.dot(t) - softmin_at_t;
  g.total = g.edges + g.routing;
  return g;
}

std::string to_string(Model m) {
  switch (m) {
    case Model::stochastic: return "stochastic";
    case Model::beckmann: return "beckmann";
    case Model::stable_dynamics: return "stable_dynamics";
    case Model::mixed: return "mixed";
  }
  return "unknown";
}

Model parse_model(const std::string& name) {
  for (Model m : {Model::stochastic, Model::beckmann, Model::stable_dynamics, Model::mixed})
    if (to_string(m) == name) return m;
  throw DomainError(fmt::format("unknown model '{}' (stochastic, beckmann, stable_dynamics, mixed)", name));
}

EquilibriumReport solve_assignment(const Network& net, Model model, const SolveOptions& opts) {
  check_options(opts);
  if (net.num_levels() != 1)
    throw DomainError("solve_assignment takes a single-level network; use solve_multistage");
  const double gamma = net.level(0).gamma;
  switch (model) {
    case Model::beckmann:
      require_no_sd(net, model);
      if (opts.sample_origins) throw DomainError("origin sampling needs gamma > 0; beckmann has gamma = 0");
      return opts.beckmann_mirror_descent ? solve_beckmann_md(net.with_gamma(0, 0.0), opts)
                                          : solve_by_umt(net.with_gamma(0, 0.0), model, opts, true);
    case Model::stochastic:
      require_no_sd(net, model);
      if (!(gamma > 0.0)) throw DomainError("stochastic model needs gamma > 0; use beckmann for gamma = 0");
      break;
    case Model::stable_dynamics:
      for (int i = 0; i < net.num_times(); ++i)
        if (!is_sd(net.cost(i))) throw DomainError("stable_dynamics takes SD edges only; use 'mixed'");
      break;
    case Model::mixed: break;
  }
  return solve_by_umt(net, model, opts, false);
}

EquilibriumReport solve_multistage(const Network& net, const SolveOptions& opts) {
  check_options(opts);
  if (net.num_levels() < 2) throw DomainError("solve_multistage needs at least two levels");
  return solve_by_umt(net, has_sd(net) ? Model::mixed : Model::stochastic, opts, false);
}

OriginSampler::OriginSampler(const Network& net) : net_(&net), total_(net.total_demand()) {
  const auto& ods = net.level(0).ods;
  for (const auto& od : ods)
    if (std::find(origins_.begin(), origins_.end(), od.origin) == origins_.end()) origins_.push_back(od.origin);
  std::sort(origins_.begin(), origins_.end());
  for (int o : origins_) {
    auto levels = net.levels();
    auto& lv = levels.front().ods;
    std::erase_if(lv, [o](const OdPair& od) { return od.origin != o; });
    double d = 0.0;
    for (const auto& od : lv) d += od.demand;
    origin_demand_.push_back(d);
    parts_.emplace_back(std::move(levels));
  }
}

Vector OriginSampler::estimate(const TimeVector& t, const std::vector<long>& counts, Execution exec) const {
  if (counts.size() != origins_.size()) throw DomainError("one draw count per origin expected");
  long batch = 0;
  for (long c : counts) batch += c;
  if (batch < 1) throw DomainError("empty origin batch");
  Vector g = Vector::Zero(net_->num_times());
  for (std::size_t i = 0; i < origins_.size(); ++i) {
    if (counts[i] == 0) continue;
    const auto ev = evaluate_network(parts_[i], t, {true, exec});
    g += (static_cast<double>(counts[i]) / static_cast<double>(batch) * total_ / origin_demand_[i]) * ev.plain_flows;
  }
  return g;
}

std::vector<long> OriginSampler::draw_counts(long batch, Rng& rng) const {
  if (batch < 1) throw DomainError("empty origin batch");
  // Conditional binomials: origin i gets Bin(left, d_i / remaining mass).
  std::vector<long> counts(origins_.size(), 0);
  long left = batch;
  double mass = total_;
  for (std::size_t i = 0; i + 1 < origins_.size() && left > 0; ++i) {
    const double p = std::clamp(origin_demand_[i] / mass, 0.0, 1.0);
    counts[i] = std::binomial_distribution<long>(left, p)(rng);
    left -= counts[i];
    mass -= origin_demand_[i];
  }
  counts.back() += left;
  return counts;
}

Vector OriginSampler::sample(const TimeVector& t, long batch, Rng& rng, Execution exec) const {
  return estimate(t, draw_counts(batch, rng), exec);
}

double OriginSampler::variance_bound() const {
  // ||grad S_o||_2 <= d_o * l with l the most plain edges on one walk.
  double longest = 1.0;
  for (int k = net_->num_levels() - 1; k >= 0; --k) longest = net_->level(k).hop_bound() * longest;
  return total_ * total_ * longest * longest;
}

Vector stochastic_origin_oracle(const Network& net, const TimeVector& t, long batch, Rng& rng) {
  OriginSampler sampler(net);
  Vector g = -sampler.sample(t, batch, rng);
  for (int i = 0; i < net.num_times(); ++i) {
    const auto& c = net.cost(i);
    if (c.kind == CostKind::bpr && !c.time_is_fixed()) g[i] += bpr_conjugate(c, t[i]).flow;
  }
  return g;
}

}  // namespace tapeq
