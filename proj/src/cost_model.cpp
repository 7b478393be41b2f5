#include "tapeq/cost_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tapeq {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

bool EdgeCostModel::time_is_fixed() const {
  if (kind == CostKind::sd) return std::isinf(capacity);
  return bpr_gain == 0.0;
}

double bpr_cost(const EdgeCostModel& model, double flow) {
  if (model.kind != CostKind::bpr) throw DomainError("bpr_cost called on a non-BPR edge");
  if (!(flow >= 0.0)) throw DomainError("bpr_cost: negative flow");
  if (model.bpr_gain == 0.0 || flow == 0.0) return model.t_free;
  return model.t_free * (1.0 + model.bpr_gain * std::pow(flow / model.capacity, model.bpr_power));
}

double bpr_integral(const EdgeCostModel& model, double flow) {
  if (model.kind != CostKind::bpr) throw DomainError("bpr_integral called on a non-BPR edge");
  if (!(flow >= 0.0)) throw DomainError("bpr_integral: negative flow");
  const double p = model.bpr_power;
  const double tail = model.bpr_gain == 0.0 || flow == 0.0
                          ? 0.0
                          : model.bpr_gain * model.capacity / (p + 1.0) *
                                std::pow(flow / model.capacity, p + 1.0);
  return model.t_free * (flow + tail);
}

Conjugate bpr_conjugate(const EdgeCostModel& model, double t) {
  if (model.kind != CostKind::bpr) throw DomainError("bpr_conjugate called on a non-BPR edge");
  if (t <= model.t_free) return {0.0, 0.0};
  if (model.bpr_gain == 0.0) return {kInf, kInf};
  // Inverse cost map f(t); the conjugate value integrates f from t_free to t,
  // which collapses to (t - t_free) * f * p / (p + 1).
  const double excess = t - model.t_free;
  const double p = model.bpr_power;
  const double flow = model.capacity * std::pow(excess / (model.bpr_gain * model.t_free), 1.0 / p);
  return {excess * flow * p / (p + 1.0), flow};
}

std::optional<Conjugate> sd_conjugate(const EdgeCostModel& model, double t) {
  if (model.kind != CostKind::sd) throw DomainError("sd_conjugate called on a non-SD edge");
  if (t < model.t_free) return std::nullopt;
  if (std::isinf(model.capacity)) {
    if (t == model.t_free) return Conjugate{0.0, kInf};
    return Conjugate{kInf, kInf};
  }
  return Conjugate{model.capacity * (t - model.t_free), model.capacity};
}

Conjugate conjugate(const EdgeCostModel& model, double t) {
  if (model.kind == CostKind::bpr) return bpr_conjugate(model, t);
  auto c = sd_conjugate(model, t);
  return c ? *c : Conjugate{kInf, 0.0};
}

double edge_potential(const EdgeCostModel& model, double flow) {
  if (model.kind == CostKind::bpr) return bpr_integral(model, std::max(flow, 0.0));
  return model.t_free * flow;
}

}  // namespace tapeq
