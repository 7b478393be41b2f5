#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace tapeq {

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

enum class CostKind { bpr, sd };

/// Per-edge travel-cost model.
///
/// BPR edges use tau(f) = t_free * (1 + bpr_gain * (f / capacity)^bpr_power).
/// SD (stable dynamics) edges carry only t_free and capacity: the travel time
/// equals t_free below capacity and the capacity is a hard constraint whose
/// Lagrange multiplier is the time surcharge t - t_free. An SD edge may have
/// infinite capacity, which pins its time at t_free.
struct EdgeCostModel {
  CostKind kind = CostKind::bpr;
  double t_free = 1.0;
  double capacity = 1.0;
  double bpr_gain = 0.15;
  double bpr_power = 0.25;

  static EdgeCostModel bpr(double t_free, double capacity, double gain, double power = 0.25) {
    return {CostKind::bpr, t_free, capacity, gain, power};
  }
  static EdgeCostModel sd(double t_free, double capacity) {
    return {CostKind::sd, t_free, capacity, 0.0, 0.0};
  }

  /// True when the dual time of this edge can only equal t_free
  /// (constant-cost BPR or uncapacitated SD).
  bool time_is_fixed() const;
};

/// Value of a convex conjugate together with its derivative (the flow).
struct Conjugate {
  double value = 0.0;
  double flow = 0.0;
};

double bpr_cost(const EdgeCostModel& model, double flow);

/// sigma(f) = integral of tau from 0 to f, closed form.
double bpr_integral(const EdgeCostModel& model, double flow);

/// sigma*(t) = sup_{f >= 0} { f t - sigma(f) } and its maximiser.
/// Returns (0, 0) for t <= t_free. A constant-cost edge (gain 0) has
/// sigma* = +inf for t > t_free.
Conjugate bpr_conjugate(const EdgeCostModel& model, double t);

/// Conjugate of the stable-dynamics limit. std::nullopt when t < t_free
/// (the conjugate is +inf there).
std::optional<Conjugate> sd_conjugate(const EdgeCostModel& model, double t);

/// Dispatches on kind. SD edges outside the domain return +inf value.
Conjugate conjugate(const EdgeCostModel& model, double t);

/// Primal edge potential used by duality gaps. For SD edges this is the
/// Lagrangian part t_free * f; the capacity itself is checked separately.
double edge_potential(const EdgeCostModel& model, double flow);

}  // namespace tapeq
