#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "tapeq/prox.hpp"

namespace tapeq {

using Rng = std::mt19937_64;

struct OracleValue {
  double value = 0.0;
  Vector grad;
};

/// First-order oracle of the smooth part f. value_grad is used at the
/// model points, value alone at the line-search test points.
struct SmoothOracle {
  std::function<double(const Vector&)> value;
  std::function<OracleValue(const Vector&)> value_grad;
  /// Unbiased stochastic gradient, for the mini-batch variant.
  std::function<Vector(const Vector&, Rng&)> sample_grad;
  /// Optional: mean of m samples in one call, used in place of m
  /// sample_grad calls.
  std::function<Vector(const Vector&, long, Rng&)> sample_batch;
  /// Declared inexactness of the oracle.
  double delta = 0.0;
  /// Variance bound E||sample - grad||_*^2 <= D. Unset means unknown.
  std::optional<double> variance;
};

class DivergedOracle : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Termination { converged, stop_rule, max_iter, infeasible };
std::string to_string(Termination t);

struct SolverReport {
  int iterations = 0;
  long value_calls = 0;
  long grad_calls = 0;
  double final_value = 0.0;
  Termination termination = Termination::max_iter;
  std::vector<double> value_trace;  // F(x^k)
  std::vector<double> L_trace;      // accepted L per iteration
  std::vector<double> alpha_trace;
  std::vector<double> A_trace;
  std::vector<double> gap_trace;    // certificate, NaN when unavailable
  std::vector<long> batch_trace;    // mini-batch sizes (stochastic variant)
  std::vector<double> restart_values;  // F at the end of each restart run
};

/// State exposed after every accepted step (k = 0 is the initial step).
struct UmtStep {
  int k;
  const Vector& x;
  const Vector& y;  // model point where the gradient was taken
  const Vector& u;
  double alpha;
  double A;
  double L;
  double f_y;
  const Vector& grad_y;
  double F_x;     // f(x) + h(x)
  double gap;     // F(x) - (phi(u) - R^2) / A, NaN without a radius or with mu > 0
};

struct UmtOptions {
  double eps = 1e-6;
  double mu = 0.0;  // strong convexity of f in the prox norm; mu~ = mu / omega
  int max_iter = 10000;
  double L0 = 1.0;
  double L_ceiling = 1e18;
  /// Upper bound on V(x*, y0); enables the built-in certificate stop.
  std::optional<double> radius_sq;
  /// Extra stop rule checked after each accepted step.
  std::function<bool(const UmtStep&)> stop;
  /// Called after each accepted step, before the stop rules.
  std::function<void(const UmtStep&)> observe;
};

struct UmtResult {
  Vector x;
  SolverReport report;
};

/// Universal method of triangles for min f(x) + h(x) over the prox set, h
/// being the setup's composite term.
UmtResult umt_minimize(const SmoothOracle& f, const ProxSetup& prox, const UmtOptions& opts);

/// Mini-batch variant: the gradient at each model point is the mean of
/// m = ceil(8 D A / (L alpha eps)) samples (at least 1). Throws when the
/// variance bound is unset.
UmtResult umt_stochastic(const SmoothOracle& f, const ProxSetup& prox, const UmtOptions& opts, std::uint64_t seed);

/// Positive root of L a^2 = (A + a)(1 + A mu).
double umt_alpha(double A, double L, double mu_tilde);

}  // namespace tapeq
