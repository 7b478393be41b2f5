#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "tapeq/umt.hpp"

namespace tapeq {

/// min f(x) subject to g(x) <= 0 over the prox set. Subgradients may be
/// stochastic; leave g empty for an unconstrained problem.
struct ConstrainedProblem {
  std::function<Vector(const Vector&, Rng&)> f_subgrad;
  std::function<double(const Vector&)> g;
  std::function<Vector(const Vector&, Rng&)> g_subgrad;
};

struct MdOptions {
  double eps = 1e-2;
  double M_f = 1.0;
  double M_g = 1.0;  // defaults to M_f when there is no constraint
  int N = 1000;
  std::uint64_t seed = 0;
  /// Called with (k, x^k, productive) before each step.
  std::function<void(int, const Vector&, bool)> observe;
  /// Checked after step k; true ends the run early.
  std::function<bool(int)> stop;
};

struct MdResult {
  Vector x_bar;  // mean of the productive iterates
  int productive = 0;
  int nonproductive = 0;
  double h_f = 0.0;
  double h_g = 0.0;
  std::vector<double> steps;  // step size used at each iteration
  SolverReport report;
};

/// Productive steps (g(x^k) <= eps) use h_f = eps / (M_f M_g) on a
/// subgradient of f, the others h_g = eps / M_g^2 on a subgradient of g.
/// Starts at the prox centre.
MdResult mirror_descent_constrained(const ConstrainedProblem& problem, const ProxSetup& prox, const MdOptions& opts);

/// Iteration count ceil(2 M_g^2 R^2 / eps^2) + 1 sufficient for the bound.
int mirror_descent_budget(double M_g, double R2, double eps);

}  // namespace tapeq
