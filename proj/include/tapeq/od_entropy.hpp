#pragma once

#include <Eigen/Core>

#include <string>

#include "tapeq/umt.hpp"

namespace tapeq {

using Matrix = Eigen::MatrixXd;

/// Entropy model of the correspondence matrix:
///   min <T, d> + gamma sum d ln d  s.t.  row sums L, column sums W, d >= 0.
/// The last row and the last column constraint are dropped (implied by the
/// others and the total mass), so the dual has n + m - 2 entries.
struct ElpProblem {
  Vector L;  // row sums (zone productions)
  Vector W;  // column sums (zone attractions)
  Matrix T;  // travel cost between zones
  double gamma = 1.0;

  /// Throws DomainError on shape mismatches, nonpositive marginals,
  /// unbalanced totals or gamma <= 0.
  void validate() const;
  double mass() const { return L.sum(); }
  int num_duals() const { return static_cast<int>(L.size() + W.size()) - 2; }
  /// Reduced right-hand side b and A x for the kept constraints.
  Vector b() const;
  Vector apply_A(const Matrix& d) const;
  /// Full marginal residual ||(row sums - L, col sums - W)||_2.
  double residual(const Matrix& d) const;
  /// g(d) = <T, d> + gamma sum d ln d.
  double primal(const Matrix& d) const;
};

struct ElpDual {
  double value = 0.0;  // f(y) = max over the simplex of <y, b - A d> - g(d)
  Vector grad;         // b - A d(y)
  Matrix d;            // d(y), mass-scaled softmax
};

ElpDual elp_dual_oracle(const ElpProblem& p, const Vector& y);

struct ElpSolution {
  Matrix d;
  Vector y;
  double gap = 0.0;       // f(y) + g(d)
  double residual = 0.0;  // full marginal residual
  bool certified = false;
  double radius = 0.0;    // final estimate of ||y*||
  int radius_doublings = 0;
  std::string dropped = "last row and last column constraint";
  SolverReport report;
};

struct OdOptions {
  double eps = 1e-8;
  double eps_residual = 1e-6;
  int max_iter = 200000;
};

/// UMT on the dual with the averaged primal d^N = sum alpha_k / A_N d(y^k);
/// stops when f(y^N) + g(d^N) <= eps and the residual <= eps_residual.
/// ||y*|| is estimated by doubling a trust radius whenever the
/// iteration budget 6 max{sqrt(L R^2 / eps), sqrt(L / eps_res) R} for the
/// current radius runs out.
ElpSolution solve_entropy_od(const ElpProblem& p, const OdOptions& opts = {});

struct BalancingResult {
  Matrix d;
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;
};

/// Alternating row/column scaling of exp(-T / gamma) in the log domain,
/// until the marginal residual is <= tol or max_iter sweeps.
BalancingResult balancing_oracle(const ElpProblem& p, double tol = 1e-12, int max_iter = 100000);

struct RegressionResult {
  Vector x;
  double value = 0.0;
  SolverReport report;
};

/// min 1/2 ||A x - b||^2 + mu sum x ln x over the unit simplex, entropy as
/// the composite of an entropy prox. Only the small-mu regime
/// mu <= eps / (2 ln n) is supported.
RegressionResult entropy_regression_simplex(const Matrix& A, const Vector& b, double mu, double eps,
                                            int max_iter = 1000000);

}  // namespace tapeq
