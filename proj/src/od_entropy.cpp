#include "tapeq/od_entropy.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include <fmt/format.h>

namespace tapeq {

namespace {

double lse_rows(const Vector& v, Eigen::Index begin, Eigen::Index stride, Eigen::Index count) {
  double hi = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < count; ++k) hi = std::max(hi, v[begin + k * stride]);
  long double s = 0.0L;
  for (Eigen::Index k = 0; k < count; ++k) s += std::exp(static_cast<long double>(v[begin + k * stride] - hi));
  return hi + static_cast<double>(std::log(s));
}

}  // namespace

void ElpProblem::validate() const {
  if (L.size() < 1 || W.size() < 1) throw DomainError("marginals must be nonempty");
  if (T.rows() != L.size() || T.cols() != W.size())
    throw DomainError(fmt::format("cost matrix is {}x{}, marginals {} and {}", T.rows(), T.cols(), L.size(), W.size()));
  if (!(gamma > 0.0)) throw DomainError("gamma must be positive");
  for (Eigen::Index i = 0; i < L.size(); ++i)
    if (!(L[i] > 0.0) || !std::isfinite(L[i])) throw DomainError(fmt::format("row sum {} must be positive", i));
  for (Eigen::Index j = 0; j < W.size(); ++j)
    if (!(W[j] > 0.0) || !std::isfinite(W[j])) throw DomainError(fmt::format("column sum {} must be positive", j));
  if (!T.allFinite()) throw DomainError("cost matrix has non-finite entries");
  const double a = L.sum(), b = W.sum();
  if (std::abs(a - b) > 1e-12 * std::max(a, b))
    throw DomainError(fmt::format("unbalanced marginals: rows sum to {:.17g}, columns to {:.17g}", a, b));
}

Vector ElpProblem::b() const {
  Vector out(num_duals());
  out << L.head(L.size() - 1), W.head(W.size() - 1);
  return out;
}

Vector ElpProblem::apply_A(const Matrix& d) const {
  Vector out(num_duals());
  const Vector r = d.rowwise().sum(), c = d.colwise().sum().transpose();
  out << r.head(r.size() - 1), c.head(c.size() - 1);
  return out;
}

double ElpProblem::residual(const Matrix& d) const {
  const Vector r = d.rowwise().sum() - L;
  const Vector c = d.colwise().sum().transpose() - W;
  return std::sqrt(r.squaredNorm() + c.squaredNorm());
}

double ElpProblem::primal(const Matrix& d) const {
  double s = (T.array() * d.array()).sum();
  for (Eigen::Index k = 0; k < d.size(); ++k) {
    const double x = d.data()[k];
    if (x > 0.0) s += gamma * x * std::log(x);
  }
  return s;
}

ElpDual elp_dual_oracle(const ElpProblem& p, const Vector& y) {
  const Eigen::Index n = p.L.size(), m = p.W.size();
  if (y.size() != p.num_duals()) throw DomainError("dual vector has the wrong size");
  // z_ij = -(T_ij + y_i [i < n-1] + y_{n-1+j} [j < m-1]) / gamma
  Vector z(n * m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) {
      double a = p.T(i, j);
      if (i + 1 < n) a += y[i];
      if (j + 1 < m) a += y[n - 1 + j];
      z[i * m + j] = -a / p.gamma;
    }
  const double M = p.mass();
  const double lse = log_sum_exp(z);
  const Vector x = softmax(z, M);
  ElpDual out;
  out.d.resize(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) out.d(i, j) = x[i * m + j];
  const Vector b = p.b();
  out.grad = b - p.apply_A(out.d);
  out.value = y.dot(b) + p.gamma * M * (lse - std::log(M));
  return out;
}

ElpSolution solve_entropy_od(const ElpProblem& p0, const OdOptions& opts) {
  p0.validate();
  if (!(opts.eps > 0.0) || !(opts.eps_residual > 0.0)) throw DomainError("eps and eps_residual must be positive");
  // Work with T / gamma, gamma = 1 and unit mass: the solution is then
  // invariant under a common scaling of T and gamma.
  const double M = p0.mass(), g0 = p0.gamma;
  ElpProblem p;
  p.L = p0.L / M;
  p.W = p0.W / M;
  p.T = p0.T / g0;
  p.gamma = 1.0;
  const double eps = opts.eps / (g0 * M), eps_res = opts.eps_residual / M;

  ElpSolution sol;
  const int k = p.num_duals();
  auto finish = [&](const Matrix& d, const Vector& y) {
    sol.d = d * M;
    sol.y = y * g0;
    sol.gap = (elp_dual_oracle(p, y).value + p.primal(d)) * g0 * M;
    sol.residual = p0.residual(sol.d);
    sol.certified = sol.gap <= opts.eps && sol.residual <= opts.eps_residual;
    return sol;
  };
  if (k == 0) {
    const auto ev = elp_dual_oracle(p, Vector(0));
    sol.report.termination = Termination::converged;
    return finish(ev.d, Vector(0));
  }

  std::deque<std::pair<Vector, ElpDual>> memo;
  auto at = [&](const Vector& y) -> const ElpDual& {
    for (const auto& [q, ev] : memo)
      if (q == y) return ev;
    memo.emplace_back(y, elp_dual_oracle(p, y));
    if (memo.size() > 3) memo.pop_front();
    return memo.back().second;
  };
  SmoothOracle f;
  f.value = [&](const Vector& y) { return at(y).value; };
  f.value_grad = [&](const Vector& y) {
    const auto& ev = at(y);
    return OracleValue{ev.value, ev.grad};
  };

  Matrix sum = Matrix::Zero(p.L.size(), p.W.size());
  double radius = 1.0, L_max = 0.0;
  int doublings = 0;
  Matrix best_d;
  Vector best_y;
  double best_score = std::numeric_limits<double>::infinity();

  UmtOptions o;
  o.eps = eps;
  o.max_iter = opts.max_iter;
  o.observe = [&](const UmtStep& s) {
    sum += s.alpha * at(s.y).d;
    L_max = std::max(L_max, s.L);
  };
  o.stop = [&](const UmtStep& s) {
    const Matrix d = sum / s.A;
    const double gap = at(s.x).value + p.primal(d);
    const double res = p.residual(d);
    const double score = std::max(gap / eps, res / eps_res);
    if (score < best_score) {
      best_score = score;
      best_d = d;
      best_y = s.x;
    }
    // Iteration budget 6 max{sqrt(L R^2 / eps), sqrt(L / eps_res) R} for the current radius.
    auto budget = [&] {
      return 6.0 * std::max(std::sqrt(L_max * radius * radius / eps), std::sqrt(L_max / eps_res) * radius);
    };
    while (s.k + 1 > budget()) {
      radius *= 2.0;
      ++doublings;
    }
    return score <= 1.0;
  };
  const auto r = umt_minimize(f, EuclideanBox::unconstrained(Vector::Zero(k)), o);
  sol.report = r.report;
  sol.radius = radius * g0;
  sol.radius_doublings = doublings;
  finish(best_d, best_y);
  sol.report.termination = sol.certified ? Termination::converged : Termination::max_iter;
  return sol;
}

BalancingResult balancing_oracle(const ElpProblem& p, double tol, int max_iter) {
  p.validate();
  const Eigen::Index n = p.L.size(), m = p.W.size();
  Vector K(n * m);  // -T / gamma, row-major
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) K[i * m + j] = -p.T(i, j) / p.gamma;
  Vector u = Vector::Zero(n), v = Vector::Zero(m);
  const Vector lnL = p.L.array().log(), lnW = p.W.array().log();
  auto matrix = [&]() {
    Matrix d(n, m);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < m; ++j) d(i, j) = std::exp(K[i * m + j] + u[i] + v[j]);
    return d;
  };
  BalancingResult out;
  Vector work(n * m);
  for (out.iterations = 0; out.iterations < max_iter; ++out.iterations) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) work[i * m + j] = K[i * m + j] + v[j];
      u[i] = lnL[i] - lse_rows(work, i * m, 1, m);
    }
    for (Eigen::Index j = 0; j < m; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) work[i * m + j] = K[i * m + j] + u[i];
      v[j] = lnW[j] - lse_rows(work, j, m, n);
    }
    out.residual = p.residual(matrix());
    if (out.residual <= tol) {
      out.converged = true;
      ++out.iterations;
      break;
    }
  }
  out.d = matrix();
  return out;
}

RegressionResult entropy_regression_simplex(const Matrix& A, const Vector& b, double mu, double eps, int max_iter) {
  const Eigen::Index n = A.cols();
  if (n < 1) throw DomainError("regression needs at least one column");
  if (A.rows() != b.size()) throw DomainError("A and b have different row counts");
  if (!(mu > 0.0)) throw DomainError("mu must be positive");
  if (!(eps > 0.0)) throw DomainError("eps must be positive");
  const double ln_n = std::log(static_cast<double>(n));
  if (n > 1 && mu > eps / (2.0 * ln_n))
    throw DomainError(fmt::format(
        "mu = {:g} exceeds eps / (2 ln n) = {:g}: the strongly convex regime is not supported here; "
        "use regularize() with restart_umt() and a norm-type prox instead",
        mu, eps / (2.0 * ln_n)));

  const EntropySimplex prox = EntropySimplex::uniform(static_cast<int>(n), 1.0, mu);
  SmoothOracle f;
  f.value = [&](const Vector& x) { return 0.5 * (A * x - b).squaredNorm(); };
  f.value_grad = [&](const Vector& x) {
    const Vector r = A * x - b;
    return OracleValue{0.5 * r.squaredNorm(), A.transpose() * r};
  };
  UmtOptions o;
  o.eps = eps;
  o.max_iter = max_iter;
  o.radius_sq = std::max(ln_n, 1e-300);
  const auto r = umt_minimize(f, prox, o);
  RegressionResult out;
  out.x = r.x;
  out.value = r.report.final_value;
  out.report = r.report;
  return out;
}

}  // namespace tapeq
