#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "tapeq/od_entropy.hpp"

using namespace tapeq;

namespace {

ElpProblem random_problem(std::mt19937_64& rng, int n, double gamma) {
  std::uniform_real_distribution<double> u(0.5, 2.0);
  ElpProblem p;
  p.L.resize(n);
  p.W.resize(n);
  p.T.resize(n, n);
  for (int i = 0; i < n; ++i) {
    p.L[i] = u(rng);
    p.W[i] = u(rng);
    for (int j = 0; j < n; ++j) p.T(i, j) = 3.0 * u(rng);
  }
  p.W *= p.L.sum() / p.W.sum();
  p.gamma = gamma;
  return p;
}

// Dense grid minimum of F on the 2-simplex of R^3.
double grid_min(const std::function<double(const Vector&)>& F, double step) {
  double best = std::numeric_limits<double>::infinity();
  const int k = static_cast<int>(std::round(1.0 / step));
  for (int i = 0; i <= k; ++i)
    for (int j = 0; i + j <= k; ++j) {
      Vector x(3);
      x << i * step, j * step, (k - i - j) * step;
      best = std::min(best, F(x));
    }
  return best;
}

}  // namespace

TEST(ElpDualOracle, UniformAtZero) {
  ElpProblem p;
  p.L = Vector::Constant(3, 1.0);
  p.W = Vector::Constant(3, 1.0);
  p.T = Matrix::Zero(3, 3);
  const auto ev = elp_dual_oracle(p, Vector::Zero(4));
  for (Eigen::Index k = 0; k < 9; ++k) EXPECT_NEAR(ev.d.data()[k], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(ev.grad.norm(), 0.0, 1e-14);
}

TEST(ElpDualOracle, TwoByTwoStationaryPointHasBothMarginals) {
  // T = [[0, 1], [1, 0]], gamma = 1, L = W = (1/2, 1/2). By symmetry
  // d = [[a, b], [b, a]] with a + b = 1/2; the softmax needs a/b = e when
  // y = 0, which already meets the marginals.
  ElpProblem p;
  p.L = Vector::Constant(2, 0.5);
  p.W = Vector::Constant(2, 0.5);
  p.T.resize(2, 2);
  p.T << 0.0, 1.0, 1.0, 0.0;
  const auto ev = elp_dual_oracle(p, Vector::Zero(2));
  EXPECT_NEAR(ev.grad.norm(), 0.0, 1e-15);
  EXPECT_NEAR(ev.d(0, 0) / ev.d(0, 1), std::exp(1.0), 1e-13);
  EXPECT_NEAR(p.residual(ev.d), 0.0, 1e-15);
}

TEST(ElpDualOracle, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(2);
  const auto p = random_problem(rng, 4, 0.8);
  std::normal_distribution<double> nd;
  Vector y(p.num_duals());
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = nd(rng);
  const auto fd = oracle::central_differences([&](const Vector& z) { return elp_dual_oracle(p, z).value; }, y, 1e-5);
  const auto g = elp_dual_oracle(p, y).grad;
  for (Eigen::Index i = 0; i < y.size(); ++i) EXPECT_NEAR(g[i], fd[i], 1e-6 * (1.0 + std::abs(fd[i])));
}

TEST(SolveEntropyOd, Examples) {
  ElpProblem one;
  one.L = Vector::Constant(1, 2.5);
  one.W = Vector::Constant(1, 2.5);
  one.T = Matrix::Constant(1, 1, 3.0);
  const auto s1 = solve_entropy_od(one);
  EXPECT_TRUE(s1.certified);
  EXPECT_DOUBLE_EQ(s1.d(0, 0), 2.5);

  ElpProblem two;
  two.L = Vector::Constant(2, 0.5);
  two.W = Vector::Constant(2, 0.5);
  two.T = Matrix::Constant(2, 2, 4.0);
  const auto s2 = solve_entropy_od(two);
  EXPECT_TRUE(s2.certified);
  for (Eigen::Index k = 0; k < 4; ++k) EXPECT_NEAR(s2.d.data()[k], 0.25, 1e-12);
}

TEST(SolveEntropyOd, MatchesBalancingAndCertifies) {
  std::mt19937_64 rng(8);
  for (int seed = 0; seed < 10; ++seed) {
    const int n = seed < 5 ? 3 : 5;
    const auto p = random_problem(rng, n, 0.5 + 0.1 * seed);
    OdOptions o;
    o.eps = 1e-9;
    o.eps_residual = 1e-8;
    const auto s = solve_entropy_od(p, o);
    const auto ref = balancing_oracle(p);
    ASSERT_TRUE(ref.converged);
    ASSERT_TRUE(s.certified) << "seed " << seed;
    EXPECT_LE((s.d - ref.d).cwiseAbs().maxCoeff(), 1e-6) << "seed " << seed;
    EXPECT_LE(s.residual, o.eps_residual);
    EXPECT_GT(s.d.minCoeff(), 0.0);
    // Weak duality: the certificate bounds the primal suboptimality.
    EXPECT_GE(s.gap, p.primal(s.d) - p.primal(ref.d) - 1e-12);
  }
}

TEST(SolveEntropyOd, ScalingCostAndGammaTogetherKeepsTheSolution) {
  std::mt19937_64 rng(4);
  const auto p = random_problem(rng, 4, 0.9);
  auto q = p;
  q.T *= 8.0;
  q.gamma *= 8.0;
  OdOptions o;
  o.eps = 1e-9;
  const auto a = solve_entropy_od(p, o);
  o.eps *= 8.0;  // the gap scales with gamma
  const auto b = solve_entropy_od(q, o);
  EXPECT_LE((a.d - b.d).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(SolveEntropyOd, RejectsBadInput) {
  ElpProblem p;
  p.L = Vector::Constant(2, 1.0);
  p.W = Vector::Constant(2, 1.5);
  p.T = Matrix::Zero(2, 2);
  EXPECT_THROW(solve_entropy_od(p), DomainError);
  p.W = Vector::Constant(2, 1.0);
  p.gamma = 0.0;
  EXPECT_THROW(solve_entropy_od(p), DomainError);
  p.gamma = 1.0;
  p.T = Matrix::Zero(3, 2);
  EXPECT_THROW(solve_entropy_od(p), DomainError);
}

TEST(BalancingOracle, Limits) {
  std::mt19937_64 rng(6);
  auto p = random_problem(rng, 4, 1.0);
  auto flat = p;
  flat.T.setZero();
  const Matrix indep = p.L * p.W.transpose() / p.mass();
  EXPECT_LE((balancing_oracle(flat).d - indep).cwiseAbs().maxCoeff(), 1e-12);
  double last = std::numeric_limits<double>::infinity();
  for (double g : {1.0, 10.0, 100.0, 1000.0}) {
    p.gamma = g;
    const double dist = (balancing_oracle(p).d - indep).cwiseAbs().maxCoeff();
    EXPECT_LT(dist, last);
    last = dist;
  }
  EXPECT_LT(last, 1e-2);
  const auto capped = balancing_oracle(p, 0.0, 3);
  EXPECT_FALSE(capped.converged);
  EXPECT_EQ(capped.iterations, 3);
}

TEST(EntropyRegression, ConstructedUniformOptimum) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  const int n = 5;
  Matrix A(4, n);
  for (Eigen::Index k = 0; k < A.size(); ++k) A.data()[k] = nd(rng);
  const Vector b = A * Vector::Constant(n, 1.0 / n);
  const double eps = 1e-4, mu = eps / (20.0 * std::log(n));
  const auto r = entropy_regression_simplex(A, b, mu, eps);
  EXPECT_EQ(r.report.termination, Termination::converged);
  // The entropy term is minimised at uniform too, so uniform is optimal.
  const double F_star = mu * std::log(1.0 / n);
  EXPECT_LE(r.value - F_star, eps);
  EXPECT_NEAR(r.x.sum(), 1.0, 1e-12);
}

TEST(EntropyRegression, GridOracleAndIterationBound) {
  Matrix A(2, 3);
  A << 1.0, 0.2, -0.5, 0.3, 1.5, 0.4;
  Vector b(2);
  b << 0.6, -0.2;
  const double eps = 1e-3, mu = 1e-5;
  const auto F = [&](const Vector& x) {
    double h = 0.0;
    for (Eigen::Index k = 0; k < 3; ++k)
      if (x[k] > 0.0) h += x[k] * std::log(x[k]);
    return 0.5 * (A * x - b).squaredNorm() + mu * h;
  };
  const auto r = entropy_regression_simplex(A, b, mu, eps);
  EXPECT_EQ(r.report.termination, Termination::converged);
  // Grid at step 1e-3 can overshoot the true minimum by a grid-scale
  // amount; the certificate is against the true minimum.
  EXPECT_LE(F(r.x) - grid_min(F, 1e-3), eps);
  double col = 0.0;
  for (Eigen::Index k = 0; k < 3; ++k) col = std::max(col, A.col(k).squaredNorm());
  EXPECT_LE(r.report.iterations, 10.0 * std::sqrt(col * std::log(3.0) / eps));
}

TEST(EntropyRegression, LargeMuIsRejected) {
  const Matrix A = Matrix::Identity(3, 3);
  const Vector b = Vector::Zero(3);
  try {
    entropy_regression_simplex(A, b, 0.1, 1e-3);
    FAIL() << "expected an unsupported-regime error";
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("restart_umt"), std::string::npos);
  }
}
