#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "oracles.hpp"
#include "tapeq/cost_model.hpp"
#include "tapeq/network.hpp"

using namespace tapeq;

namespace {

const std::string kFixtures = TAPEQ_FIXTURE_DIR;

// sup_f { f t - sigma(f) } on a fine grid, sigma built by quadrature of tau.
double conjugate_by_search(const EdgeCostModel& m, double t, double f_max) {
  auto objective = [&](double f) {
    return -(f * t - oracle::simpson([&](double z) { return bpr_cost(m, z); }, 0.0, f, 400));
  };
  const double f = oracle::golden_min(objective, 0.0, f_max, 1e-10);
  return std::max(0.0, -objective(f));
}

}  // namespace

TEST(BprCost, Examples) {
  const auto unit = EdgeCostModel::bpr(1, 1, 1, 0.25);
  EXPECT_DOUBLE_EQ(bpr_cost(unit, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(bpr_cost(unit, 1.0), 2.0);
  const auto m = EdgeCostModel::bpr(2, 10, 0.15, 0.25);
  EXPECT_NEAR(bpr_cost(m, 10.0), 2.3, 1e-12);
  // Cross-check against the derivative of the quadrature-built integral.
  const double h = 1e-4;
  auto sigma = [&](double f) { return oracle::simpson([&](double z) { return bpr_cost(m, z); }, 0.0, f, 4000); };
  EXPECT_NEAR((sigma(10 + h) - sigma(10 - h)) / (2 * h), 2.3, 1e-6);
  EXPECT_THROW(bpr_cost(m, -1.0), DomainError);
}

TEST(BprConjugate, Examples) {
  const auto linear = EdgeCostModel::bpr(1, 1, 1, 1);
  EXPECT_EQ(bpr_conjugate(linear, 1.0).value, 0.0);
  EXPECT_EQ(bpr_conjugate(linear, 1.0).flow, 0.0);
  auto c = bpr_conjugate(linear, 2.0);
  EXPECT_NEAR(c.value, 0.5, 1e-14);
  EXPECT_NEAR(c.flow, 1.0, 1e-14);
  EXPECT_NEAR(conjugate_by_search(linear, 2.0, 10.0), 0.5, 1e-6);

  const auto quarter = EdgeCostModel::bpr(1, 1, 1, 0.25);
  c = bpr_conjugate(quarter, 2.0);
  EXPECT_NEAR(c.flow, 1.0, 1e-14);
  EXPECT_NEAR(c.value, conjugate_by_search(quarter, 2.0, 10.0), 1e-6);
  EXPECT_NEAR(c.value, 0.2, 1e-12);
  EXPECT_EQ(bpr_conjugate(quarter, 0.5).value, 0.0);
}

TEST(BprConjugate, MatchesNumericalSupremum) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = EdgeCostModel::bpr(0.5 + u(rng), 0.5 + 2 * u(rng), 0.1 + u(rng), 0.2 + 0.8 * u(rng));
    const double t = m.t_free * (1.0 + 0.5 * u(rng));
    const auto c = bpr_conjugate(m, t);
    EXPECT_NEAR(c.value, conjugate_by_search(m, t, 4.0 * c.flow + 1.0), 1e-6 * (1 + std::abs(c.value)));
    EXPECT_NEAR(bpr_cost(m, c.flow), t, 1e-8 * t);
  }
}

TEST(BprConjugate, ConvexAndMonotone) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto m = EdgeCostModel::bpr(1.0, 2.0, 0.15, 0.25);
  for (int trial = 0; trial < 200; ++trial) {
    const double a = 0.5 + 2 * u(rng), b = 0.5 + 2 * u(rng);
    const double mid = bpr_conjugate(m, 0.5 * (a + b)).value;
    EXPECT_LE(mid, 0.5 * (bpr_conjugate(m, a).value + bpr_conjugate(m, b).value) + 1e-12);
    const double f1 = 3 * u(rng), f2 = f1 + u(rng);
    EXPECT_LE(bpr_cost(m, f1), bpr_cost(m, f2));
  }
}

TEST(BprConjugate, ApproachesStableDynamicsAsCurveSteepens) {
  // The conjugate's flow approaches the capacity and its value approaches
  // capacity * (t - t_free) as the cost curve gets steeper.
  const double t = 1.5;
  const auto sd = *sd_conjugate(EdgeCostModel::sd(1.0, 2.0), t);
  double prev_err = std::numeric_limits<double>::infinity();
  for (double p : {4.0, 10.0, 50.0}) {
    const auto c = bpr_conjugate(EdgeCostModel::bpr(1.0, 2.0, 1.0, p), t);
    const double err = std::abs(c.value - sd.value) + std::abs(c.flow - sd.flow);
    EXPECT_LT(err, prev_err);
    prev_err = err;
  }
  EXPECT_LT(prev_err, 0.1);
}

TEST(SdConjugate, Examples) {
  const auto m = EdgeCostModel::sd(1, 2);
  auto c = sd_conjugate(m, 1.0);
  ASSERT_TRUE(c);
  EXPECT_EQ(c->value, 0.0);
  EXPECT_EQ(c->flow, 2.0);
  c = sd_conjugate(m, 3.0);
  ASSERT_TRUE(c);
  EXPECT_EQ(c->value, 4.0);
  EXPECT_EQ(c->flow, 2.0);
  EXPECT_FALSE(sd_conjugate(m, 0.5));
}

TEST(LoadNetwork, Fixtures) {
  const auto pigou = load_network(kFixtures + "/pigou.net");
  EXPECT_EQ(pigou.num_levels(), 1);
  EXPECT_EQ(pigou.level(0).edges.size(), 2u);
  const auto braess = load_network(kFixtures + "/braess_shortcut.net");
  EXPECT_EQ(braess.level(0).num_vertices, 4);
  EXPECT_EQ(braess.level(0).edges.size(), 5u);
  const auto two = load_network(kFixtures + "/two_stage.net");
  EXPECT_EQ(two.num_levels(), 2);
  EXPECT_EQ(two.num_times(), 6);
}

TEST(LoadNetwork, RejectsZeroCapacity) {
  EXPECT_THROW(load_network(kFixtures + "/capacity_zero.net"), ValidationError);
}

TEST(LoadNetwork, ParseErrorCarriesLine) {
  try {
    load_network(kFixtures + "/corrupt.net");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2);
  }
}

TEST(LoadNetwork, ValidationListsEveryProblem) {
  std::istringstream in(
      "1 0 0 bpr 1 1 0.15 0.25\n"
      "1 0 1 bpr 1 -1 0.15 0.25\n"
      "1 0 2 nested 0\n"
      "od 1 0 1 1\n");
  try {
    parse_network(in);
    FAIL() << "expected a validation error";
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.problems().size(), 3u);
  }
}

TEST(LoadNetwork, UnreachableOdRejected) {
  std::istringstream in(
      "hops 1 1\n"
      "1 0 1 bpr 1 1 0.15 0.25\n"
      "1 1 2 bpr 1 1 0.15 0.25\n"
      "od 1 0 2 1\n");
  EXPECT_THROW(parse_network(in), ValidationError);
}
