#include <gtest/gtest.h>

#include <cmath>

#include "fwmap/proximal_driver.hpp"
#include "test_util.hpp"

namespace fwmap {
namespace {

TEST(DefaultProxWeight, Formula) {
  EXPECT_DOUBLE_EQ(default_prox_weight(78), 150.0);
  EXPECT_NEAR(default_prox_weight(278), 16.666666666666668, 1e-12);
  EXPECT_DOUBLE_EQ(default_prox_weight(3978), 0.09375);
}

TEST(ComputeGap, ConvergedSingleTerm) {
  const auto d = testing::single_bit_problem(0.0, -3.0);
  PrimalIterate y{{{1.0}}, {-3.0}, {1.0}};
  const auto g = compute_gap(d, y, MultiplierVector::zeros(d), -3.0);
  EXPECT_DOUBLE_EQ(g.a, 0.0);
  EXPECT_DOUBLE_EQ(g.b, 0.0);
}

TEST(ComputeGap, ArgminVerticesGiveZeroA) {
  testing::Rng rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const auto d = encode_mrf(testing::random_cyclic_mrf(rng, 16));
    const auto lambda = testing::random_lambda(rng, d);
    const auto h = eval_dual(d, lambda);
    PrimalIterate y;
    for (std::size_t t = 0; t < d.num_terms(); ++t) {
      y.star.emplace_back(d.term(t).arity());
      d.term(t).oracle->decode(h.argmins[t].labeling, y.star.back());
      y.circ.push_back(h.argmins[t].cost);
    }
    EXPECT_NEAR(compute_gap(d, y, lambda, h.value).a, 0.0, 1e-9);
  }
}

TEST(ComputeGap, AgreeingCopiesContributeNothingToB) {
  std::vector<Term> terms;
  terms.push_back(Term{{0}, std::make_shared<testing::BitOracle>(0, 1)});
  terms.push_back(Term{{0}, std::make_shared<testing::BitOracle>(0, 2)});
  const auto d = build_decomposition(1, std::move(terms));
  PrimalIterate agree{{{0.3}, {0.3}}, {0, 0}, {}};
  EXPECT_DOUBLE_EQ(compute_gap(d, agree, MultiplierVector::zeros(d), 0).b, 0.0);
  PrimalIterate apart{{{1.0}, {0.25}}, {0, 0}, {}};
  EXPECT_DOUBLE_EQ(compute_gap(d, apart, MultiplierVector::zeros(d), 0).b, 0.75);
}

TEST(Solve, SingleTermToyStopsOnGapAtFirstEvaluation) {
  const auto d = testing::single_bit_problem(0.0, -3.0);
  SolveOptions o;
  o.gap_stop = true;
  o.clock = ClockMode::work;
  const auto r = solve(d, o);
  EXPECT_EQ(r.reason, StopReason::gap);
  EXPECT_DOUBLE_EQ(r.h_best, -3.0);
  EXPECT_DOUBLE_EQ(r.final_gap.a, 0.0);
  EXPECT_DOUBLE_EQ(r.final_gap.b, 0.0);
}

TEST(Solve, TreeMrfMatchesBruteForce) {
  testing::Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const auto mrf = testing::random_tree_mrf(rng, 6, 3);
    const auto d = encode_mrf(mrf);
    ASSERT_EQ(d.num_terms(), 1u);
    SolveOptions o;
    o.max_iterations = 10;
    o.clock = ClockMode::work;
    EXPECT_NEAR(solve(d, o).h_best, testing::brute_force_map(mrf), 1e-6);
  }
}

TEST(Solve, TinyBudgetReturnsInitialBound) {
  testing::Rng rng(14);
  const auto d = encode_mrf(testing::random_cyclic_mrf(rng, 16));
  SolveOptions o;
  o.budget_s = 1e-12;
  o.clock = ClockMode::work;
  const auto r = solve(d, o);
  EXPECT_EQ(r.iterations, 0u);
  EXPECT_EQ(r.reason, StopReason::budget);
  EXPECT_DOUBLE_EQ(r.h_best, eval_dual(d, MultiplierVector::zeros(d)).value);

  const auto tree = testing::random_tree_mrf(rng, 6, 3);
  const auto dt = encode_mrf(tree);
  SolveOptions w;
  w.budget_s = 0.001;
  EXPECT_DOUBLE_EQ(solve(dt, w).h_best, eval_dual(dt, MultiplierVector::zeros(dt)).value);
}

TEST(Solve, BestBoundMonotoneAndBelowMap) {
  testing::Rng rng(15);
  for (int trial = 0; trial < 10; ++trial) {
    const auto mrf = testing::random_cyclic_mrf(rng, 16);
    const auto d = encode_mrf(mrf);
    SolveOptions o;
    o.max_iterations = 60;
    o.clock = ClockMode::work;
    o.prox_weight = 1.0;
    const auto r = solve(d, o);
    const double opt = testing::brute_force_map(mrf);
    for (std::size_t k = 1; k < r.trace.size(); ++k) EXPECT_GE(r.trace[k].h_best, r.trace[k - 1].h_best);
    for (const auto& rec : r.trace) EXPECT_LE(rec.h_current, opt + 1e-9);
    EXPECT_LE(r.h_best, opt + 1e-9);
  }
}

TEST(Solve, PostHocGapBound) {
  testing::Rng rng(16);
  for (int trial = 0; trial < 10; ++trial) {
    const auto d = encode_mrf(testing::random_cyclic_mrf(rng, 16));
    SolveOptions o;
    o.max_iterations = 60;
    o.clock = ClockMode::work;
    o.prox_weight = 1.0;
    o.keep_history = true;
    const auto r = solve(d, o);
    for (const auto& e : r.history) {
      EXPECT_GE(e.gap.a, -1e-9);
      EXPECT_GE(e.gap.b, 0.0);
      MultiplierVector delta = r.lambda_best;
      for (std::size_t t = 0; t < d.num_terms(); ++t)
        for (std::size_t k = 0; k < delta[t].size(); ++k) delta[t][k] -= e.lambda[t][k];
      const double bound = e.gap.a + e.gap.b * norm_1_inf(d, delta);
      EXPECT_LE(r.h_best - e.h, bound + 1e-6);
    }
  }
}

TEST(ProximalConsistency, ObjectiveReconstruction) {
  testing::Rng rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const auto d = encode_mrf(testing::random_cyclic_mrf(rng, 16));
    const auto mu = testing::random_lambda(rng, d), lambda = testing::random_lambda(rng, d);
    const double c = testing::uniform(rng, 0.1, 10);
    const double direct = eval_dual(d, lambda).value - squared_distance(lambda, mu) / (2 * c);
    EXPECT_NEAR(eval_prox_objective(d, lambda, mu, c), direct, 1e-10);
  }
}

TEST(Solve, InitVertexMaxStillConverges) {
  const auto d = testing::single_bit_problem(0.0, -3.0);
  SolveOptions o;
  o.init = InitVertex::max;
  o.max_iterations = 10;
  o.clock = ClockMode::work;
  EXPECT_DOUBLE_EQ(solve(d, o).h_best, -3.0);
}

}  // namespace
}  // namespace fwmap
