#include <gtest/gtest.h>

#include <cmath>

#include "mcl/engine.hpp"
#include "mcl/metrics.hpp"
#include "mcl/orderstats.hpp"

using namespace mcl;

namespace {

QuadraticEnsemble scalar(std::initializer_list<double> a) {
  std::vector<Vector> c;
  for (double v : a) c.push_back({v});
  return QuadraticEnsemble(c);
}

AlgoConfig scalar_algo(AggregationRule rule, double delta, std::size_t T) {
  AlgoConfig a;
  a.aggregation = rule;
  a.step = {StepSchedule::Constant, delta};
  a.rounds = T;
  a.x0 = {0.0005};
  return a;
}

LogisticEnsemble small_logistic() {
  LogisticGenerator g;
  g.samples_per_worker = 60;
  return generate_logistic(g);
}

}  // namespace

TEST(Engine, MedianStallsAtTheMedianOfCenters) {
  const auto q = scalar({1, 2, 10});
  const RunTrace t = run(q, scalar_algo(AggregationRule::Median, 1e-3, 100000));
  EXPECT_NEAR(t.final_x[0], 2.0, 1e-6);
  EXPECT_NEAR(t.final_grad_l1, 7.0 / 3, 1e-3);
  EXPECT_LE(t.final_median_l1, 1e-6);
}

TEST(Engine, MedianSgdIsGradientDescentOnTheMedianCenter) {
  const auto q = scalar({1, 2, 10});
  const RunTrace t = run(q, scalar_algo(AggregationRule::Median, 0.01, 50));
  for (const RoundRecord& r : t.rounds) {
    const double x = 2.0 + (0.0005 - 2.0) * std::pow(0.99, static_cast<double>(r.t - 1));
    EXPECT_NEAR(r.median_l1, std::abs(x - 2.0), 1e-12);
    EXPECT_NEAR(r.grad_l1, std::abs(x - 13.0 / 3), 1e-12);
    EXPECT_NEAR(r.gap_l1, 7.0 / 3, 1e-12);
  }
}

TEST(Engine, SignSgdOscillatesAroundTheMedian) {
  const auto q = scalar({1, 2, 10});
  const RunTrace t = run(q, scalar_algo(AggregationRule::SignMajorityVote, 1e-3, 100000));
  EXPECT_NEAR(t.final_grad_l1, 7.0 / 3, 2e-3);
  for (std::size_t k = t.rounds.size() - 100; k < t.rounds.size(); ++k) {
    EXPECT_LE(t.rounds[k].median_l1, 2e-3);
    EXPECT_EQ(t.rounds[k].direction_l2, 1.0);
  }
}

TEST(Engine, HeterogeneousFixedPoint) {
  const auto q = scalar({0, 1, 5});
  EXPECT_NEAR(run(q, scalar_algo(AggregationRule::SignMajorityVote, 1e-3, 100000)).final_grad_l1, 1.0, 2e-3);
  EXPECT_NEAR(run(q, scalar_algo(AggregationRule::Median, 0.1, 100000)).final_grad_l2sq, 1.0, 1e-6);
  EXPECT_NEAR(run(q, scalar_algo(AggregationRule::Mean, 0.1, 1000)).final_grad_l2sq, 0.0, 1e-12);
}

TEST(Engine, SignRulesAgree) {
  const auto q = scalar({0, 1, 5});
  AlgoConfig a = scalar_algo(AggregationRule::SignMajorityVote, 1e-3, 2000);
  a.noise = NoiseConfig{NoiseFamily::Gaussian, 2.0, false};
  const RunTrace vote = run(q, a);
  a.aggregation = AggregationRule::SignOfMedian;
  const RunTrace med = run(q, a);
  EXPECT_EQ(vote.final_x, med.final_x);
}

// For f_i = (x - a_i)^2 / 2 the noisy median step is a linear recursion
// x_{t+1} = (1 - delta) x_t - delta Z_t with Z_t iid, so the expected
// time-averaged ||grad f||^2 follows from the mean and variance of Z alone.
TEST(Engine, NoisyMedianMatchesLinearRecursionOracle) {
  const auto q = scalar({0, 1, 5});
  const double delta = 1e-3, b = 4.0;
  const std::size_t T = 100000;
  const auto law = expected_median({{0, -1, -5}, {NoiseFamily::Gaussian, b}});
  const double G = law.gap, s2 = law.variance;

  double mean = 0.0005 - 2.0, var = 0.0, expected = 0.0;
  for (std::size_t t = 1; t <= T; ++t) {
    expected += (mean * mean + var) / T;
    mean = (1 - delta) * mean - delta * G;
    var = (1 - delta) * (1 - delta) * var + delta * delta * s2;
  }
  EXPECT_NEAR(G * G + delta * s2 / (2 - delta), 0.01946 + 0.003987, 2e-4);

  double measured = 0.0;
  const int seeds = 10;
  for (int seed = 1; seed <= seeds; ++seed) {
    AlgoConfig a = scalar_algo(AggregationRule::Median, delta, T);
    a.noise = NoiseConfig{NoiseFamily::Gaussian, b, false};
    a.seed = seed;
    measured += convergence_measures(run(q, a), seed).avg_grad_l2sq / seeds;
  }
  EXPECT_NEAR(measured, expected, 0.05 * expected);
}

TEST(Engine, ZeroNoiseSweepMatchesPlainRun) {
  const auto q = scalar({0, 1, 5});
  const AlgoConfig a = scalar_algo(AggregationRule::Median, 1e-2, 500);
  const RunTrace plain = run(q, a);
  const double grid[] = {0.0, 2.0};
  AlgoConfig noisy = a;
  noisy.noise = NoiseConfig{NoiseFamily::Uniform, 1.0, false};
  const auto sweep = run_noisy_sweep(q, noisy, grid);
  ASSERT_EQ(sweep.size(), 2u);
  EXPECT_FALSE(sweep[0].noise.has_value());
  EXPECT_EQ(sweep[0].final_x, plain.final_x);
  for (std::size_t k = 0; k < plain.rounds.size(); ++k) {
    ASSERT_EQ(sweep[0].rounds[k].x_hash, plain.rounds[k].x_hash);
  }
  ASSERT_TRUE(sweep[1].noise.has_value());
  EXPECT_EQ(sweep[1].noise->scale, 2.0);
  EXPECT_NE(sweep[1].final_x, plain.final_x);
}

TEST(Engine, BitAccounting) {
  const auto q = scalar({0, 1, 5, 6, 9});
  const BitTotals sign = account_bits(run(q, scalar_algo(AggregationRule::SignMajorityVote, 1e-3, 1000)));
  const BitTotals med = account_bits(run(q, scalar_algo(AggregationRule::Median, 1e-3, 1000)));
  EXPECT_EQ(sign.uplink, 5000u);
  EXPECT_EQ(med.uplink, 320000u);
  EXPECT_EQ(med.uplink / sign.uplink, 64u);
  EXPECT_EQ(sign.downlink, 1000u);
  EXPECT_EQ(med.downlink, 64000u);
}

TEST(Engine, MessageCosts) {
  GradientMessage full{0, 1, Vector(7, 0.5)};
  GradientMessage signs{0, 1, SignBits(Vector(7, -0.5))};
  EXPECT_EQ(full.bit_cost(), 448u);
  EXPECT_EQ(signs.bit_cost(), 7u);
  EXPECT_EQ(signs.dim(), 7u);
}

TEST(Engine, DeterministicAcrossThreadCounts) {
  const LogisticEnsemble p = small_logistic();
  AlgoConfig a;
  a.aggregation = AggregationRule::Median;
  a.gradient = {GradientMode::MiniBatch, 50};  // above the threading threshold
  a.step = {StepSchedule::Constant, 0.05};
  a.rounds = 300;
  a.x0.assign(p.dim(), 0.0);
  a.noise = NoiseConfig{NoiseFamily::Laplace, 0.3, false};
  a.seed = 5;
  const RunTrace one = run(p, a, {1});
  for (unsigned threads : {2u, 5u, 8u}) {
    const RunTrace many = run(p, a, {threads});
    ASSERT_EQ(many.final_x, one.final_x) << threads;
    for (std::size_t k = 0; k < one.rounds.size(); ++k) ASSERT_EQ(many.rounds[k].x_hash, one.rounds[k].x_hash);
  }
  a.seed = 6;
  EXPECT_NE(run(p, a).final_x, one.final_x);
}

TEST(Engine, Schedules) {
  const LogisticEnsemble p = small_logistic();
  AlgoConfig a;
  a.rounds = 10000;
  a.x0.assign(p.dim(), 0.0);
  const double T = 10000, d = static_cast<double>(p.dim());

  a.step = {StepSchedule::MedianRate, 0.0};
  const double t2 = resolve_schedule(p, a).delta;
  EXPECT_LE(t2, 1 / (3 * p.smoothness()));
  EXPECT_DOUBLE_EQ(t2, std::min(1 / std::sqrt(T * d), 1 / (3 * p.smoothness())));

  a.step = {StepSchedule::SignRate, 0.0};
  EXPECT_NEAR(resolve_schedule(p, a).delta,
              std::sqrt(p.initial_suboptimality(a.x0) / (p.smoothness() * d * T)), 1e-15);

  a.step = {StepSchedule::NoisyRate, 0.0};
  EXPECT_DOUBLE_EQ(resolve_schedule(p, a).delta, 1 / std::sqrt(T * d));
  a.step = {StepSchedule::NoisyRateAlt, 0.0};
  EXPECT_NEAR(resolve_schedule(p, a).delta, std::pow(T * d, -0.75), 1e-18);

  a.noise = NoiseConfig{NoiseFamily::Gaussian, 0.0, true};
  EXPECT_NEAR(resolve_schedule(p, a).noise_scale, std::pow(T * d, 0.25), 1e-12);
}

TEST(Engine, DivergenceRaisesNumericalError) {
  const auto q = scalar({0, 1, 5});
  try {
    run(q, scalar_algo(AggregationRule::Median, 3.0, 1000));
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_GT(e.round(), 10u);
    EXPECT_LT(e.round(), 100u);
  }
}

TEST(Engine, Validation) {
  const auto q3 = scalar({0, 1, 5});
  const QuadraticEnsemble q4({{0.0}, {1.0}, {2.0}, {3.0}});
  EXPECT_THROW(run(q4, scalar_algo(AggregationRule::SignMajorityVote, 1e-3, 10)), std::invalid_argument);
  AlgoConfig bad = scalar_algo(AggregationRule::Median, 1e-3, 0);
  EXPECT_THROW(validate(q3, bad), std::invalid_argument);
  bad = scalar_algo(AggregationRule::Median, 1e-3, 10);
  bad.x0 = {0.0, 1.0};
  EXPECT_THROW(validate(q3, bad), std::invalid_argument);
  bad = scalar_algo(AggregationRule::Median, -1.0, 10);
  EXPECT_THROW(validate(q3, bad), std::invalid_argument);
  bad = scalar_algo(AggregationRule::Median, 1e-3, 10);
  bad.gradient = {GradientMode::MiniBatch, 2};
  EXPECT_THROW(validate(q3, bad), std::invalid_argument);
  bad = scalar_algo(AggregationRule::Median, 1e-3, 10);
  bad.noise = NoiseConfig{NoiseFamily::Gaussian, -1.0, false};
  EXPECT_THROW(validate(q3, bad), std::invalid_argument);
  try {
    validate(q3, scalar_algo(AggregationRule::Median, 1e-3, 0));
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("algo.T"), std::string::npos);
  }
}

TEST(Engine, SnapshotsCoverTheRun) {
  const auto q = scalar({0, 1, 5});
  const RunTrace t = run(q, scalar_algo(AggregationRule::Median, 1e-3, 2500));
  ASSERT_FALSE(t.snapshots.empty());
  EXPECT_EQ(t.snapshots.front().t, 1u);
  EXPECT_EQ(t.snapshots.back().t, 2501u);
  EXPECT_EQ(t.snapshots.back().x, t.final_x);
  EXPECT_LE(t.snapshots.size(), 1002u);
  EXPECT_EQ(t.rounds.size(), 2500u);
  EXPECT_EQ(t.rounds.front().x_hash, hash_vector(Vector{0.0005}));
}
