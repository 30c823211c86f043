#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "mcl/objective.hpp"
#include "mcl/random.hpp"

using namespace mcl;

namespace {

Vector random_point(RandomStream& s, std::size_t d, double r) {
  Vector x(d);
  for (double& v : x) v = -r + 2 * r * s.uniform();
  return x;
}

double central_diff(const Objective& p, std::size_t i, Vector x, std::size_t j, double eps) {
  Vector hi = x, lo = x;
  hi[j] += eps;
  lo[j] -= eps;
  return (p.local_value(i, hi) - p.local_value(i, lo)) / (2 * eps);
}

}  // namespace

TEST(Quadratic, ClosedForms) {
  const QuadraticEnsemble q({{1.0, 0.0}, {2.0, 4.0}, {10.0, -1.0}});
  const Vector x = {0.5, 1.0};
  EXPECT_DOUBLE_EQ(q.local_value(2, x), 0.5 * (9.5 * 9.5 + 4.0));
  EXPECT_EQ(q.grad_local(1, x), (Vector{-1.5, -3.0}));
  const Vector g = q.grad_mean(x);
  EXPECT_NEAR(g[0], 0.5 - 13.0 / 3, 1e-15);
  EXPECT_NEAR(g[1], 1.0 - 1.0, 1e-15);
  EXPECT_EQ(q.center_median(), (Vector{2.0, 0.0}));
  // min f = (1/M) sum 0.5 ||a_i - a_bar||^2
  const double expect = (0.5 / 3) * ((1 - 13.0 / 3) * (1 - 13.0 / 3) + (2 - 13.0 / 3) * (2 - 13.0 / 3) +
                                     (10 - 13.0 / 3) * (10 - 13.0 / 3) + 1 + 9 + 4);
  EXPECT_NEAR(q.optimal_value(), expect, 1e-12);
  EXPECT_NEAR(q.initial_suboptimality(q.center_mean()), 0.0, 1e-12);
  EXPECT_EQ(q.smoothness(), 1.0);
}

TEST(Quadratic, Preconditions) {
  EXPECT_THROW(QuadraticEnsemble({}), std::invalid_argument);
  EXPECT_THROW(QuadraticEnsemble({{1.0}, {1.0, 2.0}}), std::invalid_argument);
  const QuadraticEnsemble q({{1.0}, {2.0}, {3.0}});
  EXPECT_THROW(q.grad_local(3, Vector{0.0}), std::out_of_range);
  EXPECT_THROW(q.grad_mean(Vector{0.0, 1.0}), std::invalid_argument);
  EXPECT_FALSE(q.supports_minibatch());
}

TEST(Logistic, GeneratorShape) {
  LogisticGenerator g;
  g.workers = 4;
  g.dim = 6;
  g.samples_per_worker = 30;
  const LogisticEnsemble p = generate_logistic(g);
  ASSERT_EQ(p.num_workers(), 4u);
  ASSERT_EQ(p.dim(), 6u);
  for (const auto& worker : p.data()) {
    ASSERT_EQ(worker.size(), 30u);
    std::set<double> labels;
    for (const LabeledSample& s : worker) {
      EXPECT_EQ(s.features.back(), 1.0);
      labels.insert(s.label);
    }
    EXPECT_EQ(labels, (std::set<double>{0.0, 1.0}));
  }
  // Same seed, same data.
  const LogisticEnsemble again = generate_logistic(g);
  EXPECT_EQ(again.data()[2][7].features, p.data()[2][7].features);
}

TEST(Logistic, WorkersAreHeterogeneous) {
  const LogisticEnsemble p = generate_logistic({});
  const Vector x(p.dim(), 0.1);
  EXPECT_NE(p.grad_local(0, x), p.grad_local(1, x));
}

TEST(Logistic, GradientMatchesFiniteDifferences) {
  LogisticGenerator g;
  g.l2 = 0.05;
  const LogisticEnsemble p = generate_logistic(g);
  RandomStream s(3, StreamDomain::Test);
  for (int k = 0; k < 20; ++k) {
    const Vector x = random_point(s, p.dim(), 3.0);
    for (std::size_t i = 0; i < p.num_workers(); ++i) {
      const Vector grad = p.grad_local(i, x);
      for (std::size_t j = 0; j < p.dim(); ++j) {
        EXPECT_NEAR(grad[j], central_diff(p, i, x, j, 1e-5), 1e-8);
      }
    }
  }
}

TEST(Logistic, NumericallyStableForLargeMargins) {
  const LogisticEnsemble p = generate_logistic({});
  const Vector x(p.dim(), 800.0);
  EXPECT_TRUE(std::isfinite(p.local_value(0, x)));
  for (double v : p.grad_local(0, x)) EXPECT_TRUE(std::isfinite(v));
}

TEST(Logistic, SmoothnessBoundsHessian) {
  const LogisticEnsemble p = generate_logistic({});
  RandomStream s(4, StreamDomain::Test);
  // ||grad f(x) - grad f(y)|| <= L ||x - y||
  for (int k = 0; k < 200; ++k) {
    const Vector x = random_point(s, p.dim(), 2.0), y = random_point(s, p.dim(), 2.0);
    const Vector gx = p.grad_mean(x), gy = p.grad_mean(y);
    double num = 0, den = 0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      num += (gx[j] - gy[j]) * (gx[j] - gy[j]);
      den += (x[j] - y[j]) * (x[j] - y[j]);
    }
    EXPECT_LE(std::sqrt(num), p.smoothness() * std::sqrt(den) + 1e-12);
  }
}

TEST(Logistic, OptimalValueIsALowerBound) {
  LogisticGenerator g;
  g.l2 = 0.01;
  const LogisticEnsemble p = generate_logistic(g);
  const double fmin = p.optimal_value();
  EXPECT_LT(fmin, p.value(Vector(p.dim(), 0.0)));
  RandomStream s(5, StreamDomain::Test);
  for (int k = 0; k < 200; ++k) {
    EXPECT_GE(p.value(random_point(s, p.dim(), 1.0)), fmin - 1e-9);
  }
}

TEST(Logistic, MinibatchIsUnbiased) {
  const LogisticEnsemble p = generate_logistic({});
  RandomStream s(6, StreamDomain::Test);
  const Vector x = random_point(s, p.dim(), 1.0);
  const Vector full = p.grad_local(2, x);
  const int n = 100000;
  Vector sum(p.dim(), 0.0), sumsq(p.dim(), 0.0);
  RandomStream mb(7, StreamDomain::MiniBatch);
  for (int k = 0; k < n; ++k) {
    const Vector g = p.grad_minibatch(2, x, 7, mb);
    for (std::size_t j = 0; j < g.size(); ++j) {
      sum[j] += g[j];
      sumsq[j] += g[j] * g[j];
    }
  }
  for (std::size_t j = 0; j < p.dim(); ++j) {
    const double mean = sum[j] / n;
    const double se = std::sqrt((sumsq[j] / n - mean * mean) / n);
    EXPECT_NEAR(mean, full[j], 4 * se + 1e-15) << j;
  }
}

TEST(Logistic, FullBatchEqualsExact) {
  const LogisticEnsemble p = generate_logistic({});
  RandomStream mb(8, StreamDomain::MiniBatch);
  const Vector x(p.dim(), 0.3);
  const Vector a = p.grad_minibatch(1, x, p.samples_per_worker(), mb);
  const Vector b = p.grad_local(1, x);
  for (std::size_t j = 0; j < a.size(); ++j) EXPECT_NEAR(a[j], b[j], 1e-14);
  EXPECT_THROW(p.grad_minibatch(1, x, 0, mb), std::invalid_argument);
  EXPECT_THROW(p.grad_minibatch(1, x, p.samples_per_worker() + 1, mb), std::invalid_argument);
}
