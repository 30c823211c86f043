#include "mcl/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "mcl/aggregate.hpp"
#include "mcl/commands.hpp"
#include "mcl/config.hpp"
#include "mcl/engine.hpp"
#include "mcl/metrics.hpp"
#include "mcl/objective.hpp"
#include "mcl/orderstats.hpp"
#include "mcl/random.hpp"

namespace mcl {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  bool passed = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double time_limit;  // seconds, <= 0 for none
  std::function<Outcome(const AcceptanceOptions&)> check;
};

double uniform_in(RandomStream& s, double lo, double hi) { return lo + (hi - lo) * s.uniform(); }

RunOptions run_options(const AcceptanceOptions& o) {
  RunOptions r;
  r.threads = o.threads;
  if (o.corrupt_median) r.median = coordinate_mean;
  return r;
}

AlgoConfig scalar_algo(AggregationRule rule, double delta, std::size_t T) {
  AlgoConfig a;
  a.aggregation = rule;
  a.step = {StepSchedule::Constant, delta};
  a.rounds = T;
  a.x0 = {0.0005};
  return a;
}

QuadraticEnsemble scalar_ensemble(std::initializer_list<double> a) {
  std::vector<Vector> centers;
  for (double v : a) centers.push_back({v});
  return QuadraticEnsemble(centers);
}

Outcome check_sign_identity(const AcceptanceOptions& o) {
  const MedianKernel kernel = o.corrupt_median ? coordinate_mean : coordinate_median;
  RandomStream s(2024, StreamDomain::Test, 1);
  std::size_t exceptions = 0, compared = 0;
  for (int trial = 0; trial < 100000; ++trial) {
    const std::size_t M = 3 + 2 * static_cast<std::size_t>(s.below(7));
    const std::size_t d = 1 + static_cast<std::size_t>(s.below(8));
    std::vector<Vector> g(M, Vector(d));
    std::vector<SignBits> bits;
    for (Vector& v : g) {
      for (double& x : v) x = base_sample(NoiseFamily::Gaussian, s);
      bits.emplace_back(v);
    }
    const Vector vote = majority_vote_sign(g);
    const Vector packed = majority_vote(bits);
    const Vector med = kernel(g);
    for (std::size_t j = 0; j < d; ++j) {
      if (med[j] == 0.0) continue;
      ++compared;
      if (vote[j] != sign_of(med[j]) || packed[j] != vote[j]) ++exceptions;
    }
  }
  return {exceptions == 0, fmt::format("{} exceptions over {} coordinates", exceptions, compared)};
}

Outcome check_fixed_point(const AcceptanceOptions& o) {
  const QuadraticEnsemble q = scalar_ensemble({0, 1, 5});
  const RunTrace sign = run(q, scalar_algo(AggregationRule::SignMajorityVote, 1e-3, 100000), run_options(o));
  const RunTrace med = run(q, scalar_algo(AggregationRule::Median, 0.1, 100000), run_options(o));
  const bool ok_sign = std::abs(sign.final_grad_l1 - 1.0) <= 2e-3;
  const bool ok_med = std::abs(med.final_grad_l2sq - 1.0) <= 1e-6;
  return {ok_sign && ok_med, fmt::format("signSGD ||grad||_1 = {:.6f}; medianSGD ||grad||^2 = {:.9f}",
                                         sign.final_grad_l1, med.final_grad_l2sq)};
}

Outcome check_stall(const AcceptanceOptions& o) {
  const QuadraticEnsemble q = scalar_ensemble({1, 2, 10});
  const double delta = 1e-3;
  const RunTrace med = run(q, scalar_algo(AggregationRule::Median, delta, 100000), run_options(o));
  const RunTrace sign = run(q, scalar_algo(AggregationRule::SignMajorityVote, delta, 100000), run_options(o));

  const double mean_med = std::sqrt(med.final_grad_l2sq);
  const bool ok_med = med.final_median_l1 <= 1e-6 && std::abs(mean_med - 7.0 / 3.0) <= 1e-3;

  double tail_max = 0.0;
  const std::size_t tail = 1000;
  for (std::size_t k = sign.rounds.size() - tail; k < sign.rounds.size(); ++k) {
    tail_max = std::max(tail_max, sign.rounds[k].median_l1);
  }
  tail_max = std::max(tail_max, sign.final_median_l1);
  const double mean_sign = std::sqrt(sign.final_grad_l2sq);
  const bool ok_sign = tail_max <= 2 * delta && std::abs(mean_sign - 7.0 / 3.0) <= 2e-3;
  return {ok_med && ok_sign,
          fmt::format("median: |med| = {:.3g}, |mean| = {:.6f}; sign: tail |med| <= {:.3g}, |mean| = {:.6f}",
                      med.final_median_l1, mean_med, tail_max, mean_sign)};
}

RateFit law_slope(const Vector& u, const Vector& bs, double MedianLawSummary::*field) {
  Vector ys;
  for (double b : bs) {
    const MedianLawSummary s = expected_median({u, {NoiseFamily::Gaussian, b}});
    ys.push_back(std::abs(s.*field));
  }
  return rate_fit(bs, ys);
}

const Vector kGapGrid = {4, 8, 16, 32, 64, 128};

Outcome check_gap_rate(const AcceptanceOptions&) {
  const RateFit f = law_slope({0, 1, 5}, kGapGrid, &MedianLawSummary::gap);
  const bool ok = f.slope >= -1.15 && f.slope <= -0.85 && f.r_squared >= 0.98;
  return {ok, fmt::format("slope {:.4f} (want [-1.15, -0.85]), R^2 {:.6f}", f.slope, f.r_squared)};
}

Outcome check_variance_rate(const AcceptanceOptions&) {
  const RateFit f = law_slope({0, 1, 5}, kGapGrid, &MedianLawSummary::variance);
  const bool ok = f.slope >= 1.9 && f.slope <= 2.1;
  return {ok, fmt::format("slope {:.4f} (want [1.9, 2.1]), R^2 {:.6f}", f.slope, f.r_squared)};
}

Outcome check_asym_rate(const AcceptanceOptions&) {
  const RateFit f = law_slope({0, 0, 1}, {8, 16, 32, 64}, &MedianLawSummary::asym_mass);
  const bool ok = f.slope >= -2.4 && f.slope <= -1.6;
  return {ok, fmt::format("slope {:.4f} (want [-2.4, -1.6]), R^2 {:.6f}", f.slope, f.r_squared)};
}

Outcome check_cross_validation(const AcceptanceOptions& o) {
  RandomStream s(7, StreamDomain::Test, 7);
  const NoiseFamily families[] = {NoiseFamily::Gaussian, NoiseFamily::Laplace, NoiseFamily::Uniform};
  int failures = 0;
  double worst = 0.0;
  double worst_mass = 0.0;
  for (int k = 0; k < 20; ++k) {
    const std::size_t M = 3 + 2 * static_cast<std::size_t>(s.below(3));
    MedianLawQuery q;
    q.u.resize(M);
    for (double& v : q.u) v = uniform_in(s, -5.0, 5.0);
    q.noise = {families[k % 3], uniform_in(s, 1.0, 32.0)};
    const MedianLawSummary exact = expected_median(q);
    const MedianLawSummary mc = mc_median_summary(q, 1000000, 100 + k, o.threads);
    const double z_mean = std::abs(mc.expected_median - exact.expected_median) / mc.error_estimate;
    const double z_var = std::abs(mc.variance - exact.variance) / mc.variance_error;
    worst = std::max({worst, z_mean, z_var});
    if (z_mean > 3.0 || z_var > 3.0) ++failures;
    if (q.noise.family == NoiseFamily::Gaussian) {
      worst_mass = std::max(worst_mass, std::abs(median_pdf_mass(q) - 1.0));
    }
  }
  const bool ok = failures == 0 && worst_mass <= 1e-8;
  return {ok, fmt::format("{} of 20 queries outside 3 SE (worst {:.2f} SE); |pdf mass - 1| <= {:.2g}",
                          failures, worst, worst_mass)};
}

Outcome check_noisy_ordering(const AcceptanceOptions& o) {
  const QuadraticEnsemble q = scalar_ensemble({0, 1, 5});
  const double grid[] = {1, 4, 16};
  std::string detail;
  bool ok = true;
  for (AggregationRule rule : {AggregationRule::Median, AggregationRule::SignMajorityVote}) {
    double avg[3] = {0, 0, 0};
    for (int k = 0; k < 3; ++k) {
      for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        AlgoConfig a = scalar_algo(rule, 1e-3, 100000);
        a.noise = NoiseConfig{NoiseFamily::Gaussian, grid[k], false};
        a.seed = seed;
        avg[k] += convergence_measures(run(q, a, run_options(o)), seed).avg_grad_l2sq / 10.0;
      }
    }
    ok = ok && avg[0] > avg[1] && avg[1] > avg[2] && avg[0] > avg[2];
    detail += fmt::format("{}{}: b=1 {:.4g}, b=4 {:.4g}, b=16 {:.4g}", detail.empty() ? "" : "; ",
                          to_string(rule), avg[0], avg[1], avg[2]);
  }
  return {ok, detail};
}

Outcome check_sign_audit(const AcceptanceOptions& o) {
  RandomStream s(9, StreamDomain::Test, 9);
  int holds = 0;
  double worst_ratio = 0.0;
  for (int k = 0; k < 5; ++k) {
    std::vector<Vector> centers(5, Vector(4));
    for (Vector& c : centers) for (double& v : c) v = uniform_in(s, -5.0, 5.0);
    const QuadraticEnsemble q(centers);
    AlgoConfig a;
    a.aggregation = AggregationRule::SignMajorityVote;
    a.step = {StepSchedule::SignRate, 0.0};
    a.rounds = 10000;
    a.x0.resize(4);
    for (double& v : a.x0) v = uniform_in(s, -10.0, 10.0);
    const RunTrace trace = run(q, a, run_options(o));
    const BoundAudit audit = sign_bound_audit(trace, gap_report(q, trace), a.step.schedule);
    if (audit.holds) ++holds;
    worst_ratio = std::max(worst_ratio, audit.lhs / audit.rhs);
  }
  return {holds == 5, fmt::format("{}/5 instances within the bound (max lhs/rhs {:.3f})", holds, worst_ratio)};
}

Outcome check_bits(const AcceptanceOptions& o) {
  std::vector<Vector> centers = {{0, 1, 2, 3}, {1, 0, 2, 5}, {4, 4, 1, 0}, {2, 3, 3, 1}, {5, 1, 0, 2}};
  const QuadraticEnsemble q(centers);
  const std::uint64_t M = 5, d = 4, T = 1000;
  std::string detail;
  bool ok = true;
  std::uint64_t sign_bits = 0, median_bits = 0;
  for (AggregationRule rule : {AggregationRule::SignMajorityVote, AggregationRule::Median}) {
    AlgoConfig a;
    a.aggregation = rule;
    a.step = {StepSchedule::Constant, 1e-2};
    a.rounds = T;
    a.x0.assign(d, 0.0);
    a.noise = NoiseConfig{NoiseFamily::Laplace, 2.0, false};
    const BitTotals bits = account_bits(run(q, a, run_options(o)));
    const std::uint64_t want = (is_sign_rule(rule) ? 1 : 64) * M * d * T;
    ok = ok && bits.uplink == want;
    (is_sign_rule(rule) ? sign_bits : median_bits) = bits.uplink;
  }
  ok = ok && sign_bits * 64 == median_bits;
  return {ok, fmt::format("sign uplink {} (want {}), median uplink {} (want {}), ratio {}", sign_bits,
                          M * d * T, median_bits, 64 * M * d * T,
                          sign_bits ? static_cast<double>(median_bits) / sign_bits : 0.0)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome check_determinism(const AcceptanceOptions&) {
  const fs::path tmp = fs::temp_directory_path() /
                       fmt::format("mcl-determinism-{}", std::chrono::steady_clock::now().time_since_epoch().count());
  ExperimentConfig c;
  c.study = StudyKind::Single;
  c.output_dir = tmp.string();
  ProblemSpec p;
  p.family = ProblemFamily::Logistic;
  c.problem = p;
  AlgoConfig a;
  a.aggregation = AggregationRule::Median;
  a.gradient = {GradientMode::MiniBatch, 50};
  a.step = {StepSchedule::Constant, 0.05};
  a.rounds = 2000;
  a.x0.assign(p.logistic.dim, 0.0);
  a.noise = NoiseConfig{NoiseFamily::Gaussian, 0.5, false};
  a.seed = 11;
  c.algo = a;
  c.seeds = {11};

  const fs::path one = execute_single(c, 1).front();
  const fs::path eight = execute_single(c, 8).front();
  const std::string x = slurp(one / "trace.csv");
  const std::string y = slurp(eight / "trace.csv");
  std::error_code ec;
  fs::remove_all(tmp, ec);
  const bool ok = !x.empty() && x == y;
  return {ok, fmt::format("trace.csv {} bytes with 1 thread, {} with 8; {}", x.size(), y.size(),
                          x == y ? "identical" : "different")};
}

Outcome check_logistic_gradient(const AcceptanceOptions&) {
  LogisticGenerator g;
  g.l2 = 0.01;
  const LogisticEnsemble problem = generate_logistic(g);
  RandomStream s(12, StreamDomain::Test, 12);
  const double eps = 1e-5;
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    Vector x(problem.dim());
    for (double& v : x) v = uniform_in(s, -2.0, 2.0);
    const std::size_t i = static_cast<std::size_t>(s.below(problem.num_workers()));
    const Vector grad = problem.grad_local(i, x);
    Vector fd(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
      Vector hi = x, lo = x;
      hi[j] += eps;
      lo[j] -= eps;
      fd[j] = (problem.local_value(i, hi) - problem.local_value(i, lo)) / (2 * eps);
    }
    Vector diff(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) diff[j] = grad[j] - fd[j];
    worst = std::max(worst, std::sqrt(norm_l2sq(diff) / norm_l2sq(grad)));
  }
  return {worst <= 1e-5, fmt::format("max relative error {:.3g} over 100 points", worst)};
}

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all = {
      {1, "sign-vote identity", 10, check_sign_identity},
      {2, "heterogeneous fixed point", 5, check_fixed_point},
      {3, "median/sign stall (1,2,10)", 5, check_stall},
      {4, "gap rate in b", 60, check_gap_rate},
      {5, "variance rate in b", 60, check_variance_rate},
      {6, "asymmetric mass rate in b", 60, check_asym_rate},
      {7, "median law cross-validation", 0, check_cross_validation},
      {8, "noise improves stationarity", 120, check_noisy_ordering},
      {9, "sign l1 bound audit", 0, check_sign_audit},
      {10, "communication accounting", 0, check_bits},
      {11, "thread-count determinism", 0, check_determinism},
      {12, "logistic gradient oracle", 0, check_logistic_gradient},
  };
  return all;
}

}  // namespace

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options) {
  for (int id : options.only) {
    if (id < 1 || id > kCriterionCount) {
      throw std::invalid_argument(fmt::format("no acceptance criterion {}", id));
    }
  }
  std::vector<CriterionResult> results;
  for (const Criterion& c : criteria()) {
    if (!options.only.empty() &&
        std::find(options.only.begin(), options.only.end(), c.id) == options.only.end()) {
      continue;
    }
    CriterionResult r;
    r.id = c.id;
    r.name = c.name;
    const auto start = std::chrono::steady_clock::now();
    try {
      const Outcome out = c.check(options);
      r.passed = out.passed;
      r.detail = out.detail;
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = std::string("error: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.time_limit > 0 && r.seconds >= c.time_limit) {
      r.passed = false;
      r.detail += fmt::format(" (over the {:g} s budget)", c.time_limit);
    }
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace mcl
