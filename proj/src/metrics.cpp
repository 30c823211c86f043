#include "mcl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "mcl/aggregate.hpp"
#include "mcl/orderstats.hpp"

namespace mcl {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
const double kWThreshold = 2.0 / std::sqrt(3.0);

double mean_over(const std::vector<RoundRecord>& rounds, double RoundRecord::*field) {
  double s = 0.0;
  for (const RoundRecord& r : rounds) s += r.*field;
  return s / static_cast<double>(rounds.size());
}

}  // namespace

std::string_view to_string(GapMethod method) {
  switch (method) {
    case GapMethod::ClosedForm: return "closed_form";
    case GapMethod::Quadrature: return "quadrature";
    case GapMethod::MonteCarlo: return "monte_carlo";
  }
  return "unknown";
}

ExpectedMedianGradient expected_median_gradient(const Objective& problem,
                                                std::span<const double> x,
                                                const std::optional<NoiseSpec>& noise,
                                                const MonteCarloOptions& mc) {
  require_dim(x, problem.dim(), "expected_median_gradient");
  const std::size_t M = problem.num_workers();
  const std::size_t d = problem.dim();
  std::vector<Vector> locals(M);
  for (std::size_t i = 0; i < M; ++i) locals[i] = problem.grad_local(i, x);

  ExpectedMedianGradient out;
  out.variance.assign(d, 0.0);
  out.std_error.assign(d, 0.0);
  if (!noise || noise->scale == 0.0) {
    out.value = coordinate_median(locals);
    out.method = GapMethod::ClosedForm;
    return out;
  }
  if (M % 2 == 0) throw std::invalid_argument("noisy median law needs an odd number of workers");

  out.value.resize(d);
  out.method = M <= kMaxExactCenters ? GapMethod::Quadrature : GapMethod::MonteCarlo;
  MedianLawQuery q{Vector(M), *noise};
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < M; ++i) q.u[i] = locals[i][j];
    const MedianLawSummary s = out.method == GapMethod::Quadrature
                                   ? expected_median(q)
                                   : mc_median_summary(q, mc.samples, mc.seed + j);
    out.value[j] = s.expected_median;
    out.variance[j] = s.variance;
    if (s.method == LawMethod::MonteCarlo) out.std_error[j] = s.error_estimate;
  }
  return out;
}

std::vector<std::size_t> w_set(std::span<const double> grad, double b, double sigma_median) {
  if (!(b > 0.0)) throw std::invalid_argument("w_set needs b > 0");
  std::vector<std::size_t> w;
  const double scale = b * sigma_median;
  for (std::size_t j = 0; j < grad.size(); ++j) {
    if (std::abs(grad[j]) / scale >= kWThreshold) w.push_back(j);
  }
  return w;
}

double mixed_measure(std::span<const double> grad, std::span<const std::size_t> w, double weight) {
  double total = 0.0;
  std::size_t next = 0;
  for (std::size_t j = 0; j < grad.size(); ++j) {
    if (next < w.size() && w[next] == j) {
      total += weight * std::abs(grad[j]);
      ++next;
    } else {
      total += grad[j] * grad[j];
    }
  }
  return total;
}

GapReport gap_report(const Objective& problem, const RunTrace& trace, const MonteCarloOptions& mc) {
  GapReport report;
  const std::size_t T = trace.rounds.size();
  for (const Snapshot& snap : trace.snapshots) {
    if (snap.t > T) continue;
    const ExpectedMedianGradient em = expected_median_gradient(problem, snap.x, trace.noise, mc);
    report.method = em.method;
    const Vector grad = problem.grad_mean(snap.x);
    GapRow row;
    row.t = snap.t;
    for (std::size_t j = 0; j < grad.size(); ++j) {
      const double diff = em.value[j] - grad[j];
      row.gap_l1 += std::abs(diff);
      row.gap_l2sq += diff * diff;
      row.max_abs_gap = std::max(row.max_abs_gap, std::abs(diff));
      row.sigma_m = std::max(row.sigma_m, std::sqrt(em.variance[j]));
    }
    row.expected_median_l2 = std::sqrt(norm_l2sq(em.value));
    if (trace.noise) {
      row.w_count = static_cast<int>(w_set(grad, trace.noise->scale, trace.sigma_median).size());
    }
    report.sigma_m = std::max(report.sigma_m, row.sigma_m);
    report.c_bound = std::max(report.c_bound, row.max_abs_gap);
    report.rows.push_back(row);
  }
  return report;
}

ConvergenceMeasures convergence_measures(const RunTrace& trace, std::uint64_t round_seed) {
  if (trace.rounds.empty()) throw std::invalid_argument("convergence_measures needs a non-empty trace");
  ConvergenceMeasures m;
  m.avg_grad_l1 = mean_over(trace.rounds, &RoundRecord::grad_l1);
  m.avg_grad_l2sq = mean_over(trace.rounds, &RoundRecord::grad_l2sq);
  m.mixed_available = trace.noise.has_value();
  m.avg_mixed = m.mixed_available ? mean_over(trace.rounds, &RoundRecord::mixed_measure) : kNaN;
  RandomStream stream(round_seed, StreamDomain::RoundSelection);
  const std::size_t idx = static_cast<std::size_t>(stream.below(trace.rounds.size()));
  m.random_round = trace.rounds[idx].t;
  m.grad_l2sq_at_random_round = trace.rounds[idx].grad_l2sq;
  m.round_seed = round_seed;
  return m;
}

BoundAudit sign_bound_audit(const RunTrace& trace, const GapReport& gaps, StepSchedule schedule) {
  if (trace.rounds.empty()) throw std::invalid_argument("sign_bound_audit needs a non-empty trace");
  const double T = static_cast<double>(trace.rounds.size());
  const double d = static_cast<double>(trace.dim);
  const double L = trace.smoothness;
  const double Df = trace.initial_suboptimality;

  double avg_gap = 0.0;
  if (!std::isnan(trace.rounds.front().gap_l1)) {
    avg_gap = mean_over(trace.rounds, &RoundRecord::gap_l1);
  } else if (!gaps.rows.empty()) {
    for (const GapRow& r : gaps.rows) avg_gap += r.gap_l1;
    avg_gap /= static_cast<double>(gaps.rows.size());
  }
  const double sigma_m = trace.noise ? gaps.sigma_m : 0.0;

  BoundAudit a;
  a.name = "sign_l1";
  a.lhs = mean_over(trace.rounds, &RoundRecord::grad_l1);
  const double descent = 1.5 * std::sqrt(d * L * Df / T);
  const double gap_term = 2.0 * avg_gap;
  const double variance_term = 2.0 * d * sigma_m;
  a.rhs = descent + gap_term + variance_term;
  a.holds = a.lhs <= a.rhs;
  a.schedule_matches = schedule == StepSchedule::SignRate && is_sign_rule(trace.rule);
  a.terms = {{"descent", descent}, {"gap", gap_term}, {"variance", variance_term},
             {"D_f", Df}, {"L", L}, {"sigma_m", sigma_m}, {"avg_gap_l1", avg_gap}};
  return a;
}

BoundAudit median_bound_audit(const RunTrace& trace, const GapReport& gaps, StepSchedule schedule) {
  if (trace.rounds.empty()) throw std::invalid_argument("median_bound_audit needs a non-empty trace");
  const double T = static_cast<double>(trace.rounds.size());
  const double d = static_cast<double>(trace.dim);
  const double L = trace.smoothness;
  const double Df = trace.initial_suboptimality;

  double avg_gap_sq = 0.0, avg_cross = 0.0, c_bound = gaps.c_bound;
  if (!std::isnan(trace.rounds.front().gap_l2sq)) {
    // Noiseless: E[median | x] is the median itself.
    for (const RoundRecord& r : trace.rounds) {
      avg_gap_sq += r.gap_l2sq;
      avg_cross += r.median_l2 * std::sqrt(r.gap_l2sq);
      c_bound = std::max(c_bound, std::sqrt(r.gap_l2sq));  // >= max per-coordinate gap
    }
    avg_gap_sq /= T;
    avg_cross /= T;
  } else if (!gaps.rows.empty()) {
    for (const GapRow& r : gaps.rows) {
      avg_gap_sq += r.gap_l2sq;
      avg_cross += r.expected_median_l2 * std::sqrt(r.gap_l2sq);
    }
    avg_gap_sq /= static_cast<double>(gaps.rows.size());
    avg_cross /= static_cast<double>(gaps.rows.size());
  }
  const double sigma_m = trace.noise ? gaps.sigma_m : 0.0;

  BoundAudit a;
  a.name = "median_l2sq";
  a.lhs = mean_over(trace.rounds, &RoundRecord::grad_l2sq);
  const double root = std::sqrt(d / T);
  const double descent = 2.0 * root * Df;
  const double variance_term = 3.0 * L * root * (sigma_m * sigma_m + c_bound * c_bound);
  const double gap_term = 2.0 * avg_gap_sq;
  const double cross_term = 2.0 * avg_cross;
  a.rhs = descent + variance_term + gap_term + cross_term;
  a.holds = a.lhs <= a.rhs;
  a.schedule_matches = schedule == StepSchedule::MedianRate && trace.rule == AggregationRule::Median;
  a.terms = {{"descent", descent}, {"variance", variance_term}, {"gap", gap_term},
             {"cross", cross_term}, {"D_f", Df}, {"L", L}, {"sigma_m", sigma_m}, {"C", c_bound}};
  return a;
}

}  // namespace mcl
