#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mcl/engine.hpp"
#include "mcl/noise.hpp"
#include "mcl/objective.hpp"

namespace mcl {

enum class GapMethod { ClosedForm, Quadrature, MonteCarlo };
std::string_view to_string(GapMethod method);

struct ExpectedMedianGradient {
  Vector value;     // E[median({g_i}) | x]
  Vector variance;  // per-coordinate Var(median | x)
  Vector std_error; // zero unless Monte Carlo
  GapMethod method = GapMethod::ClosedForm;
};

struct MonteCarloOptions {
  std::size_t samples = 200000;
  std::uint64_t seed = 1;
};

/// Noiseless: the coordinate median of the exact local gradients. With
/// noise: per coordinate, the expected median of {grad f_i(x)_j + b xi_i}
/// by quadrature, or Monte Carlo when M exceeds the exact cap.
ExpectedMedianGradient expected_median_gradient(const Objective& problem,
                                                std::span<const double> x,
                                                const std::optional<NoiseSpec>& noise,
                                                const MonteCarloOptions& mc = {});

/// {j : |grad_j| / (b * sigma_median) >= 2 / sqrt(3)}.
std::vector<std::size_t> w_set(std::span<const double> grad, double b, double sigma_median);

/// sum_{j in W} weight |grad_j| + sum_{j not in W} grad_j^2.
double mixed_measure(std::span<const double> grad, std::span<const std::size_t> w, double weight);

struct GapRow {
  std::size_t t = 0;
  double gap_l1 = 0.0;
  double gap_l2sq = 0.0;
  double sigma_m = 0.0;  // max_j std(median_j | x_t)
  double max_abs_gap = 0.0;
  double expected_median_l2 = 0.0;
  int w_count = -1;
};

struct GapReport {
  std::vector<GapRow> rows;  // one per stored snapshot x_t, t <= T
  double sigma_m = 0.0;      // max over rows
  double c_bound = 0.0;      // max per-coordinate |gap| over rows
  GapMethod method = GapMethod::ClosedForm;
};

/// Evaluates the median-mean gap at every stored iterate snapshot.
/// Mini-batch runs are evaluated for exact gradients plus the run's noise.
GapReport gap_report(const Objective& problem, const RunTrace& trace,
                     const MonteCarloOptions& mc = {});

struct ConvergenceMeasures {
  double avg_grad_l1 = 0.0;
  double avg_grad_l2sq = 0.0;
  double avg_mixed = 0.0;  // NaN when the run carried no noise
  bool mixed_available = false;
  std::size_t random_round = 0;  // R uniform on [1, T]
  double grad_l2sq_at_random_round = 0.0;
  std::uint64_t round_seed = 0;
};

ConvergenceMeasures convergence_measures(const RunTrace& trace, std::uint64_t round_seed);

struct BoundAudit {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
  bool schedule_matches = false;  // the run used the step size the bound assumes
  std::vector<std::pair<std::string, double>> terms;
};

/// (1/T) sum ||grad f(x_t)||_1 <= 3/2 sqrt(d L D_f / T) + 2 avg gap_l1 + 2 d sigma_m.
/// Uses the trace's per-round gap when available, else the report's rows.
BoundAudit sign_bound_audit(const RunTrace& trace, const GapReport& gaps, StepSchedule schedule);

/// (1/T) sum ||grad f||^2 <= 2 sqrt(d/T) D_f + 3 L sqrt(d/T) (sigma_m^2 + C^2)
///   + 2 avg ||gap||^2 + 2 avg ||E median|| ||gap||.
BoundAudit median_bound_audit(const RunTrace& trace, const GapReport& gaps, StepSchedule schedule);

}  // namespace mcl
