#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mcl/aggregate.hpp"
#include "mcl/noise.hpp"
#include "mcl/objective.hpp"
#include "mcl/types.hpp"

namespace mcl {

enum class GradientMode { Exact, MiniBatch };

struct GradientSource {
  GradientMode mode = GradientMode::Exact;
  std::size_t batch_size = 0;  // MiniBatch only

  bool operator==(const GradientSource&) const = default;
};

enum class StepSchedule {
  Constant,
  SignRate,      // sqrt(D_f / (L d T))
  MedianRate,    // min(1 / sqrt(T d), 1 / (3 L))
  NoisyRate,     // 1 / sqrt(T d)
  NoisyRateAlt,  // (T d)^(-3/4)
};

std::string_view to_string(StepSchedule schedule);
StepSchedule parse_step_schedule(std::string_view name);

struct StepSize {
  StepSchedule schedule = StepSchedule::Constant;
  double delta = 1e-3;  // Constant only

  bool operator==(const StepSize&) const = default;
};

struct NoiseConfig {
  NoiseFamily family = NoiseFamily::Gaussian;
  double scale = 0.0;
  /// b = (T d)^(1/4) instead of scale.
  bool coupled_schedule = false;

  bool operator==(const NoiseConfig&) const = default;
};

struct AlgoConfig {
  AggregationRule aggregation = AggregationRule::Median;
  std::optional<NoiseConfig> noise;
  GradientSource gradient;
  StepSize step;
  std::size_t rounds = 1;
  Vector x0;
  std::uint64_t seed = 1;

  bool operator==(const AlgoConfig&) const = default;
};

struct RunOptions {
  unsigned threads = 1;
  MedianKernel median = coordinate_median;
};

/// Step size and noise scale after applying the named schedules.
struct ResolvedSchedule {
  double delta = 0.0;
  double noise_scale = 0.0;
};

/// Throws std::invalid_argument naming the violated precondition.
void validate(const Objective& problem, const AlgoConfig& config);
ResolvedSchedule resolve_schedule(const Objective& problem, const AlgoConfig& config);

/// One worker-to-server payload.
struct GradientMessage {
  std::size_t worker = 0;
  std::size_t round = 0;
  std::variant<Vector, SignBits> payload;

  std::size_t dim() const;
  /// 64 bits per coordinate for full vectors, 1 per coordinate for signs.
  std::uint64_t bit_cost() const;
};

struct RoundRecord {
  std::size_t t = 0;
  std::uint64_t x_hash = 0;  // FNV-1a over the bytes of x_t
  double grad_l1 = 0.0;      // ||grad f(x_t)||_1
  double grad_l2sq = 0.0;
  double median_l1 = 0.0;    // ||median of the worker gradients||_1
  double median_l2 = 0.0;
  double gap_l1 = 0.0;       // ||E[median | x_t] - grad f(x_t)||_1; NaN unless noiseless exact
  double gap_l2sq = 0.0;
  double direction_l2 = 0.0;
  int w_count = -1;          // |W_t|, -1 when no noise
  double mixed_measure = 0.0;  // NaN when no noise
  std::uint64_t uplink_bits = 0;
  std::uint64_t downlink_bits = 0;
};

struct Snapshot {
  std::size_t t = 0;
  Vector x;
};

struct RunTrace {
  AggregationRule rule = AggregationRule::Median;
  std::size_t workers = 0;
  std::size_t dim = 0;
  double delta = 0.0;
  std::optional<NoiseSpec> noise;  // resolved, only when scale > 0
  double sigma_median = 0.0;       // std of the median of M base draws
  double smoothness = 0.0;
  double initial_suboptimality = 0.0;
  std::uint64_t seed = 0;

  std::vector<RoundRecord> rounds;
  std::vector<Snapshot> snapshots;  // every ceil(T / 1000) rounds plus x_{T+1}

  Vector final_x;
  double final_grad_l1 = 0.0;
  double final_grad_l2sq = 0.0;
  double final_median_l1 = 0.0;  // median of exact local gradients at final_x
  double min_grad_l1 = 0.0;
  double min_grad_l2sq = 0.0;
};

class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, std::size_t round)
      : std::runtime_error(what), round_(round) {}
  std::size_t round() const { return round_; }

 private:
  std::size_t round_;
};

inline constexpr double kDivergenceBound = 1e12;
/// Rounds with fewer gradient terms (M * d * samples per gradient) run on the
/// calling thread.
inline constexpr std::size_t kParallelWorkThreshold = 2048;

std::uint64_t hash_vector(std::span<const double> x);

/// Executes T synchronous rounds. Results are bit-identical for any thread
/// count: worker i in round t draws from streams keyed by (seed, i, t).
RunTrace run(const Objective& problem, const AlgoConfig& config, const RunOptions& options = {});

/// One run per noise scale with the base seed; b = 0 disables noise.
std::vector<RunTrace> run_noisy_sweep(const Objective& problem, const AlgoConfig& base,
                                      std::span<const double> b_grid,
                                      const RunOptions& options = {});

struct BitTotals {
  std::uint64_t uplink = 0;
  std::uint64_t downlink = 0;
};
BitTotals account_bits(const RunTrace& trace);

}  // namespace mcl
