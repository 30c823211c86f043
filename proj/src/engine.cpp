#include "mcl/engine.hpp"

#include <algorithm>
#include <barrier>
#include <cmath>
#include <cstring>
#include <exception>
#include <functional>
#include <limits>
#include <thread>

#include "mcl/metrics.hpp"
#include "mcl/orderstats.hpp"

namespace mcl {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Persistent workers released once per round. Participant 0 is the calling
/// thread; a barrier separates the parallel gradient phase from the
/// single-threaded aggregation.
class RoundPool {
 public:
  RoundPool(unsigned participants, std::function<void(unsigned)> job)
      : job_(std::move(job)), start_(participants), done_(participants), errors_(participants) {
    for (unsigned p = 1; p < participants; ++p) {
      threads_.emplace_back([this, p] {
        for (;;) {
          start_.arrive_and_wait();
          if (stop_) return;
          execute(p);
          done_.arrive_and_wait();
        }
      });
    }
  }

  RoundPool(const RoundPool&) = delete;
  RoundPool& operator=(const RoundPool&) = delete;

  ~RoundPool() {
    stop_ = true;
    start_.arrive_and_wait();
  }

  void run_round() {
    start_.arrive_and_wait();
    execute(0);
    done_.arrive_and_wait();
    for (auto& e : errors_) {
      if (e) std::rethrow_exception(std::exchange(e, nullptr));
    }
  }

 private:
  void execute(unsigned p) {
    try {
      job_(p);
    } catch (...) {
      errors_[p] = std::current_exception();
    }
  }

  std::function<void(unsigned)> job_;
  std::barrier<> start_;
  std::barrier<> done_;
  std::vector<std::exception_ptr> errors_;
  bool stop_ = false;
  std::vector<std::jthread> threads_;
};

std::uint64_t downlink_bits(AggregationRule rule, std::size_t d) {
  return is_sign_rule(rule) ? d : 64 * d;
}

}  // namespace

std::string_view to_string(StepSchedule schedule) {
  switch (schedule) {
    case StepSchedule::Constant: return "constant";
    case StepSchedule::SignRate: return "sign_rate";
    case StepSchedule::MedianRate: return "median_rate";
    case StepSchedule::NoisyRate: return "noisy_rate";
    case StepSchedule::NoisyRateAlt: return "noisy_rate_alt";
  }
  return "unknown";
}

StepSchedule parse_step_schedule(std::string_view name) {
  if (name == "constant") return StepSchedule::Constant;
  if (name == "sign_rate") return StepSchedule::SignRate;
  if (name == "median_rate") return StepSchedule::MedianRate;
  if (name == "noisy_rate") return StepSchedule::NoisyRate;
  if (name == "noisy_rate_alt") return StepSchedule::NoisyRateAlt;
  throw std::invalid_argument(
      "unknown step schedule '" + std::string(name) +
      "' (expected constant, sign_rate, median_rate, noisy_rate or noisy_rate_alt)");
}

std::size_t GradientMessage::dim() const {
  return std::visit([](const auto& p) { return p.size(); }, payload);
}

std::uint64_t GradientMessage::bit_cost() const {
  if (std::holds_alternative<SignBits>(payload)) return dim();
  return 64 * dim();
}

std::uint64_t hash_vector(std::span<const double> x) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (double v : x) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof v);
    for (unsigned char c : bytes) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

void validate(const Objective& problem, const AlgoConfig& config) {
  if (config.rounds == 0) throw std::invalid_argument("algo.T must be at least 1");
  require_dim(config.x0, problem.dim(), "algo.x0");
  for (double v : config.x0) {
    if (!std::isfinite(v)) throw std::invalid_argument("algo.x0 must be finite");
  }
  if (is_sign_rule(config.aggregation) && problem.num_workers() % 2 == 0) {
    throw std::invalid_argument("algo.aggregation '" + std::string(to_string(config.aggregation)) +
                                "' requires an odd number of workers, got " +
                                std::to_string(problem.num_workers()));
  }
  if (config.gradient.mode == GradientMode::MiniBatch) {
    if (!problem.supports_minibatch()) {
      throw std::invalid_argument("algo.gradient_mode minibatch requires a logistic problem");
    }
    if (config.gradient.batch_size == 0 ||
        config.gradient.batch_size > problem.samples_per_worker()) {
      throw std::invalid_argument("algo.gradient_mode.batch_size must lie in [1, " +
                                  std::to_string(problem.samples_per_worker()) + "]");
    }
  }
  if (config.step.schedule == StepSchedule::Constant && !(config.step.delta > 0.0)) {
    throw std::invalid_argument("algo.step_size.delta must be positive");
  }
  if (config.noise) {
    if (!config.noise->coupled_schedule && !(config.noise->scale >= 0.0)) {
      throw std::invalid_argument("noise.b must be non-negative");
    }
    if (problem.num_workers() % 2 == 0) {
      throw std::invalid_argument("noise injection requires an odd number of workers");
    }
  }
  if (config.rounds > std::numeric_limits<std::uint32_t>::max()) {
    throw std::invalid_argument("algo.T exceeds the stream counter range");
  }
}

ResolvedSchedule resolve_schedule(const Objective& problem, const AlgoConfig& config) {
  const double T = static_cast<double>(config.rounds);
  const double d = static_cast<double>(problem.dim());
  const double L = problem.smoothness();
  ResolvedSchedule r;
  switch (config.step.schedule) {
    case StepSchedule::Constant: r.delta = config.step.delta; break;
    case StepSchedule::SignRate:
      r.delta = std::sqrt(problem.initial_suboptimality(config.x0) / (L * d * T));
      break;
    case StepSchedule::MedianRate: r.delta = std::min(1.0 / std::sqrt(T * d), 1.0 / (3.0 * L)); break;
    case StepSchedule::NoisyRate: r.delta = 1.0 / std::sqrt(T * d); break;
    case StepSchedule::NoisyRateAlt: r.delta = std::pow(T * d, -0.75); break;
  }
  if (!(r.delta > 0.0)) {
    throw std::invalid_argument("resolved step size is not positive (D_f = 0 at x0?)");
  }
  if (config.noise) {
    r.noise_scale = config.noise->coupled_schedule ? std::pow(T * d, 0.25) : config.noise->scale;
  }
  return r;
}

RunTrace run(const Objective& problem, const AlgoConfig& config, const RunOptions& options) {
  validate(problem, config);
  const ResolvedSchedule schedule = resolve_schedule(problem, config);
  const std::size_t M = problem.num_workers();
  const std::size_t d = problem.dim();
  const std::size_t T = config.rounds;
  const AggregationRule rule = config.aggregation;
  const bool minibatch = config.gradient.mode == GradientMode::MiniBatch;

  RunTrace trace;
  trace.rule = rule;
  trace.workers = M;
  trace.dim = d;
  trace.delta = schedule.delta;
  trace.seed = config.seed;
  trace.smoothness = problem.smoothness();
  trace.initial_suboptimality = problem.initial_suboptimality(config.x0);
  if (config.noise && schedule.noise_scale > 0.0) {
    trace.noise = NoiseSpec{config.noise->family, schedule.noise_scale};
    trace.sigma_median = base_median_std(config.noise->family, M);
  }
  const std::optional<NoiseSpec> noise = trace.noise;
  const bool track_gap = !noise && !minibatch;
  const double mixed_weight = std::pow(static_cast<double>(T) * static_cast<double>(d), 0.25);

  Vector x = config.x0;
  std::size_t t = 0;
  std::vector<Vector> raw(M, Vector(d));
  std::vector<Vector> received(M, Vector(d));
  std::vector<GradientMessage> inbox(M);

  auto worker_step = [&](std::size_t i) {
    Vector& g = raw[i];
    if (minibatch) {
      RandomStream s(config.seed, StreamDomain::MiniBatch, static_cast<std::uint32_t>(i),
                     static_cast<std::uint32_t>(t));
      problem.minibatch_gradient_into(i, x, config.gradient.batch_size, s, g);
    } else {
      problem.local_gradient_into(i, x, g);
    }
    if (noise) {
      RandomStream s(config.seed, StreamDomain::WorkerNoise, static_cast<std::uint32_t>(i),
                     static_cast<std::uint32_t>(t));
      perturb_in_place(g, *noise, s);
    }
    GradientMessage& msg = inbox[i];
    msg.worker = i;
    msg.round = t;
    if (rule == AggregationRule::SignMajorityVote) {
      msg.payload = SignBits(g);
    } else if (auto* v = std::get_if<Vector>(&msg.payload)) {
      v->assign(g.begin(), g.end());
    } else {
      msg.payload = g;
    }
  };

  // Barrier hand-offs cost more than tiny rounds; results do not depend on it.
  const std::size_t per_gradient = config.gradient.mode == GradientMode::MiniBatch
                                       ? config.gradient.batch_size
                                       : problem.samples_per_worker();
  const bool worth_threads = M * d * per_gradient >= kParallelWorkThreshold;
  const unsigned participants =
      worth_threads ? static_cast<unsigned>(std::clamp<std::size_t>(options.threads, 1, M)) : 1;
  std::optional<RoundPool> pool;
  if (participants > 1) {
    pool.emplace(participants, [&](unsigned p) {
      for (std::size_t i = p; i < M; i += participants) worker_step(i);
    });
  }

  const std::size_t stride = (T + 999) / 1000;
  trace.rounds.reserve(T);
  std::vector<SignBits> votes(M);
  Vector direction(d);

  for (t = 1; t <= T; ++t) {
    if (pool) {
      pool->run_round();
    } else {
      for (std::size_t i = 0; i < M; ++i) worker_step(i);
    }

    // Server.
    RoundRecord rec;
    rec.t = t;
    rec.x_hash = hash_vector(x);
    if (rule == AggregationRule::SignMajorityVote) {
      for (std::size_t i = 0; i < M; ++i) votes[i] = std::get<SignBits>(inbox[i].payload);
      direction = majority_vote(votes);
    } else {
      for (std::size_t i = 0; i < M; ++i) std::swap(received[i], std::get<Vector>(inbox[i].payload));
      direction = aggregate(rule, received, options.median);
    }
    for (const GradientMessage& msg : inbox) rec.uplink_bits += msg.bit_cost();
    rec.downlink_bits = downlink_bits(rule, d);

    // Instrumentation at x_t.
    const Vector grad = problem.grad_mean(x);
    const Vector med = options.median(raw);
    rec.grad_l1 = norm_l1(grad);
    rec.grad_l2sq = norm_l2sq(grad);
    rec.median_l1 = norm_l1(med);
    rec.median_l2 = std::sqrt(norm_l2sq(med));
    rec.direction_l2 = std::sqrt(norm_l2sq(direction));
    if (track_gap) {
      double l1 = 0.0, l2 = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = med[j] - grad[j];
        l1 += std::abs(diff);
        l2 += diff * diff;
      }
      rec.gap_l1 = l1;
      rec.gap_l2sq = l2;
    } else {
      rec.gap_l1 = rec.gap_l2sq = kNaN;
    }
    if (noise) {
      const auto w = w_set(grad, noise->scale, trace.sigma_median);
      rec.w_count = static_cast<int>(w.size());
      rec.mixed_measure = mixed_measure(grad, w, mixed_weight);
    } else {
      rec.mixed_measure = kNaN;
    }
    if ((t - 1) % stride == 0) trace.snapshots.push_back({t, x});
    trace.rounds.push_back(rec);

    for (std::size_t j = 0; j < d; ++j) {
      x[j] -= schedule.delta * direction[j];
      if (!std::isfinite(x[j]) || std::abs(x[j]) > kDivergenceBound) {
        throw NumericalError("iterate diverged in round " + std::to_string(t) + " (coordinate " +
                                 std::to_string(j) + ")",
                             t);
      }
    }
  }

  trace.snapshots.push_back({T + 1, x});
  trace.final_x = x;
  const Vector final_grad = problem.grad_mean(x);
  trace.final_grad_l1 = norm_l1(final_grad);
  trace.final_grad_l2sq = norm_l2sq(final_grad);
  std::vector<Vector> locals(M);
  for (std::size_t i = 0; i < M; ++i) locals[i] = problem.grad_local(i, x);
  trace.final_median_l1 = norm_l1(options.median(locals));
  trace.min_grad_l1 = std::numeric_limits<double>::infinity();
  trace.min_grad_l2sq = std::numeric_limits<double>::infinity();
  for (const RoundRecord& r : trace.rounds) {
    trace.min_grad_l1 = std::min(trace.min_grad_l1, r.grad_l1);
    trace.min_grad_l2sq = std::min(trace.min_grad_l2sq, r.grad_l2sq);
  }
  return trace;
}

std::vector<RunTrace> run_noisy_sweep(const Objective& problem, const AlgoConfig& base,
                                      std::span<const double> b_grid, const RunOptions& options) {
  if (b_grid.empty()) throw std::invalid_argument("sweep.b_grid must be non-empty");
  for (double b : b_grid) {
    if (!(b >= 0.0)) throw std::invalid_argument("sweep.b_grid entries must be non-negative");
  }
  std::vector<RunTrace> traces;
  traces.reserve(b_grid.size());
  for (double b : b_grid) {
    AlgoConfig cfg = base;
    if (b == 0.0) {
      cfg.noise.reset();
    } else {
      NoiseConfig nc = base.noise.value_or(NoiseConfig{});
      nc.scale = b;
      nc.coupled_schedule = false;
      cfg.noise = nc;
    }
    traces.push_back(run(problem, cfg, options));
  }
  return traces;
}

BitTotals account_bits(const RunTrace& trace) {
  BitTotals totals;
  for (const RoundRecord& r : trace.rounds) {
    totals.uplink += r.uplink_bits;
    totals.downlink += r.downlink_bits;
  }
  return totals;
}

}  // namespace mcl
