#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "mcl/random.hpp"
#include "mcl/types.hpp"

namespace mcl {

/// f(x) = (1/M) sum_i f_i(x) over M workers. Worker indices are 0-based.
/// Instances are immutable after construction and safe to share across
/// threads.
class Objective {
 public:
  virtual ~Objective() = default;

  virtual std::size_t num_workers() const = 0;
  virtual std::size_t dim() const = 0;

  virtual double local_value(std::size_t worker, std::span<const double> x) const = 0;
  /// Exact gradient of f_worker written into out. No validation; callers go
  /// through grad_local() unless they have already checked shapes.
  virtual void local_gradient_into(std::size_t worker, std::span<const double> x,
                                   std::span<double> out) const = 0;

  /// Lipschitz constant of grad f (an upper bound where exact is unknown).
  virtual double smoothness() const = 0;
  /// min_x f(x).
  virtual double optimal_value() const = 0;

  virtual bool supports_minibatch() const { return false; }
  virtual std::size_t samples_per_worker() const { return 1; }
  virtual void minibatch_gradient_into(std::size_t worker, std::span<const double> x,
                                       std::size_t batch_size, RandomStream& stream,
                                       std::span<double> out) const;

  Vector grad_local(std::size_t worker, std::span<const double> x) const;
  Vector grad_mean(std::span<const double> x) const;
  /// Unbiased sub-sampled gradient: batch_size distinct samples drawn
  /// uniformly without replacement from the worker's data.
  Vector grad_minibatch(std::size_t worker, std::span<const double> x, std::size_t batch_size,
                        RandomStream& stream) const;
  double value(std::span<const double> x) const;
  /// D_f = f(x1) - min f, taken at the actual initial iterate.
  double initial_suboptimality(std::span<const double> x1) const;

 protected:
  void check_worker(std::size_t worker) const;
};

/// f_i(x) = 0.5 * ||x - a_i||^2.
class QuadraticEnsemble final : public Objective {
 public:
  explicit QuadraticEnsemble(std::vector<Vector> centers);

  std::size_t num_workers() const override { return centers_.size(); }
  std::size_t dim() const override { return dim_; }
  double local_value(std::size_t worker, std::span<const double> x) const override;
  void local_gradient_into(std::size_t worker, std::span<const double> x,
                           std::span<double> out) const override;
  double smoothness() const override { return 1.0; }
  double optimal_value() const override;

  const std::vector<Vector>& centers() const { return centers_; }
  const Vector& center_mean() const { return mean_; }
  /// Coordinate-wise median of the centers (lower middle for even M).
  Vector center_median() const;

 private:
  std::vector<Vector> centers_;
  std::size_t dim_;
  Vector mean_;
};

struct LabeledSample {
  Vector features;
  double label;  // 0 or 1
};

/// Binary logistic regression per worker:
///   f_i(x) = (1/K) sum_k [log(1 + exp(z_k . x)) - y_k z_k . x] + (l2/2)||x||^2.
class LogisticEnsemble final : public Objective {
 public:
  LogisticEnsemble(std::vector<std::vector<LabeledSample>> worker_data, double l2 = 0.0);

  std::size_t num_workers() const override { return data_.size(); }
  std::size_t dim() const override { return dim_; }
  double local_value(std::size_t worker, std::span<const double> x) const override;
  void local_gradient_into(std::size_t worker, std::span<const double> x,
                           std::span<double> out) const override;
  double smoothness() const override { return smoothness_; }
  double optimal_value() const override;

  bool supports_minibatch() const override { return true; }
  std::size_t samples_per_worker() const override { return samples_; }
  void minibatch_gradient_into(std::size_t worker, std::span<const double> x,
                               std::size_t batch_size, RandomStream& stream,
                               std::span<double> out) const override;

  /// Max feature l-infinity norm; bounds |grad f_i(x)_j| when l2 = 0.
  double gradient_bound() const { return gradient_bound_; }
  double l2() const { return l2_; }
  const std::vector<std::vector<LabeledSample>>& data() const { return data_; }

 private:
  void accumulate(const LabeledSample& s, std::span<const double> x, double weight,
                  std::span<double> out) const;

  std::vector<std::vector<LabeledSample>> data_;
  std::size_t dim_;
  std::size_t samples_;
  double l2_;
  double smoothness_;
  double gradient_bound_;
  struct OptimumCache {
    std::once_flag once;
    double value = 0.0;
  };
  std::unique_ptr<OptimumCache> optimum_ = std::make_unique<OptimumCache>();
  double solve_optimum() const;
};

/// Shape of the synthetic heterogeneous logistic data.
struct LogisticGenerator {
  std::size_t workers = 5;
  std::size_t dim = 10;  // includes the trailing constant bias feature
  std::size_t samples_per_worker = 100;
  std::size_t classes = 10;
  std::size_t classes_per_worker = 2;
  double separation = 1.0;  // class centers uniform in [-separation, separation]
  double spread = 0.5;      // per-sample offset uniform in [-spread, spread]
  double l2 = 0.0;
  std::uint64_t seed = 1;

  bool operator==(const LogisticGenerator&) const = default;
};

/// Label-skewed partition: worker i only sees classes
/// {i * cpw, ..., i * cpw + cpw - 1} mod classes; the binary label is the
/// class parity.
LogisticEnsemble generate_logistic(const LogisticGenerator& gen);

}  // namespace mcl
