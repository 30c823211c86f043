#include "mcl/objective.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace mcl {

double norm_l1(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s;
}

double norm_l2sq(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

double norm_linf(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s = std::max(s, std::abs(x));
  return s;
}

// ---------------------------------------------------------------- Objective

void Objective::check_worker(std::size_t worker) const {
  if (worker >= num_workers()) {
    throw std::out_of_range("worker index " + std::to_string(worker) + " out of range [0, " +
                            std::to_string(num_workers()) + ")");
  }
}

void Objective::minibatch_gradient_into(std::size_t, std::span<const double>, std::size_t,
                                        RandomStream&, std::span<double>) const {
  throw std::logic_error("mini-batch gradients are only defined for sample-based objectives");
}

Vector Objective::grad_local(std::size_t worker, std::span<const double> x) const {
  check_worker(worker);
  require_dim(x, dim(), "grad_local");
  Vector out(dim());
  local_gradient_into(worker, x, out);
  return out;
}

Vector Objective::grad_mean(std::span<const double> x) const {
  require_dim(x, dim(), "grad_mean");
  Vector sum(dim(), 0.0);
  Vector g(dim());
  for (std::size_t i = 0; i < num_workers(); ++i) {
    local_gradient_into(i, x, g);
    for (std::size_t j = 0; j < g.size(); ++j) sum[j] += g[j];
  }
  const double m = static_cast<double>(num_workers());
  for (double& v : sum) v /= m;
  return sum;
}

Vector Objective::grad_minibatch(std::size_t worker, std::span<const double> x,
                                 std::size_t batch_size, RandomStream& stream) const {
  check_worker(worker);
  require_dim(x, dim(), "grad_minibatch");
  if (!supports_minibatch()) {
    throw std::invalid_argument("mini-batch gradients require a sample-based objective");
  }
  if (batch_size == 0 || batch_size > samples_per_worker()) {
    throw std::invalid_argument("batch size " + std::to_string(batch_size) +
                                " outside [1, " + std::to_string(samples_per_worker()) + "]");
  }
  Vector out(dim());
  minibatch_gradient_into(worker, x, batch_size, stream, out);
  return out;
}

double Objective::value(std::span<const double> x) const {
  require_dim(x, dim(), "value");
  double s = 0.0;
  for (std::size_t i = 0; i < num_workers(); ++i) s += local_value(i, x);
  return s / static_cast<double>(num_workers());
}

double Objective::initial_suboptimality(std::span<const double> x1) const {
  return std::max(0.0, value(x1) - optimal_value());
}

// -------------------------------------------------------- QuadraticEnsemble

QuadraticEnsemble::QuadraticEnsemble(std::vector<Vector> centers) : centers_(std::move(centers)) {
  if (centers_.empty()) throw std::invalid_argument("quadratic ensemble needs at least one center");
  dim_ = centers_.front().size();
  if (dim_ == 0) throw std::invalid_argument("quadratic ensemble centers must be non-empty");
  mean_.assign(dim_, 0.0);
  for (const Vector& a : centers_) {
    if (a.size() != dim_) throw std::invalid_argument("quadratic ensemble centers differ in dimension");
    for (std::size_t j = 0; j < dim_; ++j) mean_[j] += a[j];
  }
  for (double& v : mean_) v /= static_cast<double>(centers_.size());
}

double QuadraticEnsemble::local_value(std::size_t worker, std::span<const double> x) const {
  const Vector& a = centers_[worker];
  double s = 0.0;
  for (std::size_t j = 0; j < dim_; ++j) s += (x[j] - a[j]) * (x[j] - a[j]);
  return 0.5 * s;
}

void QuadraticEnsemble::local_gradient_into(std::size_t worker, std::span<const double> x,
                                            std::span<double> out) const {
  const Vector& a = centers_[worker];
  for (std::size_t j = 0; j < dim_; ++j) out[j] = x[j] - a[j];
}

double QuadraticEnsemble::optimal_value() const { return value(mean_); }

Vector QuadraticEnsemble::center_median() const {
  Vector med(dim_);
  std::vector<double> column(centers_.size());
  const std::size_t k = (centers_.size() - 1) / 2;
  for (std::size_t j = 0; j < dim_; ++j) {
    for (std::size_t i = 0; i < centers_.size(); ++i) column[i] = centers_[i][j];
    std::nth_element(column.begin(), column.begin() + static_cast<std::ptrdiff_t>(k), column.end());
    med[j] = column[k];
  }
  return med;
}

// --------------------------------------------------------- LogisticEnsemble

namespace {

// log(1 + exp(s)) without overflow.
double softplus(double s) { return s > 0.0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s)); }

double sigmoid(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace

LogisticEnsemble::LogisticEnsemble(std::vector<std::vector<LabeledSample>> worker_data, double l2)
    : data_(std::move(worker_data)), l2_(l2) {
  if (data_.empty()) throw std::invalid_argument("logistic ensemble needs at least one worker");
  if (!(l2_ >= 0.0)) throw std::invalid_argument("l2 weight must be non-negative");
  samples_ = data_.front().size();
  if (samples_ == 0) throw std::invalid_argument("logistic workers need at least one sample");
  dim_ = data_.front().front().features.size();
  if (dim_ == 0) throw std::invalid_argument("logistic features must be non-empty");
  double max_sq = 0.0;
  gradient_bound_ = 0.0;
  for (const auto& worker : data_) {
    if (worker.size() != samples_) {
      throw std::invalid_argument("all logistic workers must hold the same number of samples");
    }
    for (const auto& s : worker) {
      if (s.features.size() != dim_) throw std::invalid_argument("logistic feature dimension mismatch");
      if (s.label != 0.0 && s.label != 1.0) throw std::invalid_argument("logistic labels must be 0 or 1");
      max_sq = std::max(max_sq, norm_l2sq(s.features));
      gradient_bound_ = std::max(gradient_bound_, norm_linf(s.features));
    }
  }
  // Hessian of the logistic loss is sigma(1 - sigma) z z^T <= z z^T / 4.
  smoothness_ = 0.25 * max_sq + l2_;
}

void LogisticEnsemble::accumulate(const LabeledSample& s, std::span<const double> x, double weight,
                                  std::span<double> out) const {
  const double r = weight * (sigmoid(dot(s.features, x)) - s.label);
  for (std::size_t j = 0; j < dim_; ++j) out[j] += r * s.features[j];
}

double LogisticEnsemble::local_value(std::size_t worker, std::span<const double> x) const {
  double s = 0.0;
  for (const auto& sample : data_[worker]) {
    const double m = dot(sample.features, x);
    s += softplus(m) - sample.label * m;
  }
  return s / static_cast<double>(samples_) + 0.5 * l2_ * norm_l2sq(x);
}

void LogisticEnsemble::local_gradient_into(std::size_t worker, std::span<const double> x,
                                           std::span<double> out) const {
  for (std::size_t j = 0; j < dim_; ++j) out[j] = l2_ * x[j];
  const double w = 1.0 / static_cast<double>(samples_);
  for (const auto& sample : data_[worker]) accumulate(sample, x, w, out);
}

void LogisticEnsemble::minibatch_gradient_into(std::size_t worker, std::span<const double> x,
                                               std::size_t batch_size, RandomStream& stream,
                                               std::span<double> out) const {
  for (std::size_t j = 0; j < dim_; ++j) out[j] = l2_ * x[j];
  const double w = 1.0 / static_cast<double>(batch_size);
  const auto& samples = data_[worker];
  if (batch_size == samples_) {
    for (const auto& sample : samples) accumulate(sample, x, w, out);
    return;
  }
  // Partial Fisher-Yates over an index table.
  std::vector<std::size_t> idx(samples_);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t k = 0; k < batch_size; ++k) {
    const std::size_t pick = k + static_cast<std::size_t>(stream.below(samples_ - k));
    std::swap(idx[k], idx[pick]);
    accumulate(samples[idx[k]], x, w, out);
  }
}

double LogisticEnsemble::optimal_value() const {
  std::call_once(optimum_->once, [this] { optimum_->value = solve_optimum(); });
  return optimum_->value;
}

double LogisticEnsemble::solve_optimum() const {
  // Nesterov-accelerated gradient descent with step 1/L and gradient-based
  // restart. Without regularization the infimum may not be attained; the
  // best value found is returned, which can only understate D_f.
  Vector x(dim_, 0.0), y = x, x_prev = x;
  double best = value(x);
  const double step = 1.0 / smoothness_;
  double momentum = 1.0;
  for (int it = 0; it < 20000; ++it) {
    const Vector g = grad_mean(y);
    if (norm_linf(g) < 1e-10) break;
    x_prev = x;
    for (std::size_t j = 0; j < dim_; ++j) x[j] = y[j] - step * g[j];
    const double next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    double restart = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) restart += g[j] * (x[j] - x_prev[j]);
    if (restart > 0.0) {
      momentum = 1.0;
      y = x;
    } else {
      const double beta = (momentum - 1.0) / next;
      for (std::size_t j = 0; j < dim_; ++j) y[j] = x[j] + beta * (x[j] - x_prev[j]);
      momentum = next;
    }
    best = std::min(best, value(x));
  }
  return best;
}

LogisticEnsemble generate_logistic(const LogisticGenerator& gen) {
  if (gen.workers == 0 || gen.dim < 2 || gen.samples_per_worker == 0 || gen.classes < 2 ||
      gen.classes_per_worker == 0 || gen.classes_per_worker > gen.classes) {
    throw std::invalid_argument("invalid logistic generator shape");
  }
  if (!(gen.separation >= 0.0) || !(gen.spread >= 0.0)) {
    throw std::invalid_argument("logistic generator separation and spread must be non-negative");
  }
  const std::size_t informative = gen.dim - 1;
  RandomStream centers_stream(gen.seed, StreamDomain::DataGeneration, 0xFFFFFFFFu, 0);
  std::vector<Vector> class_centers(gen.classes, Vector(informative));
  for (auto& c : class_centers) {
    for (double& v : c) v = gen.separation * (2.0 * centers_stream.uniform() - 1.0);
  }
  std::vector<std::vector<LabeledSample>> data(gen.workers);
  for (std::size_t i = 0; i < gen.workers; ++i) {
    RandomStream stream(gen.seed, StreamDomain::DataGeneration, static_cast<std::uint32_t>(i), 1);
    data[i].reserve(gen.samples_per_worker);
    for (std::size_t k = 0; k < gen.samples_per_worker; ++k) {
      const std::size_t cls =
          (i * gen.classes_per_worker + k % gen.classes_per_worker) % gen.classes;
      LabeledSample s;
      s.features.resize(gen.dim);
      for (std::size_t j = 0; j < informative; ++j) {
        s.features[j] = class_centers[cls][j] + gen.spread * (2.0 * stream.uniform() - 1.0);
      }
      s.features[informative] = 1.0;
      s.label = static_cast<double>(cls % 2);
      data[i].push_back(std::move(s));
    }
  }
  return LogisticEnsemble(std::move(data), gen.l2);
}

}  // namespace mcl
