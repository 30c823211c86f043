#include "mcl/aggregate.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace mcl {
namespace {

std::size_t check_shape(std::span<const Vector> vectors) {
  if (vectors.empty()) throw std::invalid_argument("aggregation needs at least one vector");
  const std::size_t d = vectors.front().size();
  for (const Vector& v : vectors) {
    if (v.size() != d) throw std::invalid_argument("aggregated vectors differ in dimension");
  }
  return d;
}

void require_odd(std::size_t m) {
  if (m % 2 == 0) {
    throw std::invalid_argument("sign aggregation requires an odd number of workers, got " +
                                std::to_string(m));
  }
}

}  // namespace

std::string_view to_string(AggregationRule rule) {
  switch (rule) {
    case AggregationRule::Mean: return "mean";
    case AggregationRule::Median: return "median";
    case AggregationRule::SignMajorityVote: return "sign_majority_vote";
    case AggregationRule::SignOfMedian: return "sign_of_median";
  }
  return "unknown";
}

AggregationRule parse_aggregation_rule(std::string_view name) {
  if (name == "mean") return AggregationRule::Mean;
  if (name == "median") return AggregationRule::Median;
  if (name == "sign_majority_vote") return AggregationRule::SignMajorityVote;
  if (name == "sign_of_median") return AggregationRule::SignOfMedian;
  throw std::invalid_argument("unknown aggregation rule '" + std::string(name) +
                              "' (expected mean, median, sign_majority_vote or sign_of_median)");
}

bool is_sign_rule(AggregationRule rule) {
  return rule == AggregationRule::SignMajorityVote || rule == AggregationRule::SignOfMedian;
}

Vector coordinate_median(std::span<const Vector> vectors) {
  const std::size_t d = check_shape(vectors);
  const std::size_t m = vectors.size();
  const auto k = static_cast<std::ptrdiff_t>((m - 1) / 2);
  Vector out(d);
  std::vector<double> column(m);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < m; ++i) column[i] = vectors[i][j];
    std::nth_element(column.begin(), column.begin() + k, column.end());
    out[j] = column[static_cast<std::size_t>(k)];
  }
  return out;
}

Vector coordinate_mean(std::span<const Vector> vectors) {
  const std::size_t d = check_shape(vectors);
  Vector out(d, 0.0);
  for (const Vector& v : vectors) {
    for (std::size_t j = 0; j < d; ++j) out[j] += v[j];
  }
  for (double& x : out) x /= static_cast<double>(vectors.size());
  return out;
}

Vector majority_vote_sign(std::span<const Vector> vectors) {
  const std::size_t d = check_shape(vectors);
  require_odd(vectors.size());
  Vector out(d);
  for (std::size_t j = 0; j < d; ++j) {
    int votes = 0;
    for (const Vector& v : vectors) votes += static_cast<int>(sign_of(v[j]));
    out[j] = sign_of(votes);
  }
  return out;
}

Vector sign_of_median(std::span<const Vector> vectors) {
  require_odd(vectors.size());
  Vector med = coordinate_median(vectors);
  for (double& v : med) v = sign_of(v);
  return med;
}

Vector aggregate(AggregationRule rule, std::span<const Vector> vectors, MedianKernel median) {
  switch (rule) {
    case AggregationRule::Mean: return coordinate_mean(vectors);
    case AggregationRule::Median: return median(vectors);
    case AggregationRule::SignMajorityVote: return majority_vote_sign(vectors);
    case AggregationRule::SignOfMedian: {
      require_odd(vectors.size());
      Vector med = median(vectors);
      for (double& v : med) v = sign_of(v);
      return med;
    }
  }
  throw std::invalid_argument("unknown aggregation rule");
}

// ------------------------------------------------------------------ SignBits
// Encoding: 00 -> 0, 01 -> +1, 10 -> -1.

SignBits::SignBits(std::span<const double> values)
    : bytes_((values.size() + 3) / 4, 0), size_(values.size()) {
  for (std::size_t j = 0; j < size_; ++j) {
    const unsigned code = values[j] > 0.0 ? 1u : (values[j] < 0.0 ? 2u : 0u);
    bytes_[j / 4] |= static_cast<unsigned char>(code << (2 * (j % 4)));
  }
}

int SignBits::operator[](std::size_t j) const {
  const unsigned code = (bytes_[j / 4] >> (2 * (j % 4))) & 3u;
  return code == 1u ? 1 : (code == 2u ? -1 : 0);
}

Vector SignBits::unpack() const {
  Vector out(size_);
  for (std::size_t j = 0; j < size_; ++j) out[j] = (*this)[j];
  return out;
}

Vector majority_vote(std::span<const SignBits> signs) {
  if (signs.empty()) throw std::invalid_argument("majority vote needs at least one worker");
  require_odd(signs.size());
  const std::size_t d = signs.front().size();
  Vector out(d);
  for (std::size_t j = 0; j < d; ++j) {
    int votes = 0;
    for (const SignBits& s : signs) {
      if (s.size() != d) throw std::invalid_argument("sign messages differ in dimension");
      votes += s[j];
    }
    out[j] = sign_of(votes);
  }
  return out;
}

}  // namespace mcl
