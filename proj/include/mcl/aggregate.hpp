#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "mcl/types.hpp"

namespace mcl {

enum class AggregationRule { Mean, Median, SignMajorityVote, SignOfMedian };

std::string_view to_string(AggregationRule rule);
AggregationRule parse_aggregation_rule(std::string_view name);
/// Rules that emit a sign vector (and therefore need odd M).
bool is_sign_rule(AggregationRule rule);

/// sign(0) = 0.
inline double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

/// Per coordinate, the ((M - 1) / 2)-th order statistic (0-based): the
/// median for odd M, the lower middle for even M. Selection, not sorting.
Vector coordinate_median(std::span<const Vector> vectors);
Vector coordinate_mean(std::span<const Vector> vectors);
/// sign(sum_i sign(g_i)) per coordinate. Requires odd M.
Vector majority_vote_sign(std::span<const Vector> vectors);
/// sign(median) per coordinate. Requires odd M.
Vector sign_of_median(std::span<const Vector> vectors);

/// Pluggable median kernel so that harnesses can substitute a corrupted
/// aggregator and confirm the checks notice.
using MedianKernel = Vector (*)(std::span<const Vector>);

/// Server-side direction for a rule. Sign rules reject even M.
Vector aggregate(AggregationRule rule, std::span<const Vector> vectors,
                 MedianKernel median = coordinate_median);

/// Packed {-1, 0, +1} vector at 2 bits per coordinate, as a worker would put
/// it on the wire. Reported cost is 1 bit per coordinate (the sign of a
/// continuous gradient is never 0 in practice).
class SignBits {
 public:
  SignBits() = default;
  explicit SignBits(std::span<const double> values);

  std::size_t size() const { return size_; }
  int operator[](std::size_t j) const;
  Vector unpack() const;

 private:
  std::vector<unsigned char> bytes_;
  std::size_t size_ = 0;
};

/// sign(sum_i s_i) over packed worker signs.
Vector majority_vote(std::span<const SignBits> signs);

}  // namespace mcl
