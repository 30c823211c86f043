#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcl {

using Vector = std::vector<double>;

double norm_l1(std::span<const double> v);
double norm_l2sq(std::span<const double> v);
double norm_linf(std::span<const double> v);

inline void require_dim(std::span<const double> v, std::size_t dim, const char* what) {
  if (v.size() != dim) {
    throw std::invalid_argument(std::string(what) + ": dimension " + std::to_string(v.size()) +
                                " does not match problem dimension " + std::to_string(dim));
  }
}

}  // namespace mcl
