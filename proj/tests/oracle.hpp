// Independent reference formulas used by several tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "mcl/noise.hpp"

namespace oracle {

inline double pdf(mcl::NoiseFamily f, double z) {
  switch (f) {
    case mcl::NoiseFamily::Gaussian: return std::exp(-z * z / 2) / std::sqrt(2 * std::numbers::pi);
    case mcl::NoiseFamily::Laplace: return std::exp(-std::sqrt(2.0) * std::abs(z)) / std::sqrt(2.0);
    case mcl::NoiseFamily::Uniform: return std::abs(z) <= std::sqrt(3.0) ? 1 / (2 * std::sqrt(3.0)) : 0.0;
  }
  return 0.0;
}

inline double cdf(mcl::NoiseFamily f, double z) {
  switch (f) {
    case mcl::NoiseFamily::Gaussian: return 0.5 * std::erfc(-z / std::sqrt(2.0));
    case mcl::NoiseFamily::Laplace:
      return z < 0 ? 0.5 * std::exp(std::sqrt(2.0) * z) : 1 - 0.5 * std::exp(-std::sqrt(2.0) * z);
    case mcl::NoiseFamily::Uniform:
      return std::clamp((z + std::sqrt(3.0)) / (2 * std::sqrt(3.0)), 0.0, 1.0);
  }
  return 0.0;
}

/// Density of the median of {u_i + b xi_i} by brute-force enumeration: the
/// median sits at z when one sample lands at z, exactly n others fall below
/// and the remaining n fall above.
inline double median_pdf(const std::vector<double>& u, mcl::NoiseFamily f, double b, double z) {
  const std::size_t M = u.size(), n = (M - 1) / 2;
  double total = 0.0;
  for (std::size_t i = 0; i < M; ++i) {
    const double h = pdf(f, (z - u[i]) / b) / b;
    if (h == 0.0) continue;
    for (unsigned mask = 0; mask < (1u << M); ++mask) {
      if (mask & (1u << i)) continue;
      if (static_cast<std::size_t>(__builtin_popcount(mask)) != n) continue;
      double p = h;
      for (std::size_t k = 0; k < M; ++k) {
        if (k == i) continue;
        const double H = cdf(f, (z - u[k]) / b);
        p *= (mask & (1u << k)) ? H : 1 - H;
      }
      total += p;
    }
  }
  return total;
}

}  // namespace oracle
