#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

#include "mcl/noise.hpp"
#include "mcl/types.hpp"

namespace mcl {

/// Law of median({u_i + b xi_i}) for an odd number of centers u.
struct MedianLawQuery {
  Vector u;
  NoiseSpec noise;
};

enum class LawMethod { ExactQuadrature, MonteCarlo };
std::string_view to_string(LawMethod method);

struct MedianLawSummary {
  double expected_median = 0.0;
  double mean = 0.0;      // u-bar
  double gap = 0.0;       // expected_median - mean
  double variance = 0.0;
  double asym_mass = 0.0; // NaN for Monte Carlo
  LawMethod method = LawMethod::ExactQuadrature;
  /// Quadrature residual, or the standard error of expected_median.
  double error_estimate = 0.0;
  /// Quadrature residual of the variance, or its standard error.
  double variance_error = 0.0;
  std::size_t samples = 0;
};

/// Largest 2n + 1 handled by exact quadrature; (2n+1) C(2n, n) = 3003 terms.
inline constexpr std::size_t kMaxExactCenters = 15;
inline constexpr double kQuadratureTolerance = 1e-10;

/// Exact density of the median at z. Requires odd |u| <= kMaxExactCenters and
/// b > 0.
double median_pdf(const MedianLawQuery& query, double z);

/// Mean, variance, gap and asymmetric mass by adaptive quadrature. b = 0 is
/// the noiseless median (variance 0). Throws QuadratureError if the residual
/// cannot be brought under tolerance.
MedianLawSummary expected_median(const MedianLawQuery& query);

/// Mass of the reflection-antisymmetric part of the median law about u-bar:
/// (1/2) integral |r(u-bar + w) - r(u-bar - w)| dw, in [0, 2].
double asym_mass(const MedianLawQuery& query);

/// Total mass of the exact density (1 up to quadrature error).
double median_pdf_mass(const MedianLawQuery& query);

/// Monte-Carlo moments of the median. Batches are keyed by index, so the
/// result does not depend on the thread count.
MedianLawSummary mc_median_summary(const MedianLawQuery& query, std::size_t n_samples,
                                   std::uint64_t seed, unsigned threads = 1);

/// Quadrature when |u| <= kMaxExactCenters, Monte Carlo otherwise.
MedianLawSummary median_summary(const MedianLawQuery& query, std::size_t mc_samples = 200000,
                                std::uint64_t seed = 1);

/// Standard deviation of the median of m base-family draws (u = 0, b = 1).
double base_median_std(NoiseFamily family, std::size_t m);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// OLS fit of log y against log x. Needs >= 4 points, all positive.
RateFit rate_fit(std::span<const double> xs, std::span<const double> ys);

}  // namespace mcl
