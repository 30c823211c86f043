#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mcl/random.hpp"

namespace mcl {

/// Symmetric, unimodal, zero-mean, unit-variance base families.
enum class NoiseFamily { Gaussian, Laplace, Uniform };

std::string_view to_string(NoiseFamily family);
NoiseFamily parse_noise_family(std::string_view name);

/// A base family scaled by b: samples are b * xi.
struct NoiseSpec {
  NoiseFamily family = NoiseFamily::Gaussian;
  double scale = 0.0;

  bool operator==(const NoiseSpec&) const = default;
};

// Base family (b = 1).
double base_pdf(NoiseFamily family, double z);
double base_cdf(NoiseFamily family, double z);
/// One draw of xi from the base family.
double base_sample(NoiseFamily family, RandomStream& stream);

/// True when h0' and h0'' are bounded and absolutely integrable, i.e. the
/// family satisfies the smoothness hypotheses of the perturbation analysis.
/// Laplace and Uniform are usable but only empirically characterised.
bool is_smooth(NoiseFamily family);

/// Points where the base pdf is not differentiable.
std::span<const double> base_kinks(NoiseFamily family);

/// Half-width (in units of b) beyond which the base pdf is negligible for
/// integration, or the exact support edge for bounded families.
double effective_support(NoiseFamily family);

// Scaled family: pdf(z) = h0(z / b) / b, cdf(z) = H0(z / b).
// Throws std::invalid_argument when b <= 0 (point mass has no density).
double pdf(const NoiseSpec& spec, double z);
double cdf(const NoiseSpec& spec, double z);

/// b * xi. b = 0 returns 0 without consuming the stream.
double sample(const NoiseSpec& spec, RandomStream& stream);

/// g + b * xi with xi iid per coordinate.
std::vector<double> perturb_gradient(std::span<const double> g, const NoiseSpec& spec,
                                     RandomStream& stream);
void perturb_in_place(std::span<double> g, const NoiseSpec& spec, RandomStream& stream);

}  // namespace mcl
