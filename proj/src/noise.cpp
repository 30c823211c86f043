#include "mcl/noise.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mcl {
namespace {

constexpr double kSqrt3 = 1.7320508075688772;
// Laplace with unit variance has scale 1/sqrt(2).
constexpr double kLaplaceScale = 0.70710678118654752;

constexpr std::array<double, 0> kNoKinks{};
constexpr std::array<double, 1> kLaplaceKinks{0.0};
constexpr std::array<double, 2> kUniformKinks{-kSqrt3, kSqrt3};

void require_positive_scale(const NoiseSpec& spec) {
  if (!(spec.scale > 0.0)) {
    throw std::invalid_argument("noise scale must be positive for density queries");
  }
}

}  // namespace

std::string_view to_string(NoiseFamily family) {
  switch (family) {
    case NoiseFamily::Gaussian: return "gaussian";
    case NoiseFamily::Laplace: return "laplace";
    case NoiseFamily::Uniform: return "uniform";
  }
  return "unknown";
}

NoiseFamily parse_noise_family(std::string_view name) {
  if (name == "gaussian") return NoiseFamily::Gaussian;
  if (name == "laplace") return NoiseFamily::Laplace;
  if (name == "uniform") return NoiseFamily::Uniform;
  throw std::invalid_argument("unknown noise family '" + std::string(name) +
                              "' (expected gaussian, laplace or uniform)");
}

double base_pdf(NoiseFamily family, double z) {
  switch (family) {
    case NoiseFamily::Gaussian:
      return std::exp(-0.5 * z * z) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
    case NoiseFamily::Laplace:
      return std::exp(-std::abs(z) / kLaplaceScale) / (2.0 * kLaplaceScale);
    case NoiseFamily::Uniform:
      return std::abs(z) <= kSqrt3 ? 1.0 / (2.0 * kSqrt3) : 0.0;
  }
  return 0.0;
}

double base_cdf(NoiseFamily family, double z) {
  switch (family) {
    case NoiseFamily::Gaussian:
      return 0.5 * std::erfc(-z / std::numbers::sqrt2);
    case NoiseFamily::Laplace: {
      const double tail = 0.5 * std::exp(-std::abs(z) / kLaplaceScale);
      return z < 0.0 ? tail : 1.0 - tail;
    }
    case NoiseFamily::Uniform:
      if (z <= -kSqrt3) return 0.0;
      if (z >= kSqrt3) return 1.0;
      return 0.5 + z / (2.0 * kSqrt3);
  }
  return 0.0;
}

double base_sample(NoiseFamily family, RandomStream& stream) {
  switch (family) {
    case NoiseFamily::Gaussian: {
      // Box-Muller, cosine branch only: one normal per two 64-bit words.
      const double u1 = stream.uniform_open_low();
      const double u2 = stream.uniform();
      return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }
    case NoiseFamily::Laplace: {
      const double u = stream.uniform_open_low() - 0.5;  // (-0.5, 0.5]
      const double mag = -kLaplaceScale * std::log1p(-2.0 * std::abs(u));
      return u < 0.0 ? -mag : mag;
    }
    case NoiseFamily::Uniform:
      return kSqrt3 * (2.0 * stream.uniform() - 1.0);
  }
  return 0.0;
}

bool is_smooth(NoiseFamily family) { return family == NoiseFamily::Gaussian; }

std::span<const double> base_kinks(NoiseFamily family) {
  switch (family) {
    case NoiseFamily::Laplace: return kLaplaceKinks;
    case NoiseFamily::Uniform: return kUniformKinks;
    case NoiseFamily::Gaussian: break;
  }
  return kNoKinks;
}

double effective_support(NoiseFamily family) {
  switch (family) {
    case NoiseFamily::Gaussian: return 12.0;
    // exp(-30 sqrt 2) ~ 4e-19.
    case NoiseFamily::Laplace: return 30.0;
    case NoiseFamily::Uniform: return kSqrt3;
  }
  return 12.0;
}

double pdf(const NoiseSpec& spec, double z) {
  require_positive_scale(spec);
  return base_pdf(spec.family, z / spec.scale) / spec.scale;
}

double cdf(const NoiseSpec& spec, double z) {
  require_positive_scale(spec);
  return base_cdf(spec.family, z / spec.scale);
}

double sample(const NoiseSpec& spec, RandomStream& stream) {
  if (spec.scale < 0.0) throw std::invalid_argument("noise scale must be non-negative");
  if (spec.scale == 0.0) return 0.0;
  return spec.scale * base_sample(spec.family, stream);
}

void perturb_in_place(std::span<double> g, const NoiseSpec& spec, RandomStream& stream) {
  if (spec.scale < 0.0) throw std::invalid_argument("noise scale must be non-negative");
  if (spec.scale == 0.0) return;
  for (double& v : g) v += spec.scale * base_sample(spec.family, stream);
}

std::vector<double> perturb_gradient(std::span<const double> g, const NoiseSpec& spec,
                                     RandomStream& stream) {
  std::vector<double> out(g.begin(), g.end());
  perturb_in_place(out, spec, stream);
  return out;
}

}  // namespace mcl
