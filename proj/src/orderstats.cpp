#include "mcl/orderstats.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "mcl/quadrature.hpp"

namespace mcl {
namespace {

void validate(const MedianLawQuery& q, bool need_density) {
  if (q.u.empty() || q.u.size() % 2 == 0) {
    throw std::invalid_argument("median law needs an odd number of centers, got " +
                                std::to_string(q.u.size()));
  }
  if (q.u.size() > kMaxExactCenters) {
    throw std::invalid_argument("exact median law is capped at " +
                                std::to_string(kMaxExactCenters) + " centers");
  }
  if (need_density ? !(q.noise.scale > 0.0) : !(q.noise.scale >= 0.0)) {
    throw std::invalid_argument("median law density needs a positive noise scale");
  }
}

double mean_of(std::span<const double> u) {
  return std::accumulate(u.begin(), u.end(), 0.0) / static_cast<double>(u.size());
}

/// Order-statistic density
///   r(z) = sum_i h_i(z) P(exactly n of the other 2n centers fall below z),
/// where the inner Poisson-binomial probability is assembled from prefix and
/// suffix count distributions instead of enumerating the n-subsets.
class MedianDensity {
 public:
  explicit MedianDensity(const MedianLawQuery& q)
      : u_(q.u), family_(q.noise.family), b_(q.noise.scale), m_(q.u.size()), n_((m_ - 1) / 2),
        below_(m_), above_(m_), dens_(m_), prefix_((m_ + 1) * (m_ + 1)), suffix_((m_ + 1) * (m_ + 1)) {}

  double operator()(double z) {
    for (std::size_t i = 0; i < m_; ++i) {
      const double s = (z - u_[i]) / b_;
      below_[i] = base_cdf(family_, s);
      above_[i] = base_cdf(family_, -s);  // 1 - H, accurate in the upper tail
      dens_[i] = base_pdf(family_, s) / b_;
    }
    // prefix row k: count distribution over centers [0, k).
    auto P = [&](std::size_t k, std::size_t c) -> double& { return prefix_[k * (m_ + 1) + c]; };
    auto S = [&](std::size_t k, std::size_t c) -> double& { return suffix_[k * (m_ + 1) + c]; };
    std::fill(prefix_.begin(), prefix_.end(), 0.0);
    std::fill(suffix_.begin(), suffix_.end(), 0.0);
    P(0, 0) = 1.0;
    for (std::size_t k = 0; k < m_; ++k) {
      for (std::size_t c = 0; c <= k; ++c) {
        P(k + 1, c) += P(k, c) * above_[k];
        P(k + 1, c + 1) += P(k, c) * below_[k];
      }
    }
    // suffix row k: count distribution over centers [k, m).
    S(m_, 0) = 1.0;
    for (std::size_t k = m_; k-- > 0;) {
      for (std::size_t c = 0; c <= m_ - k - 1; ++c) {
        S(k, c) += S(k + 1, c) * above_[k];
        S(k, c + 1) += S(k + 1, c) * below_[k];
      }
    }
    double total = 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      if (dens_[i] == 0.0) continue;
      double exactly_n = 0.0;
      const std::size_t left = i, right = m_ - i - 1;
      for (std::size_t c = (n_ > right ? n_ - right : 0); c <= std::min(n_, left); ++c) {
        exactly_n += P(i, c) * S(i + 1, n_ - c);
      }
      total += dens_[i] * exactly_n;
    }
    return total;
  }

 private:
  std::span<const double> u_;
  NoiseFamily family_;
  double b_;
  std::size_t m_, n_;
  std::vector<double> below_, above_, dens_, prefix_, suffix_;
};

/// Breakpoints of the density in the shifted coordinate w = z - center,
/// clipped to [lo, hi].
std::vector<double> breakpoints(const MedianLawQuery& q, double center, double lo, double hi) {
  std::vector<double> pts{lo, hi};
  for (double ui : q.u) {
    pts.push_back(ui - center);
    for (double k : base_kinks(q.noise.family)) {
      const double p = ui - center + q.noise.scale * k;
      if (p > lo && p < hi) pts.push_back(p);
    }
  }
  std::erase_if(pts, [&](double p) { return p < lo || p > hi; });
  return pts;
}

double half_width(const MedianLawQuery& q, double center) {
  const auto [lo, hi] = std::minmax_element(q.u.begin(), q.u.end());
  return std::max(std::abs(*lo - center), std::abs(*hi - center)) +
         q.noise.scale * effective_support(q.noise.family);
}

double noiseless_median(Vector u) {
  const auto mid = u.begin() + static_cast<std::ptrdiff_t>((u.size() - 1) / 2);
  std::nth_element(u.begin(), mid, u.end());
  return *mid;
}

/// Running moments with the pairwise merge of Pebay (2008).
struct Moments {
  double n = 0, mean = 0, m2 = 0, m3 = 0, m4 = 0;

  void add(double x) {
    const double n1 = n;
    n += 1;
    const double delta = x - mean, dn = delta / n, dn2 = dn * dn, t = delta * dn * n1;
    mean += dn;
    m4 += t * dn2 * (n * n - 3 * n + 3) + 6 * dn2 * m2 - 4 * dn * m3;
    m3 += t * dn * (n - 2) - 3 * dn * m2;
    m2 += t;
  }

  void merge(const Moments& o) {
    if (o.n == 0) return;
    if (n == 0) {
      *this = o;
      return;
    }
    const double na = n, nb = o.n, nn = na + nb, d = o.mean - mean;
    const double d2 = d * d, d3 = d2 * d, d4 = d2 * d2;
    const double m4n = m4 + o.m4 + d4 * na * nb * (na * na - na * nb + nb * nb) / (nn * nn * nn) +
                       6 * d2 * (na * na * o.m2 + nb * nb * m2) / (nn * nn) +
                       4 * d * (na * o.m3 - nb * m3) / nn;
    const double m3n = m3 + o.m3 + d3 * na * nb * (na - nb) / (nn * nn) +
                       3 * d * (na * o.m2 - nb * m2) / nn;
    m2 += o.m2 + d2 * na * nb / nn;
    mean += d * nb / nn;
    m3 = m3n;
    m4 = m4n;
    n = nn;
  }
};

}  // namespace

std::string_view to_string(LawMethod method) {
  return method == LawMethod::ExactQuadrature ? "quadrature" : "monte_carlo";
}

double median_pdf(const MedianLawQuery& query, double z) {
  validate(query, true);
  MedianDensity density(query);
  return density(z);
}

double median_pdf_mass(const MedianLawQuery& query) {
  validate(query, true);
  const double ubar = mean_of(query.u);
  const double w = half_width(query, ubar);
  MedianDensity density(query);
  const auto pts = breakpoints(query, ubar, -w, w);
  return integrate([&](double x) { return density(ubar + x); }, pts, 1e-12).value;
}

MedianLawSummary expected_median(const MedianLawQuery& query) {
  validate(query, false);
  MedianLawSummary s;
  s.mean = mean_of(query.u);
  s.method = LawMethod::ExactQuadrature;
  if (query.noise.scale == 0.0) {
    s.expected_median = noiseless_median(query.u);
    s.gap = s.expected_median - s.mean;
    // A point mass at the median is symmetric about u-bar only if they coincide.
    s.asym_mass = s.gap == 0.0 ? 0.0 : 1.0;
    return s;
  }
  const double ubar = s.mean;
  const double w = half_width(query, ubar);
  MedianDensity density(query);

  // Pairing r(u-bar + w) with r(u-bar - w) keeps the O(b) location out of
  // the integrand, so small gaps are not lost to cancellation.
  const auto half = breakpoints(query, ubar, 0.0, w);
  std::vector<double> half_pts = half;
  for (double p : breakpoints(query, ubar, -w, 0.0)) half_pts.push_back(-p);
  std::erase_if(half_pts, [&](double p) { return p < 0.0 || p > w; });

  const auto gap = integrate(
      [&](double x) { return x * (density(ubar + x) - density(ubar - x)); }, half_pts,
      kQuadratureTolerance);
  const auto asym = integrate(
      [&](double x) { return std::abs(density(ubar + x) - density(ubar - x)); }, half_pts,
      kQuadratureTolerance);

  const double var_tol = kQuadratureTolerance * std::max(1.0, query.noise.scale * query.noise.scale);
  const auto full = breakpoints(query, ubar, -w, w);
  const auto var = integrate(
      [&](double x) {
        const double c = x - gap.value;
        return c * c * density(ubar + x);
      },
      full, var_tol);

  s.gap = gap.value;
  s.expected_median = ubar + gap.value;
  s.variance = var.value;
  s.asym_mass = asym.value;
  s.error_estimate = gap.error;
  s.variance_error = var.error;
  return s;
}

double asym_mass(const MedianLawQuery& query) {
  validate(query, false);
  return expected_median(query).asym_mass;
}

MedianLawSummary mc_median_summary(const MedianLawQuery& query, std::size_t n_samples,
                                   std::uint64_t seed, unsigned threads) {
  if (query.u.empty() || query.u.size() % 2 == 0) {
    throw std::invalid_argument("median law needs an odd number of centers");
  }
  if (n_samples < 1000) throw std::invalid_argument("Monte Carlo needs at least 1000 samples");
  if (!(query.noise.scale >= 0.0)) throw std::invalid_argument("noise scale must be non-negative");

  constexpr std::size_t kBatch = 1 << 15;
  const std::size_t batches = (n_samples + kBatch - 1) / kBatch;
  std::vector<Moments> results(batches);
  const double shift = noiseless_median(query.u);
  std::atomic<std::size_t> next{0};

  auto work = [&] {
    Vector draw(query.u.size());
    const auto mid = draw.begin() + static_cast<std::ptrdiff_t>((draw.size() - 1) / 2);
    for (std::size_t batch; (batch = next.fetch_add(1)) < batches;) {
      RandomStream stream(seed, StreamDomain::MonteCarlo, static_cast<std::uint32_t>(batch), 0);
      const std::size_t count = std::min(kBatch, n_samples - batch * kBatch);
      Moments m;
      for (std::size_t k = 0; k < count; ++k) {
        for (std::size_t i = 0; i < draw.size(); ++i) {
          draw[i] = query.u[i] - shift + sample(query.noise, stream);
        }
        std::nth_element(draw.begin(), mid, draw.end());
        m.add(*mid);
      }
      results[batch] = m;
    }
  };

  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(batches)));
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(work);
    work();
  }

  Moments total;
  for (const Moments& m : results) total.merge(m);
  const double n = total.n;
  const double var = total.m2 / (n - 1);
  const double mu4 = total.m4 / n;
  const double pop_var = total.m2 / n;

  MedianLawSummary s;
  s.method = LawMethod::MonteCarlo;
  s.samples = n_samples;
  s.mean = mean_of(query.u);
  s.expected_median = shift + total.mean;
  s.gap = s.expected_median - s.mean;
  s.variance = var;
  s.asym_mass = std::numeric_limits<double>::quiet_NaN();
  s.error_estimate = std::sqrt(var / n);
  s.variance_error = std::sqrt(std::max(0.0, mu4 - pop_var * pop_var) / n);
  return s;
}

MedianLawSummary median_summary(const MedianLawQuery& query, std::size_t mc_samples,
                                std::uint64_t seed) {
  if (query.u.size() <= kMaxExactCenters) return expected_median(query);
  return mc_median_summary(query, mc_samples, seed);
}

double base_median_std(NoiseFamily family, std::size_t m) {
  MedianLawQuery q{Vector(m, 0.0), NoiseSpec{family, 1.0}};
  if (m <= kMaxExactCenters) return std::sqrt(expected_median(q).variance);
  return std::sqrt(mc_median_summary(q, 1'000'000, 0x5eed).variance);
}

RateFit rate_fit(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("rate_fit: xs and ys differ in length");
  if (xs.size() < 4) throw std::invalid_argument("rate_fit needs at least 4 points");
  const std::size_t n = xs.size();
  std::vector<double> lx(n), ly(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (!(xs[k] > 0.0) || !(ys[k] > 0.0)) {
      throw std::invalid_argument("rate_fit needs strictly positive values");
    }
    lx[k] = std::log(xs[k]);
    ly[k] = std::log(ys[k]);
  }
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / static_cast<double>(n);
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t k = 0; k < n; ++k) {
    sxx += (lx[k] - mx) * (lx[k] - mx);
    sxy += (lx[k] - mx) * (ly[k] - my);
    syy += (ly[k] - my) * (ly[k] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("rate_fit needs at least two distinct x values");
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return fit;
}

}  // namespace mcl
