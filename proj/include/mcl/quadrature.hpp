#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>

namespace mcl {

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;  // summed Gauss-Kronrod error estimates
  std::size_t panels = 0;
};

class QuadratureError : public std::runtime_error {
 public:
  QuadratureError(const std::string& what, QuadratureResult partial)
      : std::runtime_error(what), partial_(partial) {}
  const QuadratureResult& partial() const { return partial_; }

 private:
  QuadratureResult partial_;
};

/// Globally adaptive 7/15-point Gauss-Kronrod over [points.front(),
/// points.back()], starting from one panel per consecutive pair of
/// breakpoints and bisecting the worst panel until the summed error is at
/// most abs_tol. Breakpoints need not be sorted or unique.
QuadratureResult integrate(const std::function<double(double)>& f, std::span<const double> points,
                           double abs_tol, std::size_t max_panels = 20000);

}  // namespace mcl
