#include "mcl/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace mcl {
namespace {

struct Panel {
  double a, b, value, error;
  bool operator<(const Panel& o) const { return error < o.error; }
};

Panel evaluate(const std::function<double(double)>& f, double a, double b) {
  double err = 0.0;
  // max_depth 0: a single G7/K15 panel with |K15 - G7| as the error.
  const double v =
      boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, 0, 0.0, &err);
  return {a, b, v, err};
}

}  // namespace

QuadratureResult integrate(const std::function<double(double)>& f, std::span<const double> points,
                           double abs_tol, std::size_t max_panels) {
  std::vector<double> pts(points.begin(), points.end());
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 2) throw std::invalid_argument("integrate: need at least two distinct points");
  if (!std::isfinite(pts.front()) || !std::isfinite(pts.back())) {
    throw std::invalid_argument("integrate: limits must be finite");
  }
  if (!(abs_tol > 0.0)) throw std::invalid_argument("integrate: tolerance must be positive");

  std::priority_queue<Panel> queue;
  double total = 0.0, error = 0.0;
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    Panel p = evaluate(f, pts[k], pts[k + 1]);
    total += p.value;
    error += p.error;
    queue.push(p);
  }

  while (error > abs_tol) {
    if (queue.size() >= max_panels) {
      throw QuadratureError("quadrature did not converge: residual " + std::to_string(error) +
                                " exceeds tolerance " + std::to_string(abs_tol),
                            {total, error, queue.size()});
    }
    const Panel worst = queue.top();
    queue.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {
      throw QuadratureError("quadrature panel collapsed below machine resolution",
                            {total, error, queue.size() + 1});
    }
    const Panel left = evaluate(f, worst.a, mid);
    const Panel right = evaluate(f, mid, worst.b);
    total += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    queue.push(left);
    queue.push(right);
  }

  // Re-sum from the panels to shed the drift of incremental updates.
  QuadratureResult out;
  out.panels = queue.size();
  while (!queue.empty()) {
    out.value += queue.top().value;
    out.error += queue.top().error;
    queue.pop();
  }
  return out;
}

}  // namespace mcl
