#pragma once

// Central finite differences, used only as an independent check on the
// analytic gradients.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace hardid::testing {

/// d f / d x_i by (f(x + h e_i) - f(x - h e_i)) / 2h with h = step * max(1, |x_i|).
template <typename Fn>
Eigen::VectorXd centralDifference(Fn&& f, Eigen::VectorXd x, double step = 1e-6) {
  Eigen::VectorXd grad(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    const double h = step * std::max(1.0, std::abs(saved));
    x[i] = saved + h;
    const double up = f(x);
    x[i] = saved - h;
    const double down = f(x);
    x[i] = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

/// ||a - b|| / max(||a||, ||b||, floor): a whole-vector relative error that
/// stays meaningful when single components are near zero.
inline double relativeError(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double floor = 1e-8) {
  const double scale = std::max({a.norm(), b.norm(), floor});
  return (a - b).norm() / scale;
}

}  // namespace hardid::testing
