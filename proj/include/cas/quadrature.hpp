#pragma once

#include "cas/errors.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>

namespace cas {

/// Fixed 8-point Gauss-Legendre rule on [-1, 1].
struct GaussLegendre8 {
  static const std::array<double, 8>& nodes();
  static const std::array<double, 8>& weights();
};

struct QuadratureOptions {
  double rel_tol = 1e-8;
  int initial_panels = 4;
  int max_panels = 1 << 14;
  int fixed_panels = 0;  ///< > 0: skip refinement and use exactly this many panels
};

/// Composite Gauss-Legendre on [0, 1) for a vector-valued integrand,
/// doubling the panel count until successive estimates agree to
/// rel_tol * max(|I|, 1e-6 * M), where M integrates the magnitude the
/// integrand reports. `f(u, value, magnitude)` adds into `value`.
/// Throws NumericalError when max_panels is reached.
template <class F>
Eigen::VectorXd integrate_unit(F&& f, Eigen::Index size, const QuadratureOptions& opt = {}) {
  const auto& x = GaussLegendre8::nodes();
  const auto& w = GaussLegendre8::weights();
  auto estimate = [&](int panels, double& magnitude) {
    Eigen::VectorXd total = Eigen::VectorXd::Zero(size);
    Eigen::VectorXd value(size);
    magnitude = 0.0;
    const double h = 1.0 / panels;
    for (int p = 0; p < panels; ++p) {
      const double mid = (p + 0.5) * h;
      for (std::size_t i = 0; i < x.size(); ++i) {
        value.setZero();
        double mag = 0.0;
        f(mid + 0.5 * h * x[i], value, mag);
        total += (0.5 * h * w[i]) * value;
        magnitude += 0.5 * h * w[i] * mag;
      }
    }
    return total;
  };
  double magnitude = 0.0;
  if (opt.fixed_panels > 0) return estimate(opt.fixed_panels, magnitude);

  Eigen::VectorXd previous = estimate(opt.initial_panels, magnitude);
  for (int panels = 2 * opt.initial_panels; panels <= opt.max_panels; panels *= 2) {
    Eigen::VectorXd current = estimate(panels, magnitude);
    const double scale = std::max(current.norm(), 1e-6 * magnitude);
    if ((current - previous).norm() <= opt.rel_tol * scale) return current;
    previous = std::move(current);
  }
  throw NumericalError("Gauss-Legendre refinement did not converge");
}

}  // namespace cas
