#include "cas/quadrature.hpp"

#include <numbers>

namespace cas {

namespace {

struct Rule {
  std::array<double, 8> nodes{};
  std::array<double, 8> weights{};
};

// Roots of P_8 by Newton iteration from the Chebyshev-like initial guess.
Rule make_rule() {
  constexpr int n = 8;
  Rule r;
  for (int i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    r.nodes[static_cast<std::size_t>(i)] = z;
    r.weights[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  return r;
}

const Rule& rule() {
  static const Rule r = make_rule();
  return r;
}

}  // namespace

const std::array<double, 8>& GaussLegendre8::nodes() { return rule().nodes; }
const std::array<double, 8>& GaussLegendre8::weights() { return rule().weights; }

}  // namespace cas
