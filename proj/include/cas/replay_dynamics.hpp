#pragma once

#include "cas/gaussian_mixture.hpp"
#include "cas/parallel.hpp"
#include "cas/protocol.hpp"
#include "cas/quadrature.hpp"

#include <Eigen/Eigenvalues>

#include <cstdint>
#include <random>
#include <vector>

namespace cas {

/// Mixture parameters at time t together with their time derivatives on
/// the enclosing protocol segment.
struct PathSlice {
  GaussianMixture gm;
  Vector weight_rate;
  std::vector<Vector> mean_rate;
  std::vector<Matrix> cov_rate;
};

/// Rates are (node_{j+1} - node_j) * L on segment j. At an interior node the
/// right derivative is used, at t = 1 the left one. Weight rates are projected
/// onto the simplex tangent space (sum exactly re-centred to zero).
PathSlice path_slice(const ProtocolGrid& grid, double t);

/// Everything needed to evaluate the reconstructed drift at one time.
/// Factorizations are computed once; evaluation is const and reentrant.
class DriftField {
 public:
  explicit DriftField(PathSlice slice, QuadratureOptions quadrature = {});

  const PathSlice& slice() const { return slice_; }
  const MixtureEvaluator& evaluator() const { return evaluator_; }
  bool weights_move() const { return weights_move_; }

  double density(const Vector& x) const { return evaluator_.density(x); }

  /// sum_k pi_k g_k(x) [mdot_k + 1/2 Sigmadot_k Sigma_k^{-1} (x - m_k)].
  Vector shape_current(const Vector& x) const;

  /// Weight-flow potential psi with Laplacian psi = sum_k pidot_k g_k.
  double psi(const Vector& x, const QuadratureOptions& opt) const;
  double psi(const Vector& x) const { return psi(x, quadrature_); }
  /// Gradient of psi; zero when no weight moves.
  Vector psi_gradient(const Vector& x, const QuadratureOptions& opt) const;
  Vector psi_gradient(const Vector& x) const { return psi_gradient(x, quadrature_); }

  struct Value {
    Vector drift;
    bool clamped = false;  ///< p(x) < kDensityFloor in the Poisson division
  };
  /// s(x) = (J_shape - grad psi) / p + 1/2 grad log p.
  Value drift(const Vector& x) const;
  /// Constant-weight formula (grad psi forced to zero).
  Vector drift_constant_weights(const Vector& x) const;

 private:
  struct Spectral {
    Vector eigenvalues;
    Matrix eigenvectors;
  };

  PathSlice slice_;
  MixtureEvaluator evaluator_;
  QuadratureOptions quadrature_;
  std::vector<Spectral> spectral_;
  double time_scale_ = 1.0;  ///< largest covariance eigenvalue
  bool weights_move_ = false;
};

Vector shape_current(const PathSlice& slice, const Vector& x);
Vector poisson_psi_grad(const PathSlice& slice, const Vector& x);
DriftField::Value drift(const PathSlice& slice, const Vector& x);

struct FpResidual {
  double max_relative = 0.0;
  double mean_relative = 0.0;
  double scale = 0.0;  ///< denominator floor used
  std::size_t points = 0;
};

/// Fokker-Planck residual |d_t p + div(s p - 1/2 grad p)| / max(|d_t p|, scale)
/// at the given points, with central differences (1e-5 in t, 1e-4 in x).
/// scale = max(max_i |d_t p(x_i)|, 1e-3 max_i p(x_i)). t must sit inside a
/// segment with room for the time stencil.
FpResidual fp_residual(const ProtocolGrid& grid, double t, const std::vector<Vector>& points,
                       Execution exec = Execution::parallel);

/// Up to n samples of eval_at(grid, t) whose density is at least
/// 1e-8 times the largest density seen at the samples and component means.
std::vector<Vector> bulk_points(const ProtocolGrid& grid, double t, std::size_t n, std::uint64_t seed);

/// Precomputed categorical + Cholesky sampler for one mixture.
class MixtureSampler {
 public:
  explicit MixtureSampler(const GaussianMixture& gm);
  Vector draw(std::mt19937_64& rng) const;

 private:
  std::vector<double> cumulative_;
  std::vector<Vector> means_;
  std::vector<Matrix> factors_;
};

struct SdeOptions {
  std::size_t n_paths = 1000;
  int steps = 400;
  std::uint64_t seed = 0;
  bool keep_paths = true;  ///< false: keep only the terminal state
};

struct Trajectory {
  std::vector<double> times;
  Matrix states;  ///< one row per kept time
  std::uint64_t seed = 0;
  bool failed = false;  ///< state went non-finite; integration stopped
  long clamped = 0;     ///< drift evaluations that hit the density floor
};

struct SdeResult {
  std::vector<Trajectory> paths;
  std::size_t failed = 0;
  long clamped = 0;

  /// Terminal states of the paths that did not fail, one per row.
  Matrix terminal_states() const;
};

/// Euler-Maruyama for dX = s_t(X) dt + dW on [0, 1] with X_0 ~ eval_at(grid, 0).
/// Path i uses the seed derive_seed(seed, i), so results do not depend on
/// the execution mode.
SdeResult integrate_sde(const ProtocolGrid& grid, const SdeOptions& options,
                        Execution exec = Execution::parallel);

/// eval_at at n uniformly spaced times including both endpoints.
std::vector<GaussianMixture> movie_frames(const ProtocolGrid& grid, int n_frames);

}  // namespace cas
