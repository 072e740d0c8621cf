#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cas {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Absolute density floor used where a division by p(x) cannot be avoided.
inline constexpr double kDensityFloor = 1e-300;

struct Violation {
  enum class Kind { shape, non_finite, simplex, asymmetric, not_positive_definite };
  Kind kind;
  int component = -1;
  std::string message;
};

std::string to_string(Violation::Kind kind);

/// Checks the mixture invariants on raw parameters and returns the first
/// violation found, in the order: shape, finiteness, simplex, symmetry, PD.
std::optional<Violation> validate(const Vector& weights, const std::vector<Vector>& means,
                                  const std::vector<Matrix>& covs);

/// K-component Gaussian mixture in d dimensions. Immutable once built.
///
/// The public constructor validates and symmetrizes ((S + S^T)/2) every
/// covariance; it throws ValidationError with the violation report. Convex
/// combinations of valid mixtures are valid by construction and skip the
/// eigenvalue check.
class GaussianMixture {
 public:
  GaussianMixture(Vector weights, std::vector<Vector> means, std::vector<Matrix> covs);

  /// Single Gaussian N(mean, cov).
  static GaussianMixture gaussian(const Vector& mean, const Matrix& cov);
  /// K identical N(0, I_d) components with weights 1/K.
  static GaussianMixture standard(int K, int d);

  int components() const { return static_cast<int>(means_.size()); }
  int dim() const { return static_cast<int>(weights_.size() == 0 ? 0 : means_.front().size()); }

  const Vector& weights() const { return weights_; }
  const std::vector<Vector>& means() const { return means_; }
  const std::vector<Matrix>& covs() const { return covs_; }
  double weight(int k) const { return weights_(k); }
  const Vector& mean(int k) const { return means_[static_cast<std::size_t>(k)]; }
  const Matrix& cov(int k) const { return covs_[static_cast<std::size_t>(k)]; }

  /// Number of stored reals: K * (d^2 + d + 1).
  std::size_t parameter_count() const;

  bool operator==(const GaussianMixture& other) const;

 private:
  struct Unchecked {};
  GaussianMixture(Unchecked, Vector weights, std::vector<Vector> means, std::vector<Matrix> covs);

  friend GaussianMixture convex_combine(const GaussianMixture&, const GaussianMixture&, double);
  friend GaussianMixture assume_valid(Vector, std::vector<Vector>, std::vector<Matrix>);

  Vector weights_;
  std::vector<Vector> means_;
  std::vector<Matrix> covs_;
};

std::optional<Violation> validate(const GaussianMixture& gm);

/// Builds a mixture from parameters the caller already knows to be valid
/// (e.g. a linear map with nonnegative row-stochastic coefficients). Only
/// symmetrizes; no eigenvalue check.
GaussianMixture assume_valid(Vector weights, std::vector<Vector> means, std::vector<Matrix> covs);

struct Moments {
  Vector mean;
  Matrix cov;
};

/// Overall mean and covariance, by the law of total variance.
Moments overall_moments(const GaussianMixture& gm);

/// Componentwise (1 - alpha) * a + alpha * b on weights, means and covariances.
/// Components are index-aligned; no matching is performed.
GaussianMixture convex_combine(const GaussianMixture& a, const GaussianMixture& b, double alpha);

/// Draws n points (rows of the result). Deterministic given seed.
Matrix sample(const GaussianMixture& gm, std::uint64_t seed, std::size_t n);

/// Pre-factorized mixture for repeated density / score queries.
class MixtureEvaluator {
 public:
  explicit MixtureEvaluator(const GaussianMixture& gm);

  int components() const { return static_cast<int>(parts_.size()); }
  int dim() const { return dim_; }

  /// log(pi_k g_k(x)) and Sigma_k^{-1}(x - m_k) for each component.
  struct ComponentTerms {
    std::vector<double> log_weighted;
    std::vector<Vector> precision_residual;
  };
  ComponentTerms component_terms(const Vector& x) const;

  double density(const Vector& x) const;
  double log_density(const Vector& x) const;

  struct Score {
    Vector gradient;
    bool clamped = false;  ///< p(x) fell below kDensityFloor
  };
  /// Gradient of log p. Uses log-sum-exp responsibilities, so the value is
  /// exact in the tails; `clamped` reports p(x) < kDensityFloor.
  Score score(const Vector& x) const;

  /// Posterior responsibilities pi_k g_k / p, and log p.
  std::vector<double> responsibilities(const ComponentTerms& terms, double* log_p = nullptr) const;

 private:
  struct Part {
    double log_weight;
    double log_norm;  ///< -0.5 (d log 2pi + log det Sigma)
    Vector mean;
    Eigen::LLT<Matrix> llt;
  };
  int dim_ = 0;
  std::vector<Part> parts_;
};

double density(const GaussianMixture& gm, const Vector& x);
MixtureEvaluator::Score score(const GaussianMixture& gm, const Vector& x);

}  // namespace cas
