#include "cas/gaussian_mixture.hpp"

#include "cas/errors.hpp"

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace cas {

namespace {

constexpr double kSimplexTol = 1e-12;
constexpr double kSymmetryTol = 1e-10;
constexpr double kEigenRatio = 1e-10;

Matrix symmetrized(const Matrix& s) { return 0.5 * (s + s.transpose()); }

}  // namespace

std::string to_string(Violation::Kind kind) {
  switch (kind) {
    case Violation::Kind::shape: return "shape";
    case Violation::Kind::non_finite: return "non-finite";
    case Violation::Kind::simplex: return "simplex";
    case Violation::Kind::asymmetric: return "asymmetric";
    case Violation::Kind::not_positive_definite: return "not-positive-definite";
  }
  return "unknown";
}

std::optional<Violation> validate(const Vector& weights, const std::vector<Vector>& means,
                                  const std::vector<Matrix>& covs) {
  using K = Violation::Kind;
  const auto n = static_cast<std::size_t>(weights.size());
  if (n == 0) return Violation{K::shape, -1, "mixture has no components"};
  if (means.size() != n || covs.size() != n) {
    return Violation{K::shape, -1,
                     fmt::format("component count mismatch: {} weights, {} means, {} covariances",
                                 n, means.size(), covs.size())};
  }
  const auto d = means.front().size();
  if (d == 0) return Violation{K::shape, 0, "zero-dimensional mean"};
  for (std::size_t k = 0; k < n; ++k) {
    const int ik = static_cast<int>(k);
    if (means[k].size() != d)
      return Violation{K::shape, ik, fmt::format("component {} mean has dimension {} (expected {})",
                                                 k, means[k].size(), d)};
    if (covs[k].rows() != d || covs[k].cols() != d)
      return Violation{K::shape, ik, fmt::format("component {} covariance is {}x{} (expected {}x{})",
                                                 k, covs[k].rows(), covs[k].cols(), d, d)};
    if (!std::isfinite(weights(ik)) || !means[k].allFinite() || !covs[k].allFinite())
      return Violation{K::non_finite, ik, fmt::format("component {} has non-finite parameters", k)};
  }

  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double w = weights(static_cast<Eigen::Index>(k));
    if (w < 0.0)
      return Violation{K::simplex, static_cast<int>(k), fmt::format("weight {} is negative ({})", k, w)};
    total += w;
  }
  if (std::abs(total - 1.0) > kSimplexTol)
    return Violation{K::simplex, -1, fmt::format("weights sum to {:.17g}, not 1", total)};

  for (std::size_t k = 0; k < n; ++k) {
    const Matrix& s = covs[k];
    const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
    const double asym = (s - s.transpose()).cwiseAbs().maxCoeff();
    if (asym > kSymmetryTol * scale)
      return Violation{K::asymmetric, static_cast<int>(k),
                       fmt::format("covariance {} asymmetric by {:.3g}", k, asym)};
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(s), Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || lo < kEigenRatio * hi)
      return Violation{K::not_positive_definite, static_cast<int>(k),
                       fmt::format("covariance {} eigenvalues in [{:.3g}, {:.3g}]", k, lo, hi)};
  }
  return std::nullopt;
}

GaussianMixture::GaussianMixture(Vector weights, std::vector<Vector> means, std::vector<Matrix> covs) {
  if (auto v = cas::validate(weights, means, covs)) {
    throw ValidationError(fmt::format("invalid mixture ({}): {}", to_string(v->kind), v->message));
  }
  for (auto& c : covs) c = symmetrized(c);
  weights_ = std::move(weights);
  means_ = std::move(means);
  covs_ = std::move(covs);
}

GaussianMixture::GaussianMixture(Unchecked, Vector weights, std::vector<Vector> means,
                                 std::vector<Matrix> covs)
    : weights_(std::move(weights)), means_(std::move(means)), covs_(std::move(covs)) {}

GaussianMixture assume_valid(Vector weights, std::vector<Vector> means, std::vector<Matrix> covs) {
  for (auto& c : covs) c = symmetrized(c);
  return GaussianMixture(GaussianMixture::Unchecked{}, std::move(weights), std::move(means),
                         std::move(covs));
}

GaussianMixture GaussianMixture::gaussian(const Vector& mean, const Matrix& cov) {
  return GaussianMixture(Vector::Ones(1), {mean}, {cov});
}

GaussianMixture GaussianMixture::standard(int K, int d) {
  if (K < 1 || d < 1) throw ConfigError(fmt::format("standard prior needs K, d >= 1 (got {}, {})", K, d));
  return GaussianMixture(Vector::Constant(K, 1.0 / K),
                         std::vector<Vector>(static_cast<std::size_t>(K), Vector::Zero(d)),
                         std::vector<Matrix>(static_cast<std::size_t>(K), Matrix::Identity(d, d)));
}

std::size_t GaussianMixture::parameter_count() const {
  const auto d = static_cast<std::size_t>(dim());
  return static_cast<std::size_t>(components()) * (d * d + d + 1);
}

bool GaussianMixture::operator==(const GaussianMixture& other) const {
  if (components() != other.components() || dim() != other.dim()) return false;
  if (weights_ != other.weights_) return false;
  for (int k = 0; k < components(); ++k) {
    if (mean(k) != other.mean(k) || cov(k) != other.cov(k)) return false;
  }
  return true;
}

std::optional<Violation> validate(const GaussianMixture& gm) {
  return validate(gm.weights(), gm.means(), gm.covs());
}

Moments overall_moments(const GaussianMixture& gm) {
  const int d = gm.dim();
  Vector mu = Vector::Zero(d);
  Matrix second = Matrix::Zero(d, d);
  for (int k = 0; k < gm.components(); ++k) {
    const double w = gm.weight(k);
    mu += w * gm.mean(k);
    second += w * (gm.cov(k) + gm.mean(k) * gm.mean(k).transpose());
  }
  Matrix cov = second - mu * mu.transpose();
  return {std::move(mu), 0.5 * (cov + cov.transpose())};
}

GaussianMixture convex_combine(const GaussianMixture& a, const GaussianMixture& b, double alpha) {
  if (a.components() != b.components() || a.dim() != b.dim()) {
    throw ConfigError(fmt::format("convex_combine: shape mismatch (K={}, d={}) vs (K={}, d={})",
                                  a.components(), a.dim(), b.components(), b.dim()));
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ConfigError(fmt::format("convex_combine: alpha {} outside [0, 1]", alpha));
  }
  const double beta = 1.0 - alpha;
  const auto K = static_cast<std::size_t>(a.components());
  std::vector<Vector> means(K);
  std::vector<Matrix> covs(K);
  for (std::size_t k = 0; k < K; ++k) {
    means[k] = beta * a.means()[k] + alpha * b.means()[k];
    covs[k] = beta * a.covs()[k] + alpha * b.covs()[k];
  }
  Vector w = beta * a.weights() + alpha * b.weights();
  return GaussianMixture(GaussianMixture::Unchecked{}, std::move(w), std::move(means), std::move(covs));
}

Matrix sample(const GaussianMixture& gm, std::uint64_t seed, std::size_t n) {
  const int d = gm.dim();
  const int K = gm.components();
  std::vector<Matrix> factors;
  factors.reserve(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    Eigen::LLT<Matrix> llt(gm.cov(k));
    if (llt.info() != Eigen::Success) {
      throw NumericalError(fmt::format("sample: Cholesky factorization of component {} failed", k));
    }
    factors.push_back(llt.matrixL());
  }
  std::mt19937_64 rng(seed);
  std::discrete_distribution<int> pick(gm.weights().data(), gm.weights().data() + K);
  std::normal_distribution<double> normal(0.0, 1.0);

  Matrix out(static_cast<Eigen::Index>(n), d);
  Vector z(d);
  for (std::size_t i = 0; i < n; ++i) {
    const int k = pick(rng);
    for (int j = 0; j < d; ++j) z(j) = normal(rng);
    out.row(static_cast<Eigen::Index>(i)) = (gm.mean(k) + factors[static_cast<std::size_t>(k)] * z).transpose();
  }
  return out;
}

MixtureEvaluator::MixtureEvaluator(const GaussianMixture& gm) : dim_(gm.dim()) {
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  parts_.reserve(static_cast<std::size_t>(gm.components()));
  for (int k = 0; k < gm.components(); ++k) {
    Part p{std::log(gm.weight(k)), 0.0, gm.mean(k), Eigen::LLT<Matrix>(gm.cov(k))};
    if (p.llt.info() != Eigen::Success) {
      throw NumericalError(fmt::format("covariance {} is not positive definite", k));
    }
    const double log_det = 2.0 * p.llt.matrixLLT().diagonal().array().log().sum();
    p.log_norm = -0.5 * (dim_ * log_2pi + log_det);
    parts_.push_back(std::move(p));
  }
}

MixtureEvaluator::ComponentTerms MixtureEvaluator::component_terms(const Vector& x) const {
  ComponentTerms t;
  t.log_weighted.reserve(parts_.size());
  t.precision_residual.reserve(parts_.size());
  for (const Part& p : parts_) {
    Vector r = x - p.mean;
    Vector pr = p.llt.solve(r);
    t.log_weighted.push_back(p.log_weight + p.log_norm - 0.5 * r.dot(pr));
    t.precision_residual.push_back(std::move(pr));
  }
  return t;
}

std::vector<double> MixtureEvaluator::responsibilities(const ComponentTerms& terms, double* log_p) const {
  const double top = *std::max_element(terms.log_weighted.begin(), terms.log_weighted.end());
  std::vector<double> r(terms.log_weighted.size(), 0.0);
  if (!std::isfinite(top)) {
    if (log_p) *log_p = -std::numeric_limits<double>::infinity();
    return r;
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < r.size(); ++k) {
    r[k] = std::exp(terms.log_weighted[k] - top);
    sum += r[k];
  }
  for (double& v : r) v /= sum;
  if (log_p) *log_p = top + std::log(sum);
  return r;
}

double MixtureEvaluator::log_density(const Vector& x) const {
  double lp = 0.0;
  responsibilities(component_terms(x), &lp);
  return lp;
}

double MixtureEvaluator::density(const Vector& x) const {
  double p = 0.0;
  for (const Part& part : parts_) {
    Vector r = x - part.mean;
    p += std::exp(part.log_weight + part.log_norm - 0.5 * r.dot(part.llt.solve(r)));
  }
  return p;
}

MixtureEvaluator::Score MixtureEvaluator::score(const Vector& x) const {
  const ComponentTerms terms = component_terms(x);
  double log_p = 0.0;
  const std::vector<double> resp = responsibilities(terms, &log_p);
  Score s{Vector::Zero(dim_), log_p < std::log(kDensityFloor)};
  for (std::size_t k = 0; k < resp.size(); ++k) s.gradient -= resp[k] * terms.precision_residual[k];
  return s;
}

double density(const GaussianMixture& gm, const Vector& x) { return MixtureEvaluator(gm).density(x); }

MixtureEvaluator::Score score(const GaussianMixture& gm, const Vector& x) {
  return MixtureEvaluator(gm).score(x);
}

}  // namespace cas
