#include "cas/replay_dynamics.hpp"

#include "cas/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace cas {

PathSlice path_slice(const ProtocolGrid& grid, double t) {
  const int j = grid.segment_at(t);
  const GaussianMixture& a = grid.node(j);
  const GaussianMixture& b = grid.node(j + 1);
  const double L = grid.segments();
  const int K = a.components();

  PathSlice s{grid.eval_at(t), (b.weights() - a.weights()) * L, {}, {}};
  s.weight_rate.array() -= s.weight_rate.mean();
  s.mean_rate.reserve(static_cast<std::size_t>(K));
  s.cov_rate.reserve(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    s.mean_rate.push_back((b.mean(k) - a.mean(k)) * L);
    s.cov_rate.push_back((b.cov(k) - a.cov(k)) * L);
  }
  return s;
}

DriftField::DriftField(PathSlice slice, QuadratureOptions quadrature)
    : slice_(std::move(slice)), evaluator_(slice_.gm), quadrature_(quadrature) {
  const GaussianMixture& gm = slice_.gm;
  weights_move_ = slice_.weight_rate.cwiseAbs().sum() > 0.0;
  spectral_.reserve(static_cast<std::size_t>(gm.components()));
  time_scale_ = 0.0;
  for (int k = 0; k < gm.components(); ++k) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(gm.cov(k));
    time_scale_ = std::max(time_scale_, es.eigenvalues().maxCoeff());
    spectral_.push_back({es.eigenvalues(), es.eigenvectors()});
  }
}

Vector DriftField::shape_current(const Vector& x) const {
  const auto terms = evaluator_.component_terms(x);
  Vector j = Vector::Zero(x.size());
  for (std::size_t k = 0; k < terms.log_weighted.size(); ++k) {
    const double w = std::exp(terms.log_weighted[k]);
    if (w == 0.0) continue;
    j += w * (slice_.mean_rate[k] + 0.5 * slice_.cov_rate[k] * terms.precision_residual[k]);
  }
  return j;
}

// psi(x) = -(2 pi)^{-d/2} sum_k pidot_k int_0^inf f_k(s) ds with
// f_k(s) = exp(-1/2 r^T C^{-1} r) / sqrt(det C), C = Sigma_k + 2 s I, and
// s = lambda (u / (1 - u))^2 mapping [0, 1) onto [0, inf).
double DriftField::psi(const Vector& x, const QuadratureOptions& opt) const {
  if (!weights_move_) return 0.0;
  const int d = static_cast<int>(x.size());
  const double kappa = std::pow(2.0 * std::numbers::pi, -0.5 * d);
  const double lambda = time_scale_;
  std::vector<Vector> rotated;
  for (std::size_t k = 0; k < spectral_.size(); ++k) {
    rotated.push_back(spectral_[k].eigenvectors.transpose() * (x - slice_.gm.means()[k]));
  }
  auto integrand = [&](double u, Eigen::Ref<Vector> value, double& magnitude) {
    const double ratio = u / (1.0 - u);
    const double s = lambda * ratio * ratio;
    const double jacobian = 2.0 * lambda * ratio / ((1.0 - u) * (1.0 - u));
    // The rates sum to zero, so a shared reference kernel can be subtracted
    // from every term. This removes the slowly decaying tail (divergent on its
    // own for d <= 2); log1p keeps log f - log ref accurate at large s.
    const double ref_c = lambda + 2.0 * s;
    const double log_ref = -0.5 * d * std::log(ref_c);
    for (std::size_t k = 0; k < spectral_.size(); ++k) {
      const double rate = slice_.weight_rate(static_cast<Eigen::Index>(k));
      if (rate == 0.0) continue;
      const Vector& e = spectral_[k].eigenvalues;
      double delta = 0.0;
      for (Eigen::Index i = 0; i < e.size(); ++i) {
        const double r = rotated[k](i);
        delta -= 0.5 * (r * r / (e(i) + 2.0 * s) + std::log1p((e(i) - lambda) / ref_c));
      }
      const double term = -kappa * rate * std::exp(log_ref) * std::expm1(delta) * jacobian;
      value(0) += term;
      magnitude += std::abs(term);
    }
  };
  return integrate_unit(integrand, 1, opt)(0);
}

Vector DriftField::psi_gradient(const Vector& x, const QuadratureOptions& opt) const {
  const int d = static_cast<int>(x.size());
  if (!weights_move_) return Vector::Zero(d);
  const double kappa = std::pow(2.0 * std::numbers::pi, -0.5 * d);
  const double lambda = time_scale_;
  std::vector<Vector> rotated;
  for (std::size_t k = 0; k < spectral_.size(); ++k) {
    rotated.push_back(spectral_[k].eigenvectors.transpose() * (x - slice_.gm.means()[k]));
  }
  auto integrand = [&](double u, Eigen::Ref<Vector> value, double& magnitude) {
    const double ratio = u / (1.0 - u);
    const double s = lambda * ratio * ratio;
    const double jacobian = 2.0 * lambda * ratio / ((1.0 - u) * (1.0 - u));
    for (std::size_t k = 0; k < spectral_.size(); ++k) {
      const double rate = slice_.weight_rate(static_cast<Eigen::Index>(k));
      if (rate == 0.0) continue;
      const Vector c = spectral_[k].eigenvalues.array() + 2.0 * s;
      const double log_f = -0.5 * (rotated[k].array().square() / c.array()).sum() - 0.5 * c.array().log().sum();
      const Vector scaled = rotated[k].array() / c.array();
      const double coeff = kappa * rate * std::exp(log_f) * jacobian;
      value += coeff * (spectral_[k].eigenvectors * scaled);
      magnitude += std::abs(coeff) * scaled.norm();
    }
  };
  return integrate_unit(integrand, d, opt);
}

DriftField::Value DriftField::drift(const Vector& x) const {
  const auto terms = evaluator_.component_terms(x);
  double log_p = 0.0;
  const std::vector<double> resp = evaluator_.responsibilities(terms, &log_p);
  Value out{Vector::Zero(x.size()), false};
  for (std::size_t k = 0; k < resp.size(); ++k) {
    if (resp[k] == 0.0) continue;
    const Vector& pr = terms.precision_residual[k];
    // Shape current over p, plus half the score.
    out.drift += resp[k] * (slice_.mean_rate[k] + 0.5 * slice_.cov_rate[k] * pr - 0.5 * pr);
  }
  if (weights_move_) {
    const double p = std::exp(log_p);
    out.clamped = !(p >= kDensityFloor);
    out.drift -= psi_gradient(x) / std::max(p, kDensityFloor);
  }
  return out;
}

Vector DriftField::drift_constant_weights(const Vector& x) const {
  const auto terms = evaluator_.component_terms(x);
  const std::vector<double> resp = evaluator_.responsibilities(terms);
  Vector s = Vector::Zero(x.size());
  for (std::size_t k = 0; k < resp.size(); ++k) {
    if (resp[k] == 0.0) continue;
    const Vector& pr = terms.precision_residual[k];
    s += resp[k] * (slice_.mean_rate[k] + 0.5 * slice_.cov_rate[k] * pr - 0.5 * pr);
  }
  return s;
}

Vector shape_current(const PathSlice& slice, const Vector& x) { return DriftField(slice).shape_current(x); }
Vector poisson_psi_grad(const PathSlice& slice, const Vector& x) { return DriftField(slice).psi_gradient(x); }
DriftField::Value drift(const PathSlice& slice, const Vector& x) { return DriftField(slice).drift(x); }

FpResidual fp_residual(const ProtocolGrid& grid, double t, const std::vector<Vector>& points, Execution exec) {
  constexpr double dt = 1e-5;
  constexpr double dx = 1e-4;
  if (t - dt < 0.0 || t + dt > 1.0 || grid.segment_at(t - dt) != grid.segment_at(t + dt) ||
      grid.segment_at(t) != grid.segment_at(t - dt)) {
    throw ConfigError(fmt::format("fp_residual: t = {} is not inside a protocol segment", t));
  }
  const DriftField field(path_slice(grid, t));
  const MixtureEvaluator later(grid.eval_at(t + dt));
  const MixtureEvaluator earlier(grid.eval_at(t - dt));

  auto current = [&](const Vector& y) -> Vector {
    const double p = field.density(y);
    const Vector score = field.evaluator().score(y).gradient;
    return field.drift(y).drift * p - 0.5 * p * score;
  };

  const auto n = points.size();
  std::vector<double> time_derivative(n), balance(n), dens(n);
  auto kernel = [&](std::size_t i) {
    const Vector& x = points[i];
    time_derivative[i] = (later.density(x) - earlier.density(x)) / (2.0 * dt);
    double div = 0.0;
    for (Eigen::Index c = 0; c < x.size(); ++c) {
      Vector hi = x, lo = x;
      hi(c) += dx;
      lo(c) -= dx;
      div += (current(hi)(c) - current(lo)(c)) / (2.0 * dx);
    }
    balance[i] = time_derivative[i] + div;
    dens[i] = field.density(x);
  };
  if (exec == Execution::serial) {
    for (std::size_t i = 0; i < n; ++i) kernel(i);
  } else {
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < n; ++i) kernel(i);
  }

  FpResidual out;
  out.points = n;
  if (n == 0) return out;
  double max_dt = 0.0, max_p = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    max_dt = std::max(max_dt, std::abs(time_derivative[i]));
    max_p = std::max(max_p, dens[i]);
  }
  out.scale = std::max(max_dt, 1e-3 * max_p);
  for (std::size_t i = 0; i < n; ++i) {
    const double rel = std::abs(balance[i]) / std::max(std::abs(time_derivative[i]), out.scale);
    out.max_relative = std::max(out.max_relative, rel);
    out.mean_relative += rel / static_cast<double>(n);
  }
  return out;
}

std::vector<Vector> bulk_points(const ProtocolGrid& grid, double t, std::size_t n, std::uint64_t seed) {
  const GaussianMixture gm = grid.eval_at(t);
  const MixtureEvaluator eval(gm);
  const Matrix draws = sample(gm, seed, n);
  double peak = 0.0;
  for (int k = 0; k < gm.components(); ++k) peak = std::max(peak, eval.density(gm.mean(k)));
  std::vector<double> p(n);
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = eval.density(draws.row(static_cast<Eigen::Index>(i)).transpose());
    peak = std::max(peak, p[i]);
  }
  std::vector<Vector> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (p[i] >= 1e-8 * peak) out.emplace_back(draws.row(static_cast<Eigen::Index>(i)).transpose());
  }
  return out;
}

MixtureSampler::MixtureSampler(const GaussianMixture& gm) : means_(gm.means()) {
  double acc = 0.0;
  for (int k = 0; k < gm.components(); ++k) {
    acc += gm.weight(k);
    cumulative_.push_back(acc);
    Eigen::LLT<Matrix> llt(gm.cov(k));
    if (llt.info() != Eigen::Success) {
      throw NumericalError(fmt::format("sampler: Cholesky factorization of component {} failed", k));
    }
    factors_.push_back(llt.matrixL());
  }
}

Vector MixtureSampler::draw(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> uniform(0.0, cumulative_.back());
  std::normal_distribution<double> normal(0.0, 1.0);
  const double u = uniform(rng);
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  const auto k = std::min(static_cast<std::size_t>(it - cumulative_.begin()), cumulative_.size() - 1);
  Vector z(means_[k].size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
  return means_[k] + factors_[k] * z;
}

Matrix SdeResult::terminal_states() const {
  std::vector<const Trajectory*> ok;
  for (const auto& p : paths)
    if (!p.failed) ok.push_back(&p);
  if (ok.empty()) return Matrix(0, 0);
  Matrix out(static_cast<Eigen::Index>(ok.size()), ok.front()->states.cols());
  for (std::size_t i = 0; i < ok.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = ok[i]->states.row(ok[i]->states.rows() - 1);
  }
  return out;
}

SdeResult integrate_sde(const ProtocolGrid& grid, const SdeOptions& options, Execution exec) {
  if (options.steps < 1) throw ConfigError("integrate_sde: steps must be >= 1");
  const int steps = options.steps;
  const double dt = 1.0 / steps;
  const double sqrt_dt = std::sqrt(dt);
  const int d = grid.dim();

  std::vector<DriftField> fields;
  fields.reserve(static_cast<std::size_t>(steps));
  for (int k = 0; k < steps; ++k) fields.emplace_back(path_slice(grid, static_cast<double>(k) / steps));
  const MixtureSampler start(grid.node(0));

  SdeResult result;
  result.paths.resize(options.n_paths);

  auto run_path = [&](std::size_t i) {
    Trajectory& tr = result.paths[i];
    tr.seed = derive_seed(options.seed, i);
    std::mt19937_64 rng(tr.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const Eigen::Index rows = options.keep_paths ? steps + 1 : 1;
    tr.states.resize(rows, d);
    if (options.keep_paths) {
      tr.times.resize(static_cast<std::size_t>(steps) + 1);
      for (int k = 0; k <= steps; ++k) tr.times[static_cast<std::size_t>(k)] = static_cast<double>(k) / steps;
    } else {
      tr.times = {1.0};
    }
    Vector x = start.draw(rng);
    if (options.keep_paths) tr.states.row(0) = x.transpose();
    Vector noise(d);
    try {
      for (int k = 0; k < steps; ++k) {
        const auto v = fields[static_cast<std::size_t>(k)].drift(x);
        tr.clamped += v.clamped ? 1 : 0;
        for (int c = 0; c < d; ++c) noise(c) = normal(rng);
        x += v.drift * dt + sqrt_dt * noise;
        if (!x.allFinite()) {
          tr.failed = true;
          break;
        }
        if (options.keep_paths) tr.states.row(k + 1) = x.transpose();
      }
    } catch (const NumericalError&) {
      tr.failed = true;
    }
    if (!options.keep_paths) tr.states.row(0) = x.transpose();
  };

  const auto n = options.n_paths;
  if (exec == Execution::serial) {
    for (std::size_t i = 0; i < n; ++i) run_path(i);
  } else {
#pragma omp parallel for schedule(dynamic, 16)
    for (std::size_t i = 0; i < n; ++i) run_path(i);
  }
  for (const auto& p : result.paths) {
    result.failed += p.failed ? 1 : 0;
    result.clamped += p.clamped;
  }
  return result;
}

std::vector<GaussianMixture> movie_frames(const ProtocolGrid& grid, int n_frames) {
  if (n_frames < 2) throw ConfigError("movie needs at least two frames");
  std::vector<GaussianMixture> frames;
  frames.reserve(static_cast<std::size_t>(n_frames));
  const int L = grid.segments();
  for (int i = 0; i < n_frames; ++i) {
    const double position = static_cast<double>(i) * L / (n_frames - 1);
    frames.push_back(interpolate_nodes(grid.nodes(), position));
  }
  return frames;
}

}  // namespace cas
