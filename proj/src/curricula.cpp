#include "cas/curricula.hpp"

#include "cas/errors.hpp"
#include "cas/gm_json.hpp"
#include "cas/parallel.hpp"

#include <fmt/format.h>

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

namespace cas {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

const std::pair<StreamKind, const char*> kKindNames[] = {
    {StreamKind::circular, "circular"},
    {StreamKind::linear, "linear"},
    {StreamKind::triangle, "triangle"},
    {StreamKind::crowding, "crowding"},
    {StreamKind::embedded, "embedded"},
    {StreamKind::split_merge, "split_merge"},
    {StreamKind::rotating_dominance, "rotating_dominance"},
    {StreamKind::external, "external"},
};

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

GaussianMixture ring_day(const StreamConfig& cfg, int m, const std::vector<double>& radii) {
  const Eigen::Vector2d centre = circle_centre(cfg.R, cfg.P, m);
  const int K = static_cast<int>(radii.size());
  std::vector<Vector> means;
  std::vector<Matrix> covs;
  for (int k = 0; k < K; ++k) {
    const double theta = kTwoPi * m / cfg.P + kTwoPi * k / K;
    Vector mean = Vector::Zero(cfg.d);
    mean(0) = centre(0) + radii[static_cast<std::size_t>(k)] * std::cos(theta);
    mean(1) = centre(1) + radii[static_cast<std::size_t>(k)] * std::sin(theta);
    means.push_back(std::move(mean));
    covs.push_back(cfg.cov_scale * Matrix::Identity(cfg.d, cfg.d));
  }
  return GaussianMixture(Vector::Constant(K, 1.0 / K), std::move(means), std::move(covs));
}

double ramp(int m, int start, int days, double from, double to) {
  const double progress = std::clamp(static_cast<double>(m - start + 1) / days, 0.0, 1.0);
  return from + (to - from) * progress;
}

GaussianMixture rotating_base(const StreamConfig& cfg) {
  return cfg.components_file.empty() ? synthetic_class_fixture() : load_gm_file(cfg.components_file);
}

}  // namespace

std::string to_string(StreamKind kind) {
  for (const auto& [k, name] : kKindNames)
    if (k == kind) return name;
  return "unknown";
}

StreamKind stream_kind_from_string(const std::string& name) {
  for (const auto& [k, n] : kKindNames)
    if (name == n) return k;
  throw ConfigError(fmt::format("unknown stream kind '{}'", name));
}

StreamConfig default_stream(StreamKind kind) {
  StreamConfig cfg;
  cfg.kind = kind;
  switch (kind) {
    case StreamKind::circular:
    case StreamKind::linear:
    case StreamKind::external:
      break;
    case StreamKind::triangle:
    case StreamKind::crowding:
    case StreamKind::split_merge:
      cfg.K = 3;
      cfg.cov_scale = 0.3;
      break;
    case StreamKind::embedded:
      cfg.K = 3;
      cfg.d = 16;
      cfg.cov_scale = 0.3;
      break;
    case StreamKind::rotating_dominance:
      cfg.K = 3;
      cfg.d = 12;
      cfg.P = 30.0;
      break;
  }
  return cfg;
}

void validate_stream(const StreamConfig& cfg) {
  require(cfg.n_days >= 1, fmt::format("n_days must be >= 1 (got {})", cfg.n_days));
  require(std::isfinite(cfg.P) && cfg.P > 0.0, fmt::format("period P must be > 0 (got {})", cfg.P));
  require(std::isfinite(cfg.cov_scale) && cfg.cov_scale > 0.0,
          fmt::format("cov_scale must be > 0 (got {})", cfg.cov_scale));
  require(std::isfinite(cfg.R) && std::isfinite(cfg.r) && cfg.r >= 0.0, "R and r must be finite, r >= 0");
  require(std::isfinite(cfg.A), "A must be finite");
  require(cfg.d >= 1 && cfg.K >= 1, "d and K must be >= 1");
  switch (cfg.kind) {
    case StreamKind::circular:
      require(cfg.K == 1 && cfg.d >= 2, "circular stream needs K = 1 and d >= 2");
      break;
    case StreamKind::linear:
      require(cfg.K == 1, "linear stream needs K = 1");
      break;
    case StreamKind::triangle:
      require(cfg.K == 3 && cfg.d >= 2, "triangle stream needs K = 3 and d >= 2");
      break;
    case StreamKind::crowding:
      require(cfg.d >= 2, "crowding stream needs d >= 2");
      break;
    case StreamKind::split_merge: {
      const auto& p = cfg.phases;
      require(cfg.K == 3 && cfg.d >= 2, "split_merge stream needs K = 3 and d >= 2");
      require(1 < p.merge_start && p.merge_start < p.split_start && p.split_start < p.collapse_start,
              "split_merge phases must satisfy 1 < merge_start < split_start < collapse_start");
      require(p.ramp_days >= 1, "split_merge ramp_days must be >= 1");
      require(p.merged_radius >= 0.0 && p.collapsed_radius >= 0.0, "split_merge radii must be >= 0");
      break;
    }
    case StreamKind::embedded:
      require(cfg.d >= 2, "embedded stream needs d >= 2");
      require(cfg.base != StreamKind::embedded && cfg.base != StreamKind::rotating_dominance &&
                  cfg.base != StreamKind::external,
              fmt::format("embedded base must be a 2-D synthetic stream (got {})", to_string(cfg.base)));
      require(!cfg.nuisance.enabled || (std::isfinite(cfg.nuisance.speed) && cfg.nuisance.speed >= 0.0),
              "nuisance speed must be >= 0");
      break;
    case StreamKind::rotating_dominance:
      break;
    case StreamKind::external:
      require(!cfg.days_file.empty(), "external stream needs days_file");
      break;
  }
}

StreamConfig stream_config_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
    throw ConfigError("stream config must be an object with a string 'kind'");
  }
  StreamConfig cfg = default_stream(stream_kind_from_string(j["kind"].get<std::string>()));
  static const std::set<std::string> known = {"kind", "n_days",   "d",     "K",     "R",
                                              "P",    "cov_scale", "r",    "A",     "base",
                                              "nuisance", "phases", "components_file", "days_file"};
  try {
    for (const auto& [key, value] : j.items()) {
      if (!known.contains(key)) throw ConfigError(fmt::format("unknown stream field '{}'", key));
    }
    if (j.contains("base")) {
      cfg.base = stream_kind_from_string(j["base"].get<std::string>());
      if (!j.contains("K") && cfg.base != StreamKind::triangle) cfg.K = default_stream(cfg.base).K;
      if (!j.contains("cov_scale")) cfg.cov_scale = default_stream(cfg.base).cov_scale;
    }
    if (j.contains("n_days")) cfg.n_days = j["n_days"].get<int>();
    if (j.contains("d")) cfg.d = j["d"].get<int>();
    if (j.contains("K")) cfg.K = j["K"].get<int>();
    if (j.contains("R")) cfg.R = j["R"].get<double>();
    if (j.contains("P")) cfg.P = j["P"].get<double>();
    if (j.contains("cov_scale")) cfg.cov_scale = j["cov_scale"].get<double>();
    if (j.contains("r")) cfg.r = j["r"].get<double>();
    if (j.contains("A")) cfg.A = j["A"].get<double>();
    if (j.contains("nuisance")) {
      const auto& n = j["nuisance"];
      if (n.is_null() || (n.is_string() && n.get<std::string>() == "none")) {
        cfg.nuisance.enabled = false;
      } else {
        cfg.nuisance.enabled = n.value("enabled", true);
        cfg.nuisance.speed = n.value("speed", cfg.nuisance.speed);
      }
    }
    if (j.contains("phases")) {
      const auto& p = j["phases"];
      cfg.phases.merge_start = p.value("merge_start", cfg.phases.merge_start);
      cfg.phases.split_start = p.value("split_start", cfg.phases.split_start);
      cfg.phases.collapse_start = p.value("collapse_start", cfg.phases.collapse_start);
      cfg.phases.ramp_days = p.value("ramp_days", cfg.phases.ramp_days);
      cfg.phases.merged_radius = p.value("merged_radius", cfg.phases.merged_radius);
      cfg.phases.collapsed_radius = p.value("collapsed_radius", cfg.phases.collapsed_radius);
    }
    if (j.contains("components_file")) cfg.components_file = j["components_file"].get<std::string>();
    if (j.contains("days_file")) cfg.days_file = j["days_file"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("stream config: {}", e.what()));
  }
  validate_stream(cfg);
  return cfg;
}

nlohmann::json to_json(const StreamConfig& cfg) {
  nlohmann::json j = {{"kind", to_string(cfg.kind)}, {"n_days", cfg.n_days}, {"d", cfg.d},
                      {"K", cfg.K},                  {"R", cfg.R},           {"P", cfg.P},
                      {"cov_scale", cfg.cov_scale},  {"r", cfg.r},           {"A", cfg.A}};
  if (cfg.kind == StreamKind::embedded) {
    j["base"] = to_string(cfg.base);
    j["nuisance"] = {{"enabled", cfg.nuisance.enabled}, {"speed", cfg.nuisance.speed}};
  }
  if (cfg.kind == StreamKind::split_merge) {
    const auto& p = cfg.phases;
    j["phases"] = {{"merge_start", p.merge_start},     {"split_start", p.split_start},
                   {"collapse_start", p.collapse_start}, {"ramp_days", p.ramp_days},
                   {"merged_radius", p.merged_radius},   {"collapsed_radius", p.collapsed_radius}};
  }
  if (!cfg.components_file.empty()) j["components_file"] = cfg.components_file;
  if (!cfg.days_file.empty()) j["days_file"] = cfg.days_file;
  return j;
}

bool stream_uses_seed(const StreamConfig& cfg) {
  return cfg.kind == StreamKind::embedded && cfg.nuisance.enabled && cfg.d > 2;
}

Eigen::Vector2d circle_centre(double R, double P, int m) {
  const double phase = kTwoPi * m / P;
  return {R * std::cos(phase), R * std::sin(phase)};
}

std::vector<GaussianMixture> circular_stream(const StreamConfig& cfg) {
  std::vector<GaussianMixture> out;
  for (int m = 1; m <= cfg.n_days; ++m) {
    Vector mean = Vector::Zero(cfg.d);
    mean.head<2>() = circle_centre(cfg.R, cfg.P, m);
    out.push_back(GaussianMixture::gaussian(mean, cfg.cov_scale * Matrix::Identity(cfg.d, cfg.d)));
  }
  return out;
}

std::vector<GaussianMixture> linear_stream(const StreamConfig& cfg) {
  const double speed = kTwoPi * cfg.R / cfg.P;
  std::vector<GaussianMixture> out;
  for (int m = 1; m <= cfg.n_days; ++m) {
    Vector mean = Vector::Zero(cfg.d);
    mean(0) = speed * m;
    out.push_back(GaussianMixture::gaussian(mean, cfg.cov_scale * Matrix::Identity(cfg.d, cfg.d)));
  }
  return out;
}

std::vector<GaussianMixture> crowding_stream(const StreamConfig& cfg) {
  const std::vector<double> radii(static_cast<std::size_t>(cfg.K), cfg.r);
  std::vector<GaussianMixture> out;
  for (int m = 1; m <= cfg.n_days; ++m) out.push_back(ring_day(cfg, m, radii));
  return out;
}

std::vector<GaussianMixture> triangle_stream(const StreamConfig& cfg) {
  if (cfg.K != 3) throw ConfigError("triangle stream needs K = 3");
  return crowding_stream(cfg);
}

std::vector<GaussianMixture> embedded_stream(const std::vector<GaussianMixture>& base, int d_target,
                                             double cov_scale, const Nuisance& nuisance, std::uint64_t seed) {
  if (base.empty()) return {};
  const int d0 = base.front().dim();
  if (d_target < d0) {
    throw ConfigError(fmt::format("cannot embed a {}-D stream into {} dimensions", d0, d_target));
  }
  const int extra = d_target - d0;
  std::vector<std::mt19937_64> walkers;
  for (int i = 0; i < extra; ++i) walkers.emplace_back(derive_seed(seed, static_cast<std::uint64_t>(i)));
  std::normal_distribution<double> step(0.0, 1.0);
  Vector offset = Vector::Zero(extra);

  std::vector<GaussianMixture> out;
  out.reserve(base.size());
  for (const auto& day : base) {
    if (nuisance.enabled) {
      for (int i = 0; i < extra; ++i) offset(i) += nuisance.speed * step(walkers[static_cast<std::size_t>(i)]);
    }
    std::vector<Vector> means;
    std::vector<Matrix> covs;
    for (int k = 0; k < day.components(); ++k) {
      Vector mean(d_target);
      mean << day.mean(k), offset;
      Matrix cov = cov_scale * Matrix::Identity(d_target, d_target);
      cov.topLeftCorner(d0, d0) = day.cov(k);
      means.push_back(std::move(mean));
      covs.push_back(std::move(cov));
    }
    out.emplace_back(day.weights(), std::move(means), std::move(covs));
  }
  return out;
}

double split_merge_radius(const StreamConfig& cfg, int k, int m) {
  const auto& p = cfg.phases;
  const double r = cfg.r;
  if (m >= p.collapse_start) return ramp(m, p.collapse_start, p.ramp_days, r, p.collapsed_radius);
  if (k == 2) return r;
  if (m >= p.split_start) return ramp(m, p.split_start, p.ramp_days, p.merged_radius, r);
  if (m >= p.merge_start) return ramp(m, p.merge_start, p.ramp_days, r, p.merged_radius);
  return r;
}

std::vector<GaussianMixture> split_merge_stream(const StreamConfig& cfg) {
  if (cfg.K != 3) throw ConfigError("split_merge stream needs K = 3");
  std::vector<GaussianMixture> out;
  for (int m = 1; m <= cfg.n_days; ++m) {
    std::vector<double> radii;
    for (int k = 0; k < 3; ++k) radii.push_back(split_merge_radius(cfg, k, m));
    out.push_back(ring_day(cfg, m, radii));
  }
  return out;
}

Vector rotating_weights(int K, double A, double P, int m) {
  Vector z(K);
  for (int k = 0; k < K; ++k) z(k) = A * std::cos(kTwoPi * m / P + kTwoPi * k / K);
  z.array() -= z.maxCoeff();
  z = z.array().exp();
  return z / z.sum();
}

std::vector<GaussianMixture> rotating_dominance_stream(const GaussianMixture& base, double A, double P,
                                                       int n_days) {
  std::vector<GaussianMixture> out;
  for (int m = 1; m <= n_days; ++m) {
    Vector w = rotating_weights(base.components(), A, P, m);
    w /= w.sum();
    out.emplace_back(std::move(w), base.means(), base.covs());
  }
  return out;
}

GaussianMixture synthetic_class_fixture(double sep, std::uint64_t seed) {
  constexpr int d = 12;
  constexpr int K = 3;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Vector> means;
  std::vector<Matrix> covs;
  for (int k = 0; k < K; ++k) {
    Vector mean = Vector::Zero(d);
    mean(k) = sep;
    mean(k + 3) = -sep / 2.0;
    means.push_back(std::move(mean));
  }
  for (int k = 0; k < K; ++k) {
    Matrix g(d, d);
    for (int i = 0; i < d; ++i)
      for (int c = 0; c < d; ++c) g(i, c) = normal(rng);
    const Matrix q = Eigen::HouseholderQR<Matrix>(g).householderQ();
    const Vector spectrum = Vector::LinSpaced(d, 2.0, 0.2) * (1.0 + 0.3 * k);
    covs.push_back(q * spectrum.asDiagonal() * q.transpose());
  }
  return GaussianMixture(Vector::Constant(K, 1.0 / K), std::move(means), std::move(covs));
}

std::vector<GaussianMixture> generate_stream(const StreamConfig& cfg, std::uint64_t seed) {
  validate_stream(cfg);
  switch (cfg.kind) {
    case StreamKind::circular:
      return circular_stream(cfg);
    case StreamKind::linear:
      return linear_stream(cfg);
    case StreamKind::triangle:
      return triangle_stream(cfg);
    case StreamKind::crowding:
      return crowding_stream(cfg);
    case StreamKind::split_merge:
      return split_merge_stream(cfg);
    case StreamKind::embedded: {
      StreamConfig flat = cfg;
      flat.kind = cfg.base;
      flat.d = 2;
      return embedded_stream(generate_stream(flat), cfg.d, cfg.cov_scale, cfg.nuisance, seed);
    }
    case StreamKind::rotating_dominance:
      return rotating_dominance_stream(rotating_base(cfg), cfg.A, cfg.P, cfg.n_days);
    case StreamKind::external: {
      auto days = mixtures_from_json(read_json_file(cfg.days_file));
      if (days.empty()) throw ConfigError(fmt::format("{}: no days", cfg.days_file));
      for (const auto& day : days) {
        if (day.components() != days.front().components() || day.dim() != days.front().dim()) {
          throw ConfigError(fmt::format("{}: days differ in K or d", cfg.days_file));
        }
      }
      if (static_cast<int>(days.size()) > cfg.n_days) days.erase(days.begin() + cfg.n_days, days.end());
      return days;
    }
  }
  throw ConfigError("unhandled stream kind");
}

GaussianMixture default_prior(const std::vector<GaussianMixture>& stream) {
  if (stream.empty()) throw ConfigError("default prior needs a non-empty stream");
  return GaussianMixture::standard(stream.front().components(), stream.front().dim());
}

}  // namespace cas
