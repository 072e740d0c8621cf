#pragma once

#include "cas/gaussian_mixture.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace cas {

enum class StreamKind { circular, linear, triangle, crowding, embedded, split_merge, rotating_dominance, external };

std::string to_string(StreamKind kind);
StreamKind stream_kind_from_string(const std::string& name);

/// Random-walk drift of the coordinates beyond the first two.
struct Nuisance {
  bool enabled = false;
  double speed = 0.1;  ///< per-day step standard deviation
};

/// Radius schedule of the split-merge curriculum. Each transition ramps
/// linearly over `ramp_days` days starting at the phase's first day.
struct SplitMergePhases {
  int merge_start = 31;
  int split_start = 51;
  int collapse_start = 81;
  int ramp_days = 5;
  double merged_radius = 0.05;
  double collapsed_radius = 0.1;
};

struct StreamConfig {
  StreamKind kind = StreamKind::circular;
  int n_days = 100;
  int d = 2;
  int K = 1;
  double R = 2.0;  ///< radius of the drifting centre
  double P = 50.0;  ///< period in days
  double cov_scale = 0.5;
  double r = 0.8;  ///< component offset radius around the centre
  double A = 2.0;  ///< dominance amplitude
  StreamKind base = StreamKind::triangle;  ///< embedded: the 2-D stream being embedded
  Nuisance nuisance;
  SplitMergePhases phases;
  std::string components_file;  ///< rotating_dominance: fitted components (empty = synthetic fixture)
  std::string days_file;        ///< external: JSON array of per-day mixtures
};

/// Defaults per kind: circular/linear K=1, cov 0.5; triangle/split_merge K=3,
/// r=0.8, cov 0.3; crowding K=3, cov 0.3; embedded over a triangle base with
/// d=16; rotating_dominance A=2, P=30 with d and K taken from its components.
StreamConfig default_stream(StreamKind kind);

/// Checks the invariants for the kind; throws ConfigError.
void validate_stream(const StreamConfig& cfg);

/// Fields absent from the JSON keep the kind's defaults. Unknown keys are errors.
StreamConfig stream_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const StreamConfig& cfg);

/// True when the stream draws random numbers (the run seed matters).
bool stream_uses_seed(const StreamConfig& cfg);

/// Centre of the circular drift on day m: R (cos 2 pi m/P, sin 2 pi m/P).
Eigen::Vector2d circle_centre(double R, double P, int m);

std::vector<GaussianMixture> circular_stream(const StreamConfig& cfg);
std::vector<GaussianMixture> linear_stream(const StreamConfig& cfg);
/// K components at phases 2 pi m/P + 2 pi k/K around the circle centre.
std::vector<GaussianMixture> crowding_stream(const StreamConfig& cfg);
std::vector<GaussianMixture> triangle_stream(const StreamConfig& cfg);

/// Pads each day of `base` to d_target dimensions: the extra mean
/// coordinates are zero or follow a random walk (one generator per
/// coordinate, shared by all components); covariances become cov_scale * I
/// in the padded block.
std::vector<GaussianMixture> embedded_stream(const std::vector<GaussianMixture>& base, int d_target,
                                             double cov_scale, const Nuisance& nuisance, std::uint64_t seed);

/// Offset radius of component k on day m under the split-merge schedule.
double split_merge_radius(const StreamConfig& cfg, int k, int m);
std::vector<GaussianMixture> split_merge_stream(const StreamConfig& cfg);

/// softmax(A cos(2 pi m/P + 2 pi k/K)) for k = 0..K-1.
Vector rotating_weights(int K, double A, double P, int m);
/// Fixed means and covariances, weights from rotating_weights.
std::vector<GaussianMixture> rotating_dominance_stream(const GaussianMixture& base, double A, double P, int n_days);

/// Stand-in for class-conditional fits: d=12, K=3, mean k has +sep on axis k
/// and -sep/2 on axis k+3, covariances Q diag(linspace(2, 0.2)) (1 + 0.3k) Q^T
/// with Q orthogonal from a seeded Gaussian draw.
GaussianMixture synthetic_class_fixture(double sep = 2.0, std::uint64_t seed = 7);

/// Days 1..n_days. `seed` drives the nuisance walk and is ignored otherwise.
std::vector<GaussianMixture> generate_stream(const StreamConfig& cfg, std::uint64_t seed = 0);

/// K components N(0, I_d) with equal weights, shaped like the stream's days.
GaussianMixture default_prior(const std::vector<GaussianMixture>& stream);

}  // namespace cas
