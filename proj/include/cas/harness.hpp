#pragma once

#include "cas/curricula.hpp"
#include "cas/metrics.hpp"
#include "cas/parallel.hpp"
#include "cas/protocol.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace cas {

/// Reference distribution of the amnesia baseline.
enum class BaselineKind { prior, deterministic };

struct RunConfig {
  StreamConfig stream;
  int L = 10;
  std::optional<GaussianMixture> prior;  ///< empty: K components N(0, I_d)
  BaselineKind baseline = BaselineKind::prior;
  std::optional<Vector> start_point;  ///< deterministic baseline x0 (default origin)
  double theta = 0.5;
  bool decompose = true;
  int snapshot_every = 0;  ///< 0: no snapshots
  std::uint64_t seed = 0;
};

void validate_run(const RunConfig& cfg);

/// {"stream": {...}, "L": 10, "theta": 0.5, "seed": 0, "prior": <mixture>,
///  "baseline": "prior" | "deterministic", "start_point": [...],
///  "decompose": true, "snapshot_every": 0}. Only "stream" is required.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& cfg);

struct Summary {
  int L = 0;
  int n_days = 0;
  double theta = 0.5;
  std::optional<int> half_life;
  std::optional<double> t_star;  ///< exp(-half_life / L)
  double max_fbar = 0.0;
  int max_fbar_age = 0;
  std::optional<ChannelShares> shares;
  int skipped = 0;  ///< records with a degenerate baseline
};

struct RunResult {
  std::vector<ForgettingRecord> records;  ///< n ascending, m ascending
  AgeCurve curve;
  Summary summary;
  std::optional<std::string> failure;  ///< set when the run stopped early
  bool numerical_failure = false;
};

/// Recomputes the summary from records.
Summary summarize(const std::vector<ForgettingRecord>& records, int L, double theta);

/// Called after each day with the live state (snapshots, progress).
using DayHook = std::function<void(const MemoryState&)>;

/// Generates the stream, runs the recursion day by day and records the
/// forgetting row after each day. On an exception the records so far are
/// kept, `failure` is set and the summary covers the partial records.
RunResult run_experiment(const RunConfig& cfg, Execution exec = Execution::parallel, const DayHook& hook = {});

/// Continues a restored state to the configured n_days. The stream is
/// regenerated to recover the originals; only days after the state's day
/// produce records.
RunResult resume_experiment(const RunConfig& cfg, MemoryState state, Execution exec = Execution::parallel,
                            const DayHook& hook = {});

/// Replays the last L days verbatim and the prior for older days.
RunResult fifo_baseline(const RunConfig& cfg);

/// Axis names: L, K, P, R, r, chi (sets r = chi sqrt(cov_scale)), d,
/// cov_scale, n_days, A, theta, nuisance_speed.
const std::vector<std::string>& sweep_axes();
/// Copy of base with one field replaced. On a crowding/triangle stream,
/// K = 1 selects the single-component circular stream with cov 0.5.
RunConfig with_axis(const RunConfig& base, const std::string& axis, double value);

struct SweepRow {
  double value = 0.0;
  Summary summary;
  std::optional<std::string> failure;
};

struct CapacityFit {
  double slope = 0.0;  ///< capacity constant c
  double intercept = 0.0;
  double t_star = 0.0;  ///< exp(-c)
  std::size_t points = 0;
};

struct SweepResult {
  std::string axis;
  std::vector<SweepRow> rows;
  std::optional<CapacityFit> capacity;  ///< axis L with >= 3 crossing rows
};

/// One independent run per value. The parallel kernel distributes values.
SweepResult sweep(const RunConfig& base, const std::string& axis, const std::vector<double>& values,
                  Execution exec = Execution::parallel);

/// Least-squares line half_life = c L + b. Throws NumericalError for fewer
/// than 3 points or when all L coincide.
CapacityFit capacity_diagnostics(const std::vector<std::pair<int, int>>& l_and_half_life);

/// m,n,age,F_raw,F_norm,F_mean,F_cov,F_weight with 17 significant digits;
/// absent values are empty fields.
void write_records_csv(const std::vector<ForgettingRecord>& records, const std::filesystem::path& path);
/// age,F_bar,count
void write_age_curve_csv(const AgeCurve& curve, const std::filesystem::path& path);
nlohmann::json to_json(const Summary& summary);
Summary summary_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SweepResult& sweep);

/// Writes records.csv, age_curve.csv and summary.json into dir.
void export_result(const RunResult& result, const std::filesystem::path& dir);

inline constexpr int kSnapshotSchema = 1;

/// {"schema_version", "L", "day", "prior", "nodes", "readout": {"m": t}}.
nlohmann::json snapshot_to_json(const MemoryState& state);
/// Throws ConfigError ("schema ...") on a version mismatch or malformed document.
MemoryState state_from_snapshot(const nlohmann::json& j);
void save_snapshot(const MemoryState& state, const std::filesystem::path& path);
MemoryState load_snapshot(const std::filesystem::path& path);
/// Number of reals stored in the snapshot's prior, nodes and readout values.
std::size_t snapshot_real_count(const nlohmann::json& snapshot);

}  // namespace cas
