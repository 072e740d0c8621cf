#include "cas/harness.hpp"

#include "cas/errors.hpp"
#include "cas/gm_json.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace cas {

using nlohmann::json;

namespace {

Moments start_moments(const RunConfig& cfg, const GaussianMixture& prior) {
  if (cfg.baseline == BaselineKind::prior) return overall_moments(prior);
  const Vector x0 = cfg.start_point.value_or(Vector::Zero(prior.dim()));
  if (x0.size() != prior.dim()) {
    throw ConfigError(fmt::format("start_point has {} coordinates, stream has d = {}", x0.size(), prior.dim()));
  }
  return deterministic_start(x0);
}

GaussianMixture resolve_prior(const RunConfig& cfg, const std::vector<GaussianMixture>& targets) {
  GaussianMixture prior = cfg.prior ? *cfg.prior : default_prior(targets);
  if (prior.components() != targets.front().components() || prior.dim() != targets.front().dim()) {
    throw ConfigError(fmt::format("prior shape (K={}, d={}) does not match the stream (K={}, d={})",
                                  prior.components(), prior.dim(), targets.front().components(),
                                  targets.front().dim()));
  }
  return prior;
}

void append_row(RunResult& result, const MemoryState& state, const ForgettingOptions& opts, Execution exec) {
  auto row = forgetting_row(state, opts, exec);
  result.records.insert(result.records.end(), row.begin(), row.end());
}

// Runs days state.day()+1 .. targets.size(); exceptions become a failure note.
void advance(RunResult& result, MemoryState& state, const std::vector<GaussianMixture>& targets,
             const ForgettingOptions& opts, Execution exec, const DayHook& hook) {
  try {
    for (auto n = static_cast<std::size_t>(state.day()); n < targets.size(); ++n) {
      state.incorporate(targets[n]);
      append_row(result, state, opts, exec);
      if (hook) hook(state);
    }
  } catch (const NumericalError& e) {
    result.failure = e.what();
    result.numerical_failure = true;
  } catch (const std::exception& e) {
    result.failure = e.what();
  }
}

void finish(RunResult& result, const RunConfig& cfg) {
  result.curve = age_curve(result.records);
  result.summary = summarize(result.records, cfg.L, cfg.theta);
}

int integral(const std::string& axis, double value) {
  if (value != std::round(value) || std::abs(value) > 1e9) {
    throw ConfigError(fmt::format("sweep axis {} needs integer values (got {})", axis, value));
  }
  return static_cast<int>(value);
}

std::string number(double v) { return fmt::format("{:.17g}", v); }

}  // namespace

void validate_run(const RunConfig& cfg) {
  validate_stream(cfg.stream);
  if (cfg.L < 1) throw ConfigError(fmt::format("L must be >= 1 (got {})", cfg.L));
  if (!(cfg.theta > 0.0 && cfg.theta < 1.0)) throw ConfigError(fmt::format("theta must lie in (0, 1) (got {})", cfg.theta));
  if (cfg.snapshot_every < 0) throw ConfigError("snapshot_every must be >= 0");
}

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object() || !j.contains("stream")) throw ConfigError("run config must be an object with 'stream'");
  static const std::set<std::string> known = {"stream",    "L",           "theta",     "seed",          "prior",
                                              "baseline",  "start_point", "decompose", "snapshot_every"};
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError(fmt::format("unknown run config field '{}'", key));
  }
  RunConfig cfg;
  cfg.stream = stream_config_from_json(j["stream"]);
  try {
    cfg.L = j.value("L", cfg.L);
    cfg.theta = j.value("theta", cfg.theta);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.decompose = j.value("decompose", cfg.decompose);
    cfg.snapshot_every = j.value("snapshot_every", cfg.snapshot_every);
    if (j.contains("prior") && !j["prior"].is_null()) {
      const json& p = j["prior"];
      if (p.is_string()) {
        if (p.get<std::string>() != "standard") throw ConfigError("prior must be a mixture object or \"standard\"");
      } else {
        cfg.prior = mixture_from_json(p);
      }
    }
    const std::string baseline = j.value("baseline", std::string("prior"));
    if (baseline == "prior") {
      cfg.baseline = BaselineKind::prior;
    } else if (baseline == "deterministic") {
      cfg.baseline = BaselineKind::deterministic;
    } else {
      throw ConfigError(fmt::format("baseline must be 'prior' or 'deterministic' (got '{}')", baseline));
    }
    if (j.contains("start_point")) {
      const auto v = j["start_point"].get<std::vector<double>>();
      cfg.start_point = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("run config: {}", e.what()));
  }
  validate_run(cfg);
  return cfg;
}

json to_json(const RunConfig& cfg) {
  json j = {{"stream", to_json(cfg.stream)},
            {"L", cfg.L},
            {"theta", cfg.theta},
            {"seed", cfg.seed},
            {"decompose", cfg.decompose},
            {"snapshot_every", cfg.snapshot_every},
            {"baseline", cfg.baseline == BaselineKind::prior ? "prior" : "deterministic"}};
  if (cfg.prior) j["prior"] = to_json(*cfg.prior);
  if (cfg.start_point) j["start_point"] = std::vector<double>(cfg.start_point->begin(), cfg.start_point->end());
  return j;
}

Summary summarize(const std::vector<ForgettingRecord>& records, int L, double theta) {
  Summary s;
  s.L = L;
  s.theta = theta;
  for (const auto& r : records) s.n_days = std::max(s.n_days, r.n);
  const AgeCurve curve = age_curve(records);
  s.skipped = curve.skipped;
  s.half_life = half_life(curve, theta);
  if (s.half_life) s.t_star = std::exp(-static_cast<double>(*s.half_life) / L);
  for (std::size_t i = 0; i < curve.values.size(); ++i) {
    if (i == 0 || curve.values[i] > s.max_fbar) {
      s.max_fbar = curve.values[i];
      s.max_fbar_age = curve.ages[i];
    }
  }
  s.shares = channel_shares(records);
  return s;
}

RunResult run_experiment(const RunConfig& cfg, Execution exec, const DayHook& hook) {
  validate_run(cfg);
  const auto targets = generate_stream(cfg.stream, cfg.seed);
  const GaussianMixture prior = resolve_prior(cfg, targets);
  const ForgettingOptions opts{start_moments(cfg, prior), cfg.decompose};

  RunResult result;
  MemoryState state = MemoryState::start(prior, targets.front(), cfg.L);
  try {
    append_row(result, state, opts, exec);
    if (hook) hook(state);
  } catch (const NumericalError& e) {
    result.failure = e.what();
    result.numerical_failure = true;
  }
  if (!result.failure) advance(result, state, targets, opts, exec, hook);
  finish(result, cfg);
  return result;
}

RunResult resume_experiment(const RunConfig& cfg, MemoryState state, Execution exec, const DayHook& hook) {
  validate_run(cfg);
  const auto targets = generate_stream(cfg.stream, cfg.seed);
  if (state.segments() != cfg.L) {
    throw ConfigError(fmt::format("snapshot has L = {}, config has L = {}", state.segments(), cfg.L));
  }
  if (state.day() > static_cast<int>(targets.size())) {
    throw ConfigError(fmt::format("snapshot day {} is past the stream's {} days", state.day(), targets.size()));
  }
  state.set_originals({targets.begin(), targets.begin() + state.day()});
  const ForgettingOptions opts{start_moments(cfg, state.prior()), cfg.decompose};
  RunResult result;
  advance(result, state, targets, opts, exec, hook);
  finish(result, cfg);
  return result;
}

RunResult fifo_baseline(const RunConfig& cfg) {
  validate_run(cfg);
  const auto targets = generate_stream(cfg.stream, cfg.seed);
  const GaussianMixture prior = resolve_prior(cfg, targets);
  const Moments start = start_moments(cfg, prior);
  RunResult result;
  const int N = static_cast<int>(targets.size());
  for (int n = 1; n <= N; ++n) {
    for (int m = 1; m <= n; ++m) {
      const GaussianMixture& orig = targets[static_cast<std::size_t>(m - 1)];
      const bool stored = n - m < cfg.L;
      ForgettingRecord r;
      r.m = m;
      r.n = n;
      r.raw = stored ? 0.0 : raw_forgetting(prior, orig);
      const double baseline = amnesia_baseline(start, orig);
      if (!degenerate_baseline(baseline)) r.normalized = r.raw / baseline;
      if (cfg.decompose) r.decomposition = stored ? Decomposition{} : decomposed_forgetting(prior, orig);
      result.records.push_back(r);
    }
  }
  finish(result, cfg);
  return result;
}

const std::vector<std::string>& sweep_axes() {
  static const std::vector<std::string> axes = {"L", "K",      "P",      "R", "r",     "chi",
                                                "d", "cov_scale", "n_days", "A", "theta", "nuisance_speed"};
  return axes;
}

RunConfig with_axis(const RunConfig& base, const std::string& axis, double value) {
  RunConfig cfg = base;
  StreamConfig& s = cfg.stream;
  if (axis == "L") {
    cfg.L = integral(axis, value);
  } else if (axis == "K") {
    s.K = integral(axis, value);
    const bool ring = s.kind == StreamKind::crowding || s.kind == StreamKind::triangle;
    if (ring && s.K == 1) {
      s.kind = StreamKind::circular;
      s.cov_scale = default_stream(StreamKind::circular).cov_scale;
    } else if (s.kind == StreamKind::circular && s.K > 1) {
      s.kind = StreamKind::crowding;
      s.cov_scale = default_stream(StreamKind::crowding).cov_scale;
    } else if (s.kind == StreamKind::triangle && s.K != 3) {
      s.kind = StreamKind::crowding;
    }
  } else if (axis == "P") {
    s.P = value;
  } else if (axis == "R") {
    s.R = value;
  } else if (axis == "r") {
    s.r = value;
  } else if (axis == "chi") {
    s.r = value * std::sqrt(s.cov_scale);
  } else if (axis == "d") {
    s.d = integral(axis, value);
  } else if (axis == "cov_scale") {
    s.cov_scale = value;
  } else if (axis == "n_days") {
    s.n_days = integral(axis, value);
  } else if (axis == "A") {
    s.A = value;
  } else if (axis == "theta") {
    cfg.theta = value;
  } else if (axis == "nuisance_speed") {
    s.nuisance.speed = value;
    s.nuisance.enabled = value > 0.0;
  } else {
    throw ConfigError(fmt::format("unknown sweep axis '{}'", axis));
  }
  validate_run(cfg);
  return cfg;
}

SweepResult sweep(const RunConfig& base, const std::string& axis, const std::vector<double>& values,
                  Execution exec) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  std::vector<RunConfig> configs;
  for (double v : values) configs.push_back(with_axis(base, axis, v));

  SweepResult out;
  out.axis = axis;
  out.rows.resize(values.size());
  auto run_one = [&](std::size_t i) {
    SweepRow& row = out.rows[i];
    row.value = values[i];
    try {
      const RunResult r = run_experiment(configs[i], Execution::serial);
      row.summary = r.summary;
      row.failure = r.failure;
    } catch (const std::exception& e) {
      row.failure = e.what();
    }
  };
  const auto n = values.size();
  if (exec == Execution::serial) {
    for (std::size_t i = 0; i < n; ++i) run_one(i);
  } else {
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < n; ++i) run_one(i);
  }

  if (axis == "L") {
    std::vector<std::pair<int, int>> points;
    for (std::size_t i = 0; i < n; ++i) {
      if (out.rows[i].summary.half_life) points.emplace_back(configs[i].L, *out.rows[i].summary.half_life);
    }
    try {
      out.capacity = capacity_diagnostics(points);
    } catch (const NumericalError&) {
    }
  }
  return out;
}

CapacityFit capacity_diagnostics(const std::vector<std::pair<int, int>>& points) {
  if (points.size() < 3) {
    throw NumericalError(fmt::format("capacity fit needs at least 3 points (got {})", points.size()));
  }
  double mean_l = 0.0, mean_a = 0.0;
  for (const auto& [l, a] : points) {
    mean_l += l;
    mean_a += a;
  }
  mean_l /= static_cast<double>(points.size());
  mean_a /= static_cast<double>(points.size());
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [l, a] : points) {
    sxx += (l - mean_l) * (l - mean_l);
    sxy += (l - mean_l) * (a - mean_a);
  }
  if (!(sxx > 0.0)) throw NumericalError("capacity fit is degenerate: all L values coincide");
  CapacityFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = mean_a - fit.slope * mean_l;
  fit.t_star = std::exp(-fit.slope);
  fit.points = points.size();
  return fit;
}

void write_records_csv(const std::vector<ForgettingRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
  out << "m,n,age,F_raw,F_norm,F_mean,F_cov,F_weight\n";
  for (const auto& r : records) {
    out << r.m << ',' << r.n << ',' << r.age() << ',' << number(r.raw) << ',';
    if (r.normalized) out << number(*r.normalized);
    out << ',';
    if (r.decomposition) {
      out << number(r.decomposition->mean) << ',' << number(r.decomposition->cov) << ','
          << number(r.decomposition->weight);
    } else {
      out << ",,";
    }
    out << '\n';
  }
}

void write_age_curve_csv(const AgeCurve& curve, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
  out << "age,F_bar,count\n";
  for (std::size_t i = 0; i < curve.ages.size(); ++i) {
    out << curve.ages[i] << ',' << number(curve.values[i]) << ',' << curve.counts[i] << '\n';
  }
}

json to_json(const Summary& s) {
  json j = {{"L", s.L},
            {"n_days", s.n_days},
            {"theta", s.theta},
            {"half_life", nullptr},
            {"t_star", nullptr},
            {"max_Fbar", s.max_fbar},
            {"max_Fbar_age", s.max_fbar_age},
            {"mean_share", nullptr},
            {"cov_share", nullptr},
            {"weight_share", nullptr},
            {"skipped", s.skipped}};
  if (s.half_life) j["half_life"] = *s.half_life;
  if (s.t_star) j["t_star"] = *s.t_star;
  if (s.shares) {
    j["mean_share"] = s.shares->mean;
    j["cov_share"] = s.shares->cov;
    j["weight_share"] = s.shares->weight;
  }
  return j;
}

Summary summary_from_json(const json& j) {
  try {
    Summary s;
    s.L = j.at("L").get<int>();
    s.n_days = j.at("n_days").get<int>();
    s.theta = j.at("theta").get<double>();
    if (!j.at("half_life").is_null()) s.half_life = j["half_life"].get<int>();
    if (!j.at("t_star").is_null()) s.t_star = j["t_star"].get<double>();
    s.max_fbar = j.at("max_Fbar").get<double>();
    s.max_fbar_age = j.at("max_Fbar_age").get<int>();
    if (!j.at("mean_share").is_null()) {
      s.shares = ChannelShares{j["mean_share"].get<double>(), j.at("cov_share").get<double>(),
                               j.at("weight_share").get<double>()};
    }
    s.skipped = j.at("skipped").get<int>();
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("summary JSON: {}", e.what()));
  }
}

json to_json(const SweepResult& sw) {
  json rows = json::array();
  for (const auto& row : sw.rows) {
    json r = to_json(row.summary);
    r["value"] = row.value;
    if (row.failure) r["failure"] = *row.failure;
    rows.push_back(std::move(r));
  }
  json j = {{"axis", sw.axis}, {"rows", std::move(rows)}, {"capacity", nullptr}};
  if (sw.capacity) {
    j["capacity"] = {{"c", sw.capacity->slope},
                     {"intercept", sw.capacity->intercept},
                     {"t_star", sw.capacity->t_star},
                     {"points", sw.capacity->points}};
  }
  return j;
}

void export_result(const RunResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_records_csv(result.records, dir / "records.csv");
  write_age_curve_csv(result.curve, dir / "age_curve.csv");
  json summary = to_json(result.summary);
  if (result.failure) summary["failure"] = *result.failure;
  write_json_file(summary, dir / "summary.json");
}

json snapshot_to_json(const MemoryState& state) {
  json readout = json::object();
  for (const auto& [m, t] : state.readout_times()) readout[std::to_string(m)] = t;
  return {{"schema_version", kSnapshotSchema},
          {"L", state.segments()},
          {"day", state.day()},
          {"prior", to_json(state.prior())},
          {"nodes", to_json(state.grid().nodes())},
          {"readout", std::move(readout)}};
}

MemoryState state_from_snapshot(const json& j) {
  if (!j.is_object() || !j.contains("schema_version")) throw ConfigError("snapshot schema: missing schema_version");
  if (!j["schema_version"].is_number_integer() || j["schema_version"].get<int>() != kSnapshotSchema) {
    throw ConfigError(fmt::format("snapshot schema version {} unsupported (expected {})", j["schema_version"].dump(),
                                  kSnapshotSchema));
  }
  try {
    const int L = j.at("L").get<int>();
    const int day = j.at("day").get<int>();
    GaussianMixture prior = mixture_from_json(j.at("prior"));
    std::vector<GaussianMixture> nodes = mixtures_from_json(j.at("nodes"));
    if (static_cast<int>(nodes.size()) != L + 1) {
      throw ConfigError(fmt::format("snapshot schema: {} nodes for L = {}", nodes.size(), L));
    }
    std::map<int, double> readout;
    for (const auto& [key, value] : j.at("readout").items()) {
      std::size_t used = 0;
      const int m = std::stoi(key, &used);
      if (used != key.size()) throw ConfigError(fmt::format("snapshot schema: bad readout key '{}'", key));
      readout[m] = value.get<double>();
    }
    return MemoryState::from_parts(std::move(prior), ProtocolGrid(std::move(nodes)), day, std::move(readout), {});
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("snapshot schema: {}", e.what()));
  } catch (const std::invalid_argument&) {
    throw ConfigError("snapshot schema: readout keys must be day numbers");
  } catch (const std::out_of_range&) {
    throw ConfigError("snapshot schema: readout key out of range");
  }
}

void save_snapshot(const MemoryState& state, const std::filesystem::path& path) {
  write_json_file(snapshot_to_json(state), path);
}

MemoryState load_snapshot(const std::filesystem::path& path) { return state_from_snapshot(read_json_file(path)); }

std::size_t snapshot_real_count(const json& snapshot) {
  std::function<std::size_t(const json&)> count = [&](const json& j) -> std::size_t {
    if (j.is_number()) return 1;
    std::size_t total = 0;
    if (j.is_array() || j.is_object()) {
      for (const auto& item : j) total += count(item);
    }
    return total;
  };
  return count(snapshot.at("prior")) + count(snapshot.at("nodes")) + count(snapshot.at("readout"));
}

}  // namespace cas
