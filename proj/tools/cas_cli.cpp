#include "cas/curricula.hpp"
#include "cas/errors.hpp"
#include "cas/gm_json.hpp"
#include "cas/harness.hpp"
#include "cas/replay_dynamics.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::optional<int> L;
  std::optional<std::uint64_t> seed;
  std::optional<int> n_days;
  bool serial = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "run config JSON")->required()->check(CLI::ExistingFile);
  cmd->add_option("--L", c.L, "segment budget (overrides config)");
  cmd->add_option("--seed", c.seed, "seed for nuisance walks and SDE paths");
  cmd->add_option("--n-days", c.n_days, "number of days (overrides config)");
  cmd->add_flag("--serial", c.serial, "use the serial reference kernels");
}

cas::RunConfig load_config(const Common& c) {
  const json doc = cas::read_json_file(c.config);
  cas::RunConfig cfg = cas::run_config_from_json(doc);
  if (c.L) cfg.L = *c.L;
  if (c.n_days) cfg.stream.n_days = *c.n_days;
  if (c.seed) {
    cfg.seed = *c.seed;
  } else if (cas::stream_uses_seed(cfg.stream) && !doc.contains("seed")) {
    throw cas::ConfigError("this stream draws random numbers: pass --seed or set \"seed\" in the config");
  }
  cas::validate_run(cfg);
  return cfg;
}

cas::Execution exec_of(const Common& c) { return c.serial ? cas::Execution::serial : cas::Execution::parallel; }

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw cas::ConfigError(fmt::format("'{}' is not a number", item));
    out.push_back(v);
  }
  if (out.empty()) throw cas::ConfigError("empty value list");
  return out;
}

// Runs the recursion up to `day` without metrics.
cas::MemoryState state_at(const cas::RunConfig& cfg, int day) {
  const auto targets = cas::generate_stream(cfg.stream, cfg.seed);
  if (day < 1 || day > static_cast<int>(targets.size())) {
    throw cas::ConfigError(fmt::format("day must lie in 1..{} (got {})", targets.size(), day));
  }
  const cas::GaussianMixture prior = cfg.prior ? *cfg.prior : cas::default_prior(targets);
  auto state = cas::MemoryState::start(prior, targets.front(), cfg.L);
  for (int n = 2; n <= day; ++n) state.incorporate(targets[static_cast<std::size_t>(n - 1)]);
  return state;
}

int report(const cas::RunResult& result, const std::optional<std::string>& out) {
  if (out) cas::export_result(result, *out);
  json summary = cas::to_json(result.summary);
  if (result.failure) summary["failure"] = *result.failure;
  std::cout << summary.dump(2) << '\n';
  if (!result.failure) return 0;
  std::cerr << "error: " << *result.failure << '\n';
  return result.numerical_failure ? 3 : 2;
}

void write_trajectories(const cas::SdeResult& sde, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
  if (sde.paths.empty()) return;
  const auto d = sde.paths.front().states.cols();
  out << "path_id,step,t";
  for (Eigen::Index i = 0; i < d; ++i) out << ",x_" << i;
  out << '\n';
  for (std::size_t p = 0; p < sde.paths.size(); ++p) {
    const auto& tr = sde.paths[p];
    for (Eigen::Index s = 0; s < tr.states.rows(); ++s) {
      out << p << ',' << s << ',' << fmt::format("{:.17g}", tr.times[static_cast<std::size_t>(s)]);
      for (Eigen::Index i = 0; i < d; ++i) out << ',' << fmt::format("{:.17g}", tr.states(s, i));
      out << '\n';
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compress-Add-Smooth continual memory over Gaussian-mixture protocols"};
  app.require_subcommand(1);

  Common run_c;
  std::optional<std::string> run_out;
  auto* run = app.add_subcommand("run", "run one experiment and print its summary");
  add_common(run, run_c);
  run->add_option("--out", run_out, "directory for records.csv, age_curve.csv, summary.json");

  Common sweep_c;
  std::string axis, values;
  std::optional<std::string> sweep_out;
  auto* sw = app.add_subcommand("sweep", "one run per value of a config field");
  add_common(sw, sweep_c);
  sw->add_option("--axis", axis, "field to vary")->required();
  sw->add_option("--values", values, "comma-separated values")->required();
  sw->add_option("--out", sweep_out, "write the sweep table JSON here");

  Common movie_c;
  int frames = 11;
  std::optional<int> movie_day;
  std::optional<std::string> movie_out, traj_out;
  std::size_t paths = 1000;
  int steps = 400;
  auto* movie = app.add_subcommand("movie", "density-path frames of the protocol, optionally SDE paths");
  add_common(movie, movie_c);
  movie->add_option("--frames", frames, "number of frames")->check(CLI::Range(2, 100000));
  movie->add_option("--day", movie_day, "protocol of this day (default: last day)");
  movie->add_option("--out", movie_out, "frames JSON file (default: stdout)");
  movie->add_option("--trajectories", traj_out, "also integrate the SDE and write paths CSV here");
  movie->add_option("--paths", paths, "SDE sample paths");
  movie->add_option("--steps", steps, "Euler-Maruyama steps")->check(CLI::PositiveNumber);

  Common drift_c;
  std::string times = "0.05,0.25,0.45,0.65,0.85";
  std::size_t points = 50;
  std::optional<int> drift_day;
  auto* dc = app.add_subcommand("drift-check", "Fokker-Planck residual of the reconstructed drift");
  add_common(dc, drift_c);
  dc->add_option("--t", times, "comma-separated interior times");
  dc->add_option("--points", points, "bulk points per time");
  dc->add_option("--day", drift_day, "protocol of this day (default: last day)");

  Common fifo_c;
  std::optional<std::string> fifo_out;
  auto* fifo = app.add_subcommand("fifo", "first-in-first-out buffer baseline");
  add_common(fifo, fifo_c);
  fifo->add_option("--out", fifo_out, "export directory");

  Common snap_c;
  int snap_day = 0;
  std::string snap_out;
  auto* snap = app.add_subcommand("snapshot", "run to a day and save the memory state");
  add_common(snap, snap_c);
  snap->add_option("--day", snap_day, "day to stop at")->required();
  snap->add_option("--out", snap_out, "snapshot JSON file")->required();

  Common restore_c;
  std::string restore_in;
  std::optional<std::string> restore_out;
  auto* restore = app.add_subcommand("restore", "continue a run from a snapshot");
  add_common(restore, restore_c);
  restore->add_option("--snapshot", restore_in, "snapshot JSON file")->required()->check(CLI::ExistingFile);
  restore->add_option("--out", restore_out, "export directory");

  Common stream_c;
  std::optional<std::string> stream_out;
  auto* stream = app.add_subcommand("stream", "dump the generated target stream");
  add_common(stream, stream_c);
  stream->add_option("--out", stream_out, "stream JSON file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*run) {
      const auto cfg = load_config(run_c);
      cas::DayHook hook;
      if (cfg.snapshot_every > 0 && run_out) {
        const fs::path dir = fs::path(*run_out) / "snapshots";
        fs::create_directories(dir);
        hook = [&](const cas::MemoryState& s) {
          if (s.day() % cfg.snapshot_every == 0) cas::save_snapshot(s, dir / fmt::format("day_{:05d}.json", s.day()));
        };
      }
      return report(cas::run_experiment(cfg, exec_of(run_c), hook), run_out);
    }
    if (*sw) {
      const auto cfg = load_config(sweep_c);
      const auto result = cas::sweep(cfg, axis, parse_list(values), exec_of(sweep_c));
      const json j = cas::to_json(result);
      if (sweep_out) cas::write_json_file(j, *sweep_out);
      std::cout << j.dump(2) << '\n';
      for (const auto& row : result.rows) {
        if (row.failure) return 3;
      }
      return 0;
    }
    if (*movie) {
      const auto cfg = load_config(movie_c);
      const auto state = state_at(cfg, movie_day.value_or(cfg.stream.n_days));
      const json j = cas::to_json(cas::movie_frames(state.grid(), frames));
      if (movie_out) {
        cas::write_json_file(j, *movie_out);
      } else {
        std::cout << j.dump(2) << '\n';
      }
      if (traj_out) {
        cas::SdeOptions opt;
        opt.n_paths = paths;
        opt.steps = steps;
        opt.seed = cfg.seed;
        const auto sde = cas::integrate_sde(state.grid(), opt, exec_of(movie_c));
        write_trajectories(sde, *traj_out);
        if (sde.clamped > 0 || sde.failed > 0) {
          std::cerr << fmt::format("sde: {} failed paths, {} clamped drift evaluations\n", sde.failed, sde.clamped);
        }
      }
      return 0;
    }
    if (*dc) {
      const auto cfg = load_config(drift_c);
      const auto state = state_at(cfg, drift_day.value_or(cfg.stream.n_days));
      json out = json::array();
      std::uint64_t i = 0;
      for (double t : parse_list(times)) {
        const auto pts = cas::bulk_points(state.grid(), t, points, cas::derive_seed(cfg.seed, i++));
        const auto r = cas::fp_residual(state.grid(), t, pts, exec_of(drift_c));
        out.push_back({{"t", t},
                       {"max_relative", r.max_relative},
                       {"mean_relative", r.mean_relative},
                       {"scale", r.scale},
                       {"points", r.points}});
      }
      std::cout << out.dump(2) << '\n';
      return 0;
    }
    if (*fifo) {
      return report(cas::fifo_baseline(load_config(fifo_c)), fifo_out);
    }
    if (*snap) {
      const auto cfg = load_config(snap_c);
      cas::save_snapshot(state_at(cfg, snap_day), snap_out);
      return 0;
    }
    if (*restore) {
      const auto cfg = load_config(restore_c);
      return report(cas::resume_experiment(cfg, cas::load_snapshot(restore_in), exec_of(restore_c)), restore_out);
    }
    if (*stream) {
      const auto cfg = load_config(stream_c);
      const json j = cas::to_json(cas::generate_stream(cfg.stream, cfg.seed));
      if (stream_out) {
        cas::write_json_file(j, *stream_out);
      } else {
        std::cout << j.dump(2) << '\n';
      }
      return 0;
    }
  } catch (const cas::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const cas::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
