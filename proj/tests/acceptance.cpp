// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include "cas/assignment.hpp"
#include "cas/curricula.hpp"
#include "cas/harness.hpp"
#include "cas/metrics.hpp"
#include "cas/protocol.hpp"
#include "cas/replay_dynamics.hpp"
#include "test_support.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

using namespace cas;
using cas::testing::max_param_diff;
using cas::testing::random_mixture;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

RunConfig run_of(StreamKind kind, int L = 10) {
  RunConfig cfg;
  cfg.stream = default_stream(kind);
  cfg.L = L;
  return cfg;
}

std::string hl_str(const std::optional<int>& hl) { return hl ? std::to_string(*hl) : "none"; }

bool within(const std::optional<int>& hl, int expected, int tol) {
  return hl && std::abs(*hl - expected) <= tol;
}

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? "," : "") + parts[i];
  return out;
}

// Compares each sweep row to its expected half-life.
Outcome check_sweep(const SweepResult& sw, const std::vector<int>& expected, int tol) {
  bool ok = sw.rows.size() == expected.size();
  std::vector<std::string> got;
  for (std::size_t i = 0; i < sw.rows.size(); ++i) {
    got.push_back(hl_str(sw.rows[i].summary.half_life));
    if (i < expected.size()) ok = ok && within(sw.rows[i].summary.half_life, expected[i], tol);
  }
  return {ok, "half-lives {" + join(got) + "}"};
}

Outcome criterion_1() {
  const auto start = Clock::now();
  const auto r = run_experiment(run_of(StreamKind::circular));
  const double elapsed = seconds_since(start);
  return {within(r.summary.half_life, 30, 1) && elapsed < 1.0,
          fmt::format("a_half={} runtime={:.3f}s", hl_str(r.summary.half_life), elapsed)};
}

Outcome criterion_2() {
  const auto sw = sweep(run_of(StreamKind::circular), "L", {5, 8, 10, 15, 20, 30});
  auto out = check_sweep(sw, {14, 24, 30, 44, 51, 74}, 2);
  const bool slope_ok = sw.capacity && sw.capacity->slope >= 2.1 && sw.capacity->slope <= 2.7;
  out.detail += sw.capacity ? fmt::format(" c={:.3f} t*={:.4f}", sw.capacity->slope, sw.capacity->t_star)
                            : std::string(" no fit");
  out.pass = out.pass && slope_ok;
  return out;
}

Outcome criterion_3() {
  const auto sw = sweep(run_of(StreamKind::circular), "P", {25, 50, 100, 200});
  auto out = check_sweep(sw, {20, 30, 34, 36}, 2);
  const auto& h100 = sw.rows[2].summary.half_life;
  const auto& h200 = sw.rows[3].summary.half_life;
  out.pass = out.pass && h100 && h200 && *h200 - *h100 <= 4;
  return out;
}

Outcome criterion_4() {
  const auto lin = run_experiment(run_of(StreamKind::linear));
  const auto circ = run_experiment(run_of(StreamKind::circular));
  const auto& hl = lin.summary.half_life;
  bool monotone = hl.has_value();
  if (hl) {
    for (int a = 1; a <= *hl; ++a) monotone = monotone && *lin.curve.at(a) >= *lin.curve.at(a - 1);
  }
  const bool exceeds = hl && circ.summary.half_life && *hl > *circ.summary.half_life;
  return {within(hl, 42, 4) && exceeds && monotone,
          fmt::format("linear a_half={} circular a_half={} monotone={}", hl_str(hl),
                      hl_str(circ.summary.half_life), monotone)};
}

Outcome criterion_5() {
  const auto sw = sweep(run_of(StreamKind::circular), "K", {1, 2, 3, 5, 8});
  auto out = check_sweep(sw, {30, 30, 30, 30, 30}, 1);
  return out;
}

Outcome criterion_6() {
  return check_sweep(sweep(run_of(StreamKind::triangle), "L", {5, 10, 15, 20, 30}), {14, 30, 41, 50, 71}, 2);
}

Outcome criterion_7() {
  const auto r = run_experiment(run_of(StreamKind::triangle));
  double worst_ratio = 0.0;
  for (const auto& rec : r.records) {
    if (rec.raw > 0.0) worst_ratio = std::max(worst_ratio, rec.decomposition->weight / rec.raw);
  }
  const auto& s = r.summary.shares;
  const bool ok = s && s->mean >= 0.78 && s->mean <= 0.92 && worst_ratio < 1e-12;
  return {ok, fmt::format("mean share={:.4f} max F_weight/F_raw={:.3g}", s ? s->mean : -1.0, worst_ratio)};
}

Outcome criterion_8() {
  const auto r = run_experiment(run_of(StreamKind::circular));
  const double last = *r.curve.at(99);
  const bool ok = r.summary.max_fbar >= 1.02 && r.summary.max_fbar <= 1.15 && r.summary.max_fbar_age >= 40 &&
                  r.summary.max_fbar_age <= 60 && std::abs(last - 1.0) <= 0.1;
  return {ok, fmt::format("max F_bar={:.4f} at age {} F_bar(99)={:.4f}", r.summary.max_fbar,
                          r.summary.max_fbar_age, last)};
}

Outcome criterion_9() {
  const std::vector<double> flat = {0.274, 0.548, 0.913, 1.2, 1.461, 1.5};
  const auto sw = sweep(run_of(StreamKind::triangle), "chi", flat);
  auto out = check_sweep(sw, std::vector<int>(flat.size(), 30), 1);
  const auto wide = run_experiment(with_axis(run_of(StreamKind::triangle), "chi", 3.652));
  out.pass = out.pass && within(wide.summary.half_life, 20, 3);
  out.detail = "chi<=1.5 " + out.detail + " chi=3.652 a_half=" + hl_str(wide.summary.half_life);
  return out;
}

Outcome criterion_10() {
  auto base = run_of(StreamKind::embedded);
  base.stream.nuisance.enabled = false;
  const auto plain = sweep(base, "d", {2, 16});
  const auto& h2 = plain.rows[0].summary.half_life;
  const auto& h16 = plain.rows[1].summary.half_life;
  const auto& shares16 = plain.rows[1].summary.shares;
  bool ok = within(h2, 30, 0) && within(h16, 34, 2) && h16 > h2 && shares16 &&
            std::abs(shares16->mean - 0.60) <= 0.10;

  base.stream.nuisance = Nuisance{true, 0.1};
  base.seed = 0;
  const auto walk = sweep(base, "d", {2, 4, 8, 16});
  std::vector<std::string> got;
  for (const auto& row : walk.rows) {
    got.push_back(hl_str(row.summary.half_life));
    ok = ok && row.summary.half_life && *row.summary.half_life >= 28 && *row.summary.half_life <= 35;
  }
  return {ok, fmt::format("static d=2 a_half={} d=16 a_half={} mean share={:.3f}; nuisance d={{2,4,8,16}} {{{}}}",
                          hl_str(h2), hl_str(h16), shares16 ? shares16->mean : -1.0, join(got))};
}

Outcome criterion_11() {
  const auto r = run_experiment(run_of(StreamKind::split_merge));
  return {within(r.summary.half_life, 30, 1), "a_half=" + hl_str(r.summary.half_life)};
}

Outcome criterion_12() {
  const auto r = run_experiment(run_of(StreamKind::rotating_dominance));
  // Channel shares per age, averaged over ages > 10.
  std::vector<Decomposition> by_age;
  for (const auto& rec : r.records) {
    if (static_cast<std::size_t>(rec.age()) >= by_age.size()) by_age.resize(static_cast<std::size_t>(rec.age()) + 1);
    auto& acc = by_age[static_cast<std::size_t>(rec.age())];
    acc.mean += rec.decomposition->mean;
    acc.cov += rec.decomposition->cov;
    acc.weight += rec.decomposition->weight;
  }
  double mean_share = 0.0, cov_share = 0.0;
  int ages = 0;
  for (std::size_t a = 11; a < by_age.size(); ++a) {
    const double total = by_age[a].total();
    if (total <= 0.0) continue;
    mean_share += by_age[a].mean / total;
    cov_share += by_age[a].cov / total;
    ++ages;
  }
  mean_share /= ages;
  cov_share /= ages;
  const auto raw = raw_age_profile(r.records);
  const bool resonance = raw[30] < raw[15] && raw[30] < raw[45] && raw[60] < raw[45];
  return {cov_share > mean_share && resonance,
          fmt::format("ages>10 cov share={:.3f} mean share={:.3f}; raw F at ages 15/30/45/60 = "
                      "{:.3f}/{:.3f}/{:.3f}/{:.3f} resonance={}",
                      cov_share, mean_share, raw[15], raw[30], raw[45], raw[60], resonance)};
}

Outcome criterion_13() {
  bool ok = true;
  std::vector<std::string> got;
  for (int L : {5, 10, 20}) {
    auto cfg = run_of(StreamKind::circular, L);
    const auto hl = fifo_baseline(cfg).summary.half_life;
    got.push_back(hl_str(hl));
    ok = ok && hl == L;
  }
  const auto cas_hl = run_experiment(run_of(StreamKind::circular)).summary.half_life;
  const auto fifo_hl = fifo_baseline(run_of(StreamKind::circular)).summary.half_life;
  const double ratio = cas_hl && fifo_hl ? static_cast<double>(*cas_hl) / *fifo_hl : 0.0;
  ok = ok && ratio >= 2.0;
  return {ok, fmt::format("FIFO L={{5,10,20}} a_half={{{}}} CAS/FIFO ratio={:.2f}", join(got), ratio)};
}

ProtocolGrid protocol_after(StreamKind kind, int days, int L = 10) {
  const auto targets = generate_stream(default_stream(kind));
  auto state = MemoryState::start(default_prior(targets), targets.front(), L);
  for (int n = 2; n <= days; ++n) state.incorporate(targets[static_cast<std::size_t>(n - 1)]);
  return state.grid();
}

// Largest deviation of sample moments from exact ones in standard errors.
double terminal_z_score(const Matrix& x, const Moments& exact) {
  const auto n = static_cast<double>(x.rows());
  double worst = 0.0;
  const Vector mean = x.colwise().mean().transpose();
  const Matrix centred = x.rowwise() - mean.transpose();
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    const double sd = std::sqrt(centred.col(i).squaredNorm() / (n - 1));
    worst = std::max(worst, std::abs(mean(i) - exact.mean(i)) / (sd / std::sqrt(n)));
    for (Eigen::Index j = i; j < x.cols(); ++j) {
      const Vector prod = centred.col(i).cwiseProduct(centred.col(j));
      const double c = prod.sum() / (n - 1);
      const double se = std::sqrt((prod.array() - prod.mean()).square().sum() / (n - 1) / n);
      worst = std::max(worst, std::abs(c - exact.cov(i, j)) / se);
    }
  }
  return worst;
}

Outcome criterion_14() {
  bool ok = true;
  std::string detail;

  double worst_fp = 0.0;
  for (auto kind : {StreamKind::circular, StreamKind::triangle, StreamKind::rotating_dominance}) {
    const auto grid = protocol_after(kind, 100);
    for (double t : {0.05, 0.25, 0.45, 0.65, 0.85}) {
      const auto res = fp_residual(grid, t, bulk_points(grid, t, 50, 11));
      worst_fp = std::max(worst_fp, res.max_relative);
      ok = ok && res.points > 0;
    }
  }
  ok = ok && worst_fp < 1e-3;
  detail += fmt::format("FP max rel={:.3g}", worst_fp);

  // Poisson: finite-difference Laplacian of psi against sum_k pidot_k g_k on
  // the weight-rotating protocol.
  {
    const auto targets = generate_stream(default_stream(StreamKind::rotating_dominance));
    auto state = MemoryState::start(default_prior(targets), targets.front(), 10);
    for (int n = 2; n <= 40; ++n) state.incorporate(targets[static_cast<std::size_t>(n - 1)]);
    const auto& grid = state.grid();
    const double t = 0.45;
    QuadratureOptions fixed;
    fixed.fixed_panels = 512;
    const DriftField field(path_slice(grid, t), fixed);
    const auto& s = field.slice();
    const int d = s.gm.dim();
    const double h = 1e-3;
    const auto pts = bulk_points(grid, t, 20, 12);
    std::vector<double> rhs, lap;
    for (const auto& x : pts) {
      double r = 0.0;
      for (int k = 0; k < s.gm.components(); ++k)
        r += s.weight_rate(k) * density(GaussianMixture::gaussian(s.gm.mean(k), s.gm.cov(k)), x);
      const double centre = field.psi(x);
      double l = 0.0;
      for (int c = 0; c < d; ++c) {
        Vector xp = x, xm = x;
        xp(c) += h;
        xm(c) -= h;
        l += (field.psi(xp) - 2 * centre + field.psi(xm)) / (h * h);
      }
      rhs.push_back(r);
      lap.push_back(l);
    }
    double peak = 0.0;
    for (double r : rhs) peak = std::max(peak, std::abs(r));
    double worst = 0.0;
    for (std::size_t i = 0; i < rhs.size(); ++i)
      worst = std::max(worst, std::abs(lap[i] - rhs[i]) / std::max(std::abs(rhs[i]), 1e-3 * peak));
    ok = ok && field.weights_move() && worst < 1e-4;
    detail += fmt::format(" Poisson rel={:.3g}", worst);
  }

  const auto start = Clock::now();
  double worst_z = 0.0;
  std::size_t failed = 0;
  for (auto kind : {StreamKind::circular, StreamKind::triangle}) {
    const auto grid = protocol_after(kind, 100);
    SdeOptions opt;
    opt.n_paths = 5000;
    opt.steps = 400;
    opt.seed = 21;
    opt.keep_paths = false;
    const auto res = integrate_sde(grid, opt);
    failed += res.failed;
    worst_z = std::max(worst_z, terminal_z_score(res.terminal_states(), overall_moments(grid.eval_at(1.0))));
  }
  const double elapsed = seconds_since(start);
  ok = ok && failed == 0 && worst_z < 4.0 && elapsed < 30.0;
  detail += fmt::format(" SDE max z={:.2f} failed={} runtime={:.2f}s", worst_z, failed, elapsed);
  return {ok, detail};
}

std::vector<int> brute_force(const Matrix& cost) {
  std::vector<int> perm(static_cast<std::size_t>(cost.rows()));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  double best_cost = assignment_cost(cost, perm);
  while (std::next_permutation(perm.begin(), perm.end())) {
    const double c = assignment_cost(cost, perm);
    if (c < best_cost) {
      best_cost = c;
      best = perm;
    }
  }
  return best;
}

Outcome criterion_15() {
  bool ok = true;
  std::mt19937_64 rng(15);

  // Moments against one million samples, per-coordinate z-scores.
  const auto gm = random_mixture(rng, 3, 2);
  const double z = terminal_z_score(sample(gm, 1, 1'000'000), overall_moments(gm));
  ok = ok && z < 4.5;

  int mismatches = 0;
  for (int K = 1; K <= 6; ++K) {
    for (int trial = 0; trial < 200; ++trial) {
      const auto a = random_mixture(rng, K, 2);
      const auto b = random_mixture(rng, K, 2);
      Matrix cost(K, K);
      for (int i = 0; i < K; ++i)
        for (int j = 0; j < K; ++j) cost(i, j) = (a.mean(i) - b.mean(j)).squaredNorm();
      if (match_components(a, b) != brute_force(cost)) ++mismatches;
    }
  }
  ok = ok && mismatches == 0;

  double smooth_gap = 0.0, compress_gap = 0.0;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int L : {1, 2, 5, 10, 30}) {
    auto state = MemoryState::start(random_mixture(rng, 3, 3), random_mixture(rng, 3, 3), L);
    for (int n = 2; n <= 6; ++n) state.incorporate(random_mixture(rng, 3, 3));
    const auto& grid = state.grid();
    const auto compressed = compress(grid);
    for (int i = 0; i < 200; ++i) {
      const double t = unit(rng);
      compress_gap = std::max(compress_gap, max_param_diff(grid.eval_at(t), compressed.eval_at(t * L / (L + 1.0))));
    }
    const auto aug = add(compressed, random_mixture(rng, 3, 3));
    const auto direct = smooth(aug);
    const auto via = smooth_via_matrix(aug);
    for (int j = 0; j <= L; ++j) smooth_gap = std::max(smooth_gap, max_param_diff(direct.node(j), via.node(j)));
  }
  ok = ok && smooth_gap <= 1e-14 && compress_gap <= 1e-13;
  return {ok, fmt::format("MC moments max z={:.2f} matching mismatches={} smooth gap={:.3g} compress gap={:.3g}", z,
                          mismatches, smooth_gap, compress_gap)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"default half-life", criterion_1},
      {"L sweep and capacity slope", criterion_2},
      {"P sweep saturation", criterion_3},
      {"linear drift", criterion_4},
      {"K sweep", criterion_5},
      {"K=3 L sweep", criterion_6},
      {"K=3 decomposition", criterion_7},
      {"confusion overshoot", criterion_8},
      {"crowding sweep", criterion_9},
      {"dimension sweep", criterion_10},
      {"split-merge curriculum", criterion_11},
      {"rotating dominance", criterion_12},
      {"FIFO baseline", criterion_13},
      {"dynamics properties", criterion_14},
      {"oracle equivalences", criterion_15},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = Clock::now();
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    if (!out.pass) ++failures;
    fmt::print("{} {:>2} {}: {} ({:.2f}s)\n", out.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, out.detail,
               seconds_since(start));
    std::fflush(stdout);
  }
  fmt::print("{}/{} criteria passed\n", criteria.size() - static_cast<std::size_t>(failures), criteria.size());
  return failures == 0 ? 0 : 1;
}
