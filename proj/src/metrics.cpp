#include "cas/metrics.hpp"

#include "cas/assignment.hpp"
#include "cas/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <limits>
#include <map>

namespace cas {

double raw_forgetting(const Moments& replay, const Moments& orig) {
  if (replay.mean.size() != orig.mean.size()) {
    throw ConfigError(fmt::format("raw_forgetting: dimension mismatch ({} vs {})", replay.mean.size(),
                                  orig.mean.size()));
  }
  return (replay.mean - orig.mean).squaredNorm() + (replay.cov - orig.cov).squaredNorm();
}

double raw_forgetting(const GaussianMixture& replay, const GaussianMixture& orig) {
  return raw_forgetting(overall_moments(replay), overall_moments(orig));
}

double amnesia_baseline(const Moments& start, const GaussianMixture& orig) {
  return raw_forgetting(start, overall_moments(orig));
}

double amnesia_baseline(const GaussianMixture& prior, const GaussianMixture& orig) {
  return amnesia_baseline(overall_moments(prior), orig);
}

Moments deterministic_start(const Vector& x0) {
  return {x0, Matrix::Zero(x0.size(), x0.size())};
}

bool degenerate_baseline(double baseline) { return !(baseline >= std::numeric_limits<double>::min()); }

double normalized_forgetting(double forgetting, double baseline) {
  if (degenerate_baseline(baseline)) {
    throw NumericalError(fmt::format("amnesia baseline {} cannot normalize", baseline));
  }
  return forgetting / baseline;
}

std::vector<int> match_components(const GaussianMixture& a, const GaussianMixture& b) {
  if (a.components() != b.components() || a.dim() != b.dim()) {
    throw ConfigError("match_components: mixtures differ in K or d");
  }
  const int K = a.components();
  Matrix cost(K, K);
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j) cost(i, j) = (a.mean(i) - b.mean(j)).squaredNorm();
  return solve_assignment_lexicographic(cost);
}

Decomposition decomposed_forgetting(const GaussianMixture& replay, const GaussianMixture& orig) {
  const std::vector<int> sigma = match_components(replay, orig);
  Decomposition out;
  for (int k = 0; k < replay.components(); ++k) {
    const int j = sigma[static_cast<std::size_t>(k)];
    const double w = std::max(replay.weight(k), orig.weight(j));
    out.mean += w * (replay.mean(k) - orig.mean(j)).squaredNorm();
    out.cov += w * (replay.cov(k) - orig.cov(j)).squaredNorm();
    const double dw = replay.weight(k) - orig.weight(j);
    out.weight += dw * dw;
  }
  return out;
}

namespace {

ForgettingRecord make_record(const MemoryState& state, int m, const ForgettingOptions& options) {
  const GaussianMixture& orig = state.originals()[static_cast<std::size_t>(m - 1)];
  const GaussianMixture replay = state.replay(m);
  ForgettingRecord r;
  r.m = m;
  r.n = state.day();
  r.raw = raw_forgetting(replay, orig);
  const double baseline = amnesia_baseline(options.start, orig);
  if (!degenerate_baseline(baseline)) r.normalized = r.raw / baseline;
  if (options.decompose) r.decomposition = decomposed_forgetting(replay, orig);
  return r;
}

}  // namespace

std::vector<ForgettingRecord> forgetting_row(const MemoryState& state, const ForgettingOptions& options,
                                             Execution exec) {
  const int n = state.day();
  if (static_cast<int>(state.originals().size()) < n) {
    throw ConfigError(fmt::format("forgetting_row: state holds {} originals for day {}",
                                  state.originals().size(), n));
  }
  std::vector<ForgettingRecord> row(static_cast<std::size_t>(n));
  if (exec == Execution::serial) {
    for (int m = 1; m <= n; ++m) row[static_cast<std::size_t>(m - 1)] = make_record(state, m, options);
    return row;
  }
#pragma omp parallel for schedule(static)
  for (int m = 1; m <= n; ++m) row[static_cast<std::size_t>(m - 1)] = make_record(state, m, options);
  return row;
}

std::vector<ForgettingRecord> forgetting_matrix(const GaussianMixture& prior,
                                                const std::vector<GaussianMixture>& targets, int L,
                                                const ForgettingOptions& options, Execution exec) {
  std::vector<ForgettingRecord> out;
  if (targets.empty()) return out;
  out.reserve(targets.size() * (targets.size() + 1) / 2);
  MemoryState state = MemoryState::start(prior, targets.front(), L);
  auto append = [&] {
    auto row = forgetting_row(state, options, exec);
    out.insert(out.end(), row.begin(), row.end());
  };
  append();
  for (std::size_t i = 1; i < targets.size(); ++i) {
    state.incorporate(targets[i]);
    append();
  }
  return out;
}

std::optional<double> AgeCurve::at(int age) const {
  const auto it = std::find(ages.begin(), ages.end(), age);
  if (it == ages.end()) return std::nullopt;
  return values[static_cast<std::size_t>(it - ages.begin())];
}

AgeCurve age_curve(const std::vector<ForgettingRecord>& records) {
  // Sum per age in record order; std::map keeps ages ascending.
  std::map<int, std::pair<double, int>> sums;
  AgeCurve curve;
  for (const auto& r : records) {
    if (!r.normalized) {
      ++curve.skipped;
      continue;
    }
    auto& s = sums[r.age()];
    s.first += *r.normalized;
    ++s.second;
  }
  for (const auto& [age, s] : sums) {
    curve.ages.push_back(age);
    curve.values.push_back(s.first / s.second);
    curve.counts.push_back(s.second);
  }
  return curve;
}

std::optional<int> half_life(const AgeCurve& curve, double theta) {
  for (std::size_t i = 0; i < curve.ages.size(); ++i) {
    if (curve.values[i] >= theta) return curve.ages[i];
  }
  return std::nullopt;
}

std::vector<double> raw_age_profile(const std::vector<ForgettingRecord>& records) {
  int max_age = -1;
  for (const auto& r : records) max_age = std::max(max_age, r.age());
  std::vector<double> sum(static_cast<std::size_t>(max_age + 1), 0.0);
  std::vector<int> count(sum.size(), 0);
  for (const auto& r : records) {
    sum[static_cast<std::size_t>(r.age())] += r.raw;
    ++count[static_cast<std::size_t>(r.age())];
  }
  for (std::size_t a = 0; a < sum.size(); ++a) {
    if (count[a] > 0) sum[a] /= count[a];
  }
  return sum;
}

std::optional<ChannelShares> channel_shares(const std::vector<ForgettingRecord>& records) {
  std::map<int, Decomposition> per_age;
  for (const auto& r : records) {
    if (!r.decomposition || r.age() < 1) continue;
    auto& acc = per_age[r.age()];
    acc.mean += r.decomposition->mean;
    acc.cov += r.decomposition->cov;
    acc.weight += r.decomposition->weight;
  }
  ChannelShares shares;
  int used = 0;
  for (const auto& [age, acc] : per_age) {
    const double total = acc.total();
    if (!(total > 0.0)) continue;
    shares.mean += acc.mean / total;
    shares.cov += acc.cov / total;
    shares.weight += acc.weight / total;
    ++used;
  }
  if (used == 0) return std::nullopt;
  shares.mean /= used;
  shares.cov /= used;
  shares.weight /= used;
  return shares;
}

}  // namespace cas
