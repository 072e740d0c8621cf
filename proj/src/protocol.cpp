#include "cas/protocol.hpp"

#include "cas/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace cas {

namespace {

void require_same_shape(const GaussianMixture& a, const GaussianMixture& b, const char* where) {
  if (a.components() != b.components() || a.dim() != b.dim()) {
    throw ConfigError(fmt::format("{}: mixture shape mismatch (K={}, d={}) vs (K={}, d={})", where,
                                  a.components(), a.dim(), b.components(), b.dim()));
  }
}

void require_unit_time(double t, double upper = 1.0) {
  if (!(t >= 0.0 && t <= upper)) throw ConfigError(fmt::format("time {} outside [0, {}]", t, upper));
}

}  // namespace

GaussianMixture interpolate_nodes(std::span<const GaussianMixture> nodes, double position) {
  const auto segments = static_cast<double>(nodes.size()) - 1.0;
  if (nodes.size() < 2) throw ConfigError("interpolation needs at least two nodes");
  const double nearest = std::round(position);
  if (std::abs(position - nearest) <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, nearest)) {
    position = nearest;
  }
  position = std::clamp(position, 0.0, segments);
  const auto j = std::min(static_cast<std::size_t>(std::floor(position)), nodes.size() - 2);
  const double alpha = position - static_cast<double>(j);
  if (alpha == 0.0) return nodes[j];
  if (alpha == 1.0) return nodes[j + 1];
  return convex_combine(nodes[j], nodes[j + 1], alpha);
}

ProtocolGrid::ProtocolGrid(std::vector<GaussianMixture> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.size() < 2) throw ConfigError("protocol grid needs L >= 1 (at least two nodes)");
  for (const auto& n : nodes_) require_same_shape(nodes_.front(), n, "protocol grid");
}

GaussianMixture ProtocolGrid::eval_at(double t) const {
  require_unit_time(t);
  return interpolate_nodes(nodes_, t * segments());
}

int ProtocolGrid::segment_at(double t) const {
  require_unit_time(t);
  const int L = segments();
  return std::min(static_cast<int>(std::floor(t * L)), L - 1);
}

GaussianMixture CompressedGrid::eval_at(double t) const {
  const int L = segments();
  require_unit_time(t, static_cast<double>(L) / (L + 1));
  return interpolate_nodes(nodes, t * (L + 1));
}

GaussianMixture AugmentedGrid::eval_at(double t) const {
  require_unit_time(t);
  return interpolate_nodes(nodes, t * (static_cast<double>(nodes.size()) - 1.0));
}

Matrix RebinMatrix::dense() const {
  Matrix w = Matrix::Zero(L + 1, L + 2);
  for (int j = 0; j <= L; ++j) {
    const Row& r = rows[static_cast<std::size_t>(j)];
    w(j, r.column) += 1.0 - r.alpha;
    w(j, r.column + 1) += r.alpha;
  }
  return w;
}

ProtocolGrid init_protocol(const GaussianMixture& prior, const GaussianMixture& first_target, int L) {
  if (L < 1) throw ConfigError(fmt::format("segment count L must be >= 1 (got {})", L));
  require_same_shape(prior, first_target, "init_protocol");
  std::vector<GaussianMixture> nodes;
  nodes.reserve(static_cast<std::size_t>(L) + 1);
  nodes.push_back(prior);
  for (int j = 1; j < L; ++j) {
    nodes.push_back(convex_combine(prior, first_target, static_cast<double>(j) / L));
  }
  nodes.push_back(first_target);
  return ProtocolGrid(std::move(nodes));
}

CompressedGrid compress(const ProtocolGrid& grid) { return CompressedGrid{grid.nodes()}; }

AugmentedGrid add(CompressedGrid compressed, const GaussianMixture& target) {
  require_same_shape(compressed.nodes.front(), target, "add");
  compressed.nodes.push_back(target);
  return AugmentedGrid{std::move(compressed.nodes)};
}

RebinMatrix rebin_matrix(int L) {
  if (L < 1) throw ConfigError(fmt::format("segment count L must be >= 1 (got {})", L));
  RebinMatrix w;
  w.L = L;
  w.rows.reserve(static_cast<std::size_t>(L) + 1);
  for (int j = 0; j <= L; ++j) {
    // Augmented position of the new node j/L is j (L+1) / L.
    const double position = static_cast<double>(j * (L + 1)) / L;
    const int k = std::min(static_cast<int>(std::floor(position)), L);
    w.rows.push_back({k, position - k});
  }
  return w;
}

ProtocolGrid smooth(const AugmentedGrid& aug) {
  const int L = static_cast<int>(aug.nodes.size()) - 2;
  const RebinMatrix w = rebin_matrix(L);
  std::vector<GaussianMixture> nodes;
  nodes.reserve(static_cast<std::size_t>(L) + 1);
  for (const auto& row : w.rows) {
    const auto k = static_cast<std::size_t>(row.column);
    if (row.alpha == 0.0) {
      nodes.push_back(aug.nodes[k]);
    } else if (row.alpha == 1.0) {
      nodes.push_back(aug.nodes[k + 1]);
    } else {
      nodes.push_back(convex_combine(aug.nodes[k], aug.nodes[k + 1], row.alpha));
    }
  }
  return ProtocolGrid(std::move(nodes));
}

ProtocolGrid smooth_via_matrix(const AugmentedGrid& aug) {
  const int L = static_cast<int>(aug.nodes.size()) - 2;
  const int K = aug.nodes.front().components();
  const int d = aug.nodes.front().dim();
  const Eigen::Index stride = d * d + d + 1;

  // One row per augmented node: [w_k, m_k, vec(S_k)] for each component.
  Matrix stack(L + 2, K * stride);
  for (int i = 0; i < L + 2; ++i) {
    const auto& gm = aug.nodes[static_cast<std::size_t>(i)];
    for (int k = 0; k < K; ++k) {
      const Eigen::Index base = k * stride;
      stack(i, base) = gm.weight(k);
      stack.row(i).segment(base + 1, d) = gm.mean(k).transpose();
      stack.row(i).segment(base + 1 + d, d * d) = gm.cov(k).reshaped().transpose();
    }
  }
  const Matrix rebinned = rebin_matrix(L).dense() * stack;

  std::vector<GaussianMixture> nodes;
  for (int j = 0; j <= L; ++j) {
    Vector w(K);
    std::vector<Vector> means;
    std::vector<Matrix> covs;
    for (int k = 0; k < K; ++k) {
      const Eigen::Index base = k * stride;
      w(k) = rebinned(j, base);
      means.emplace_back(rebinned.row(j).segment(base + 1, d).transpose());
      covs.emplace_back(rebinned.row(j).segment(base + 1 + d, d * d).transpose().reshaped(d, d));
    }
    nodes.push_back(assume_valid(std::move(w), std::move(means), std::move(covs)));
  }
  return ProtocolGrid(std::move(nodes));
}

double readout_time(int L, int age) {
  if (age < 0) throw ConfigError(fmt::format("age must be >= 0 (got {})", age));
  return std::pow(static_cast<double>(L) / (L + 1), age);
}

std::size_t memory_footprint(int L, int K, int d) {
  if (L < 1 || K < 1 || d < 1) throw ConfigError("memory_footprint needs positive L, K, d");
  const auto dd = static_cast<std::size_t>(d);
  return (static_cast<std::size_t>(L) + 1) * static_cast<std::size_t>(K) * (dd * dd + dd + 1);
}

MemoryState MemoryState::start(GaussianMixture prior, const GaussianMixture& first_target, int L) {
  ProtocolGrid grid = init_protocol(prior, first_target, L);
  MemoryState s(std::move(prior), std::move(grid));
  s.day_ = 1;
  s.readout_[1] = 1.0;
  s.originals_.push_back(first_target);
  return s;
}

MemoryState MemoryState::from_parts(GaussianMixture prior, ProtocolGrid grid, int day,
                                    std::map<int, double> readout, std::vector<GaussianMixture> originals) {
  require_same_shape(prior, grid.node(0), "restore");
  if (day < 1) throw ConfigError("restored state must be at day >= 1");
  if (static_cast<int>(readout.size()) != day || readout.begin()->first != 1 || readout.rbegin()->first != day) {
    throw ConfigError(fmt::format("readout dictionary must hold exactly days 1..{}", day));
  }
  if (!originals.empty() && static_cast<int>(originals.size()) != day) {
    throw ConfigError(fmt::format("restored originals cover {} days, expected {}", originals.size(), day));
  }
  MemoryState s(std::move(prior), std::move(grid));
  s.day_ = day;
  s.readout_ = std::move(readout);
  s.originals_ = std::move(originals);
  return s;
}

void MemoryState::incorporate(const GaussianMixture& target) {
  const int L = grid_.segments();
  grid_ = smooth(add(compress(grid_), target));
  const double ratio = static_cast<double>(L) / (L + 1);
  for (auto& entry : readout_) entry.second *= ratio;
  ++day_;
  readout_[day_] = 1.0;
  originals_.push_back(target);
}

double MemoryState::readout(int m) const {
  const auto it = readout_.find(m);
  if (it == readout_.end()) throw ConfigError(fmt::format("no readout time for day {} (current day {})", m, day_));
  return it->second;
}

GaussianMixture MemoryState::replay(int m) const { return grid_.eval_at(readout(m)); }

}  // namespace cas
