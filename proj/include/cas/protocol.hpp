#pragma once

#include "cas/gaussian_mixture.hpp"

#include <map>
#include <span>
#include <vector>

namespace cas {

/// Piecewise-linear interpolation over uniformly spaced nodes, addressed by
/// fractional node position in [0, nodes.size() - 1]. The enclosing segment
/// is j = min(floor(pos), N - 2) so the last node is reached with alpha = 1.
/// Positions within a few ulps of an integer snap to that node.
GaussianMixture interpolate_nodes(std::span<const GaussianMixture> nodes, double position);

/// L + 1 mixtures at the implicit times j / L.
class ProtocolGrid {
 public:
  explicit ProtocolGrid(std::vector<GaussianMixture> nodes);

  int segments() const { return static_cast<int>(nodes_.size()) - 1; }
  const std::vector<GaussianMixture>& nodes() const { return nodes_; }
  const GaussianMixture& node(int j) const { return nodes_[static_cast<std::size_t>(j)]; }
  int components() const { return nodes_.front().components(); }
  int dim() const { return nodes_.front().dim(); }

  /// Marginal at t in [0, 1]. t = j/L returns node j, t = 1 the terminal node.
  GaussianMixture eval_at(double t) const;

  /// Index of the segment used at time t (right-continuous, last segment at t = 1).
  int segment_at(double t) const;

 private:
  std::vector<GaussianMixture> nodes_;
};

/// Day-n protocol relabelled onto [0, L/(L+1)]: node j sits at j/(L+1).
struct CompressedGrid {
  std::vector<GaussianMixture> nodes;  ///< L + 1 nodes, states unchanged
  int segments() const { return static_cast<int>(nodes.size()) - 1; }
  /// Density path at t in [0, L/(L+1)].
  GaussianMixture eval_at(double t) const;
};

/// L + 2 nodes at k/(L+1) after the new day is appended.
struct AugmentedGrid {
  std::vector<GaussianMixture> nodes;
  GaussianMixture eval_at(double t) const;
};

/// Sparse (L+1) x (L+2) row-stochastic rebinning matrix. Row j puts
/// (1 - alpha_j) on column k_j and alpha_j on column k_j + 1.
struct RebinMatrix {
  struct Row {
    int column;
    double alpha;
  };
  int L = 0;
  std::vector<Row> rows;

  Matrix dense() const;
};

ProtocolGrid init_protocol(const GaussianMixture& prior, const GaussianMixture& first_target, int L);
CompressedGrid compress(const ProtocolGrid& grid);
AugmentedGrid add(CompressedGrid compressed, const GaussianMixture& target);
RebinMatrix rebin_matrix(int L);

/// Rebins onto L segments by two-node interpolation. Canonical path.
ProtocolGrid smooth(const AugmentedGrid& aug);
/// Same result as smooth(), computed as the W * parameter-stack product.
/// Kept as a cross-check.
ProtocolGrid smooth_via_matrix(const AugmentedGrid& aug);

/// (L/(L+1))^age.
double readout_time(int L, int age);

/// (L + 1) * K * (d^2 + d + 1): reals stored by the protocol grid.
std::size_t memory_footprint(int L, int K, int d);

/// The agent's memory after day n: prior, protocol grid, readout times, and
/// the daily targets (kept for metrics only, not part of the footprint).
class MemoryState {
 public:
  /// Day-1 state: the grid interpolates prior -> first_target.
  static MemoryState start(GaussianMixture prior, const GaussianMixture& first_target, int L);

  /// Rebuilds a state from persisted parts. `originals` may be empty.
  static MemoryState from_parts(GaussianMixture prior, ProtocolGrid grid, int day,
                                std::map<int, double> readout, std::vector<GaussianMixture> originals);

  /// One compress-add-smooth cycle: day n -> n + 1.
  void incorporate(const GaussianMixture& target);

  /// Replay of day m: the grid marginal at t_{m|n}. Throws ConfigError for unknown m.
  GaussianMixture replay(int m) const;
  double readout(int m) const;

  int day() const { return day_; }
  int segments() const { return grid_.segments(); }
  const GaussianMixture& prior() const { return prior_; }
  const ProtocolGrid& grid() const { return grid_; }
  const std::map<int, double>& readout_times() const { return readout_; }
  const std::vector<GaussianMixture>& originals() const { return originals_; }
  void set_originals(std::vector<GaussianMixture> originals) { originals_ = std::move(originals); }

 private:
  MemoryState(GaussianMixture prior, ProtocolGrid grid) : prior_(std::move(prior)), grid_(std::move(grid)) {}

  GaussianMixture prior_;
  ProtocolGrid grid_;
  int day_ = 0;
  std::map<int, double> readout_;
  std::vector<GaussianMixture> originals_;
};

}  // namespace cas
