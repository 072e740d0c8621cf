#pragma once

#include "cas/gaussian_mixture.hpp"
#include "cas/parallel.hpp"
#include "cas/protocol.hpp"

#include <optional>
#include <vector>

namespace cas {

/// Squared mean gap plus squared Frobenius covariance gap.
double raw_forgetting(const Moments& replay, const Moments& orig);
double raw_forgetting(const GaussianMixture& replay, const GaussianMixture& orig);

/// Raw forgetting between the starting distribution and a day's target.
double amnesia_baseline(const Moments& start, const GaussianMixture& orig);
double amnesia_baseline(const GaussianMixture& prior, const GaussianMixture& orig);

/// Starting moments for a deterministic start x0: mean x0, zero covariance.
Moments deterministic_start(const Vector& x0);

/// True when the baseline cannot normalize (the target has the starting moments).
bool degenerate_baseline(double baseline);

/// F / baseline. Throws NumericalError for a degenerate baseline.
double normalized_forgetting(double forgetting, double baseline);

/// Per-component channels after optimal matching.
struct Decomposition {
  double mean = 0.0;
  double cov = 0.0;
  double weight = 0.0;
  double total() const { return mean + cov + weight; }
};

/// sigma[k] = index of the component of b matched to component k of a,
/// minimizing sum_k |m_k^a - m_sigma(k)^b|^2. Ties go to the lowest index.
std::vector<int> match_components(const GaussianMixture& a, const GaussianMixture& b);

Decomposition decomposed_forgetting(const GaussianMixture& replay, const GaussianMixture& orig);

struct ForgettingRecord {
  int m = 0;
  int n = 0;
  double raw = 0.0;
  std::optional<double> normalized;  ///< empty when the day's baseline is degenerate
  std::optional<Decomposition> decomposition;
  int age() const { return n - m; }
};

struct ForgettingOptions {
  Moments start;  ///< amnesia reference moments
  bool decompose = false;
};

/// Records (m, n) for m = 1..n at the state's current day n, m ascending.
/// Requires the state's originals. The parallel kernel splits over m.
std::vector<ForgettingRecord> forgetting_row(const MemoryState& state, const ForgettingOptions& options,
                                             Execution exec = Execution::parallel);

/// Full triangular matrix from a target stream: runs the recursion and
/// collects every day's row (n ascending, m ascending).
std::vector<ForgettingRecord> forgetting_matrix(const GaussianMixture& prior,
                                                const std::vector<GaussianMixture>& targets, int L,
                                                const ForgettingOptions& options,
                                                Execution exec = Execution::parallel);

struct AgeCurve {
  std::vector<int> ages;
  std::vector<double> values;  ///< mean normalized forgetting per age
  std::vector<int> counts;     ///< pairs averaged per age
  int skipped = 0;             ///< records without a normalized value

  std::optional<double> at(int age) const;
};

AgeCurve age_curve(const std::vector<ForgettingRecord>& records);

/// Smallest age with curve value >= theta, or nothing if never crossed.
std::optional<int> half_life(const AgeCurve& curve, double theta = 0.5);

/// Mean raw forgetting per age (index = age).
std::vector<double> raw_age_profile(const std::vector<ForgettingRecord>& records);

struct ChannelShares {
  double mean = 0.0;
  double cov = 0.0;
  double weight = 0.0;
};

/// Age-averaged channel shares: for every age >= 1 the channel's share of
/// the summed decomposition, then the mean over ages. Empty when no record
/// carries a decomposition.
std::optional<ChannelShares> channel_shares(const std::vector<ForgettingRecord>& records);

}  // namespace cas
