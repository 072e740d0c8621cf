#include "cas/assignment.hpp"
#include "cas/curricula.hpp"
#include "cas/errors.hpp"
#include "cas/metrics.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

using namespace cas;
using cas::testing::random_mixture;
using cas::testing::vec;

namespace {

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

std::vector<ForgettingRecord> default_records(Execution exec = Execution::parallel) {
  StreamConfig cfg = default_stream(StreamKind::circular);
  const auto targets = generate_stream(cfg);
  const auto prior = default_prior(targets);
  return forgetting_matrix(prior, targets, 10, {overall_moments(prior), false}, exec);
}

}  // namespace

TEST(RawForgetting, HandComputations) {
  const auto replay = GaussianMixture::gaussian(vec({1, 0}), Matrix::Identity(2, 2));
  const auto orig = GaussianMixture::gaussian(vec({0, 0}), 2 * Matrix::Identity(2, 2));
  EXPECT_DOUBLE_EQ(raw_forgetting(replay, orig), 3.0);
  EXPECT_DOUBLE_EQ(raw_forgetting(orig, replay), 3.0);
  EXPECT_EQ(raw_forgetting(orig, orig), 0.0);
  const auto target = GaussianMixture::gaussian(vec({2, 0}), 0.5 * Matrix::Identity(2, 2));
  EXPECT_DOUBLE_EQ(amnesia_baseline(GaussianMixture::standard(1, 2), target), 4.5);
}

TEST(RawForgetting, SymmetricAndZeroOnlyForEqualMoments) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    const auto a = random_mixture(rng, 3, 3);
    const auto b = random_mixture(rng, 3, 3);
    EXPECT_EQ(raw_forgetting(a, b), raw_forgetting(b, a));
    EXPECT_GT(raw_forgetting(a, b), 0.0);
  }
}

TEST(RawForgetting, MatchesSampledMoments) {
  std::mt19937_64 rng(2);
  const auto a = random_mixture(rng, 3, 2);
  const auto b = random_mixture(rng, 2, 2);
  const auto moments_of = [](const Matrix& x) {
    const Vector mean = x.colwise().mean().transpose();
    const Matrix c = x.rowwise() - mean.transpose();
    return Moments{mean, c.transpose() * c / static_cast<double>(x.rows() - 1)};
  };
  const double mc = raw_forgetting(moments_of(sample(a, 3, 1'000'000)), moments_of(sample(b, 4, 1'000'000)));
  EXPECT_NEAR(mc, raw_forgetting(a, b), 0.02 * raw_forgetting(a, b));
}

TEST(Normalized, DegenerateBaseline) {
  const auto prior = GaussianMixture::standard(1, 2);
  EXPECT_TRUE(degenerate_baseline(amnesia_baseline(prior, prior)));
  EXPECT_THROW(normalized_forgetting(1.0, 0.0), NumericalError);
  EXPECT_EQ(normalized_forgetting(0.0, 2.0), 0.0);
  EXPECT_EQ(normalized_forgetting(2.0, 2.0), 1.0);
}

TEST(Normalized, DeterministicStart) {
  const auto target = GaussianMixture::gaussian(vec({2, 0}), 0.5 * Matrix::Identity(2, 2));
  EXPECT_DOUBLE_EQ(amnesia_baseline(deterministic_start(vec({0, 0})), target), 4.0 + 0.5);
  EXPECT_DOUBLE_EQ(amnesia_baseline(deterministic_start(vec({2, 0})), target), 0.5);
}

TEST(MatchComponents, RecoversSwap) {
  std::mt19937_64 rng(3);
  const auto a = random_mixture(rng, 3, 2);
  const GaussianMixture b(vec({a.weight(0), a.weight(2), a.weight(1)}), {a.mean(0), a.mean(2), a.mean(1)},
                          {a.cov(0), a.cov(2), a.cov(1)});
  EXPECT_EQ(match_components(a, b), (std::vector<int>{0, 2, 1}));
}

TEST(MatchComponents, TiesResolveToIdentity) {
  const auto a = GaussianMixture::standard(4, 2);
  EXPECT_EQ(match_components(a, a), (std::vector<int>{0, 1, 2, 3}));
  EXPECT_EQ(solve_assignment_lexicographic(Matrix::Zero(5, 5)), (std::vector<int>{0, 1, 2, 3, 4}));
}

TEST(MatchComponents, EqualsFactorialBruteForce) {
  std::mt19937_64 rng(4);
  for (int K = 1; K <= 6; ++K) {
    for (int trial = 0; trial < 200; ++trial) {
      const auto a = random_mixture(rng, K, 2);
      const auto b = random_mixture(rng, K, 2);
      Matrix cost(K, K);
      for (int i = 0; i < K; ++i)
        for (int j = 0; j < K; ++j) cost(i, j) = (a.mean(i) - b.mean(j)).squaredNorm();
      const auto fast = match_components(a, b);
      const auto slow = brute_force(cost);
      ASSERT_NEAR(assignment_cost(cost, fast), assignment_cost(cost, slow), 1e-12) << "K=" << K;
      ASSERT_EQ(fast, slow) << "K=" << K << " trial " << trial;
    }
  }
}

TEST(MatchComponents, PlainSolverOnIntegerCosts) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> small(0, 9);
  for (int trial = 0; trial < 300; ++trial) {
    const int K = 2 + trial % 6;
    Matrix cost(K, K);
    for (int i = 0; i < K; ++i)
      for (int j = 0; j < K; ++j) cost(i, j) = small(rng);
    const auto opt = brute_force(cost);
    EXPECT_EQ(assignment_cost(cost, solve_assignment(cost)), assignment_cost(cost, opt));
    EXPECT_EQ(solve_assignment_lexicographic(cost), opt);
  }
}

TEST(Decomposition, ZeroForIdenticalMixtures) {
  std::mt19937_64 rng(6);
  const auto a = random_mixture(rng, 3, 3);
  const auto d = decomposed_forgetting(a, a);
  EXPECT_EQ(d.mean, 0.0);
  EXPECT_EQ(d.cov, 0.0);
  EXPECT_EQ(d.weight, 0.0);
}

TEST(Decomposition, UsesLargerWeight) {
  const Matrix I = Matrix::Identity(1, 1);
  const GaussianMixture a(vec({0.25, 0.75}), {vec({0}), vec({5})}, {I, I});
  const GaussianMixture b(vec({0.5, 0.5}), {vec({1}), vec({5})}, {2 * I, I});
  const auto d = decomposed_forgetting(a, b);
  EXPECT_DOUBLE_EQ(d.mean, 0.5 * 1.0);
  EXPECT_DOUBLE_EQ(d.cov, 0.5 * 1.0);
  EXPECT_DOUBLE_EQ(d.weight, 0.0625 * 2);
}

TEST(ForgettingMatrix, TriangularCountAndDiagonal) {
  const auto records = default_records();
  ASSERT_EQ(records.size(), 5050u);
  int prev_n = 0, prev_m = 0;
  for (const auto& r : records) {
    EXPECT_TRUE(r.n > prev_n || (r.n == prev_n && r.m > prev_m));
    prev_n = r.n;
    prev_m = r.m;
    if (r.m == r.n) {
      EXPECT_EQ(r.raw, 0.0);
    }
  }
}

TEST(ForgettingMatrix, SerialEqualsParallel) {
  const auto a = default_records(Execution::serial);
  const auto b = default_records(Execution::parallel);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].raw, b[i].raw);
    EXPECT_EQ(a[i].normalized, b[i].normalized);
  }
}

TEST(AgeCurve, ConstantRecordsGiveConstantCurve) {
  std::vector<ForgettingRecord> records;
  for (int n = 1; n <= 8; ++n)
    for (int m = 1; m <= n; ++m) records.push_back({m, n, 1.0, 0.25, std::nullopt});
  const auto curve = age_curve(records);
  ASSERT_EQ(curve.ages.size(), 8u);
  for (std::size_t a = 0; a < 8; ++a) {
    EXPECT_EQ(curve.values[a], 0.25);
    EXPECT_EQ(curve.counts[a], 8 - static_cast<int>(a));
  }
  EXPECT_FALSE(half_life(curve, 0.5));
}

TEST(AgeCurve, SkipsDegenerateRecords) {
  std::vector<ForgettingRecord> records = {{1, 1, 0.0, 0.0, std::nullopt}, {1, 2, 1.0, std::nullopt, std::nullopt}};
  const auto curve = age_curve(records);
  EXPECT_EQ(curve.skipped, 1);
  EXPECT_EQ(curve.ages, std::vector<int>{0});
}

TEST(AgeCurve, InvariantUnderRecordOrder) {
  auto records = default_records();
  const auto reference = age_curve(records);
  std::mt19937_64 rng(7);
  std::shuffle(records.begin(), records.end(), rng);
  const auto shuffled = age_curve(records);
  ASSERT_EQ(reference.ages, shuffled.ages);
  for (std::size_t i = 0; i < reference.values.size(); ++i) {
    EXPECT_NEAR(reference.values[i], shuffled.values[i], 1e-14 * std::max(1.0, reference.values[i]));
  }
}

TEST(AgeCurve, DefaultRunShape) {
  const auto curve = age_curve(default_records());
  for (int a = 0; a <= 15; ++a) EXPECT_LT(*curve.at(a), 0.1) << a;
  EXPECT_EQ(half_life(curve), 30);
  EXPECT_GT(*std::max_element(curve.values.begin(), curve.values.end()), 1.0);
}

TEST(ChannelShares, EqualWeightTriangleRun) {
  StreamConfig cfg = default_stream(StreamKind::triangle);
  const auto targets = generate_stream(cfg);
  const auto prior = default_prior(targets);
  const auto records = forgetting_matrix(prior, targets, 10, {overall_moments(prior), true});
  for (const auto& r : records) EXPECT_LE(r.decomposition->weight, 1e-12);
  const auto shares = channel_shares(records);
  ASSERT_TRUE(shares);
  EXPECT_NEAR(shares->mean + shares->cov + shares->weight, 1.0, 1e-12);
  EXPECT_GT(shares->mean, 0.78);
  EXPECT_FALSE(channel_shares(default_records()));
}
