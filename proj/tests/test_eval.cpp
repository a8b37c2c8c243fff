#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "halfvae/eval.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace halfvae;
using testing_support::random_matrix;

TEST(Zscore, Examples) {
  const auto z = zscore(std::vector<double>{1.0, 2.0, 3.0});
  EXPECT_NEAR(z[0], -1.224745, 1e-6);
  EXPECT_NEAR(z[1], 0.0, 1e-15);
  EXPECT_NEAR(z[2], 1.224745, 1e-6);
  const auto again = zscore(z);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(again[i], z[i], 1e-10);
  EXPECT_THROW(zscore(std::vector<double>{5.0, 5.0, 5.0}), DegenerateInputError);
  EXPECT_THROW(zscore(std::vector<double>{1.0}), DegenerateInputError);
}

TEST(Zscore, Postconditions) {
  Rng rng(1);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> v(2 + t % 50);
    const double scale = std::exp(rng.normal(0.0, 3.0)), shift = rng.normal(0.0, 100.0);
    for (auto& x : v) x = shift + scale * rng.normal();
    const auto z = zscore(v);
    double m = 0, s = 0;
    for (double x : z) m += x;
    m /= z.size();
    for (double x : z) s += (x - m) * (x - m);
    EXPECT_LE(std::abs(m), 1e-10);
    EXPECT_LE(std::abs(std::sqrt(s / z.size()) - 1.0), 1e-10);
  }
}

TEST(Rmse, Examples) {
  const std::vector<double> a{0.3, -1.0, 2.0};
  EXPECT_EQ(rmse(a, a), 0.0);
  EXPECT_EQ(rmse(std::vector<double>{0, 0}, std::vector<double>{1, 1}), 1.0);
  Rng rng(2);
  std::vector<double> x(17), y(17);
  for (auto& v : x) v = rng.normal();
  for (auto& v : y) v = rng.normal();
  double acc = 0;
  for (int i = 0; i < 17; ++i) acc += (x[i] - y[i]) * (x[i] - y[i]);
  EXPECT_NEAR(rmse(x, y), std::sqrt(acc / 17), 1e-14);
  EXPECT_THROW(rmse(x, std::vector<double>(3)), ShapeError);
}

TEST(Align, RecoversPermutation) {
  Rng rng(3);
  const Matrix truth = random_matrix(3, 40, rng);
  Matrix est(3, 40);
  const std::size_t src[] = {1, 0, 2};
  for (std::size_t i = 0; i < 3; ++i) std::copy(truth.row(src[i]).begin(), truth.row(src[i]).end(), est.row(i).begin());
  const auto a = align_components(est, truth);
  EXPECT_EQ(a.permutation, (std::vector<std::size_t>{1, 0, 2}));
  EXPECT_EQ(a.signs, (std::vector<int>{1, 1, 1}));
  EXPECT_NEAR(a.mean_rmse, 0.0, 1e-14);
}

TEST(Align, RecoversSignFlip) {
  Rng rng(4);
  const Matrix truth = random_matrix(3, 40, rng);
  Matrix est = truth;
  for (auto& v : est.row(2)) v = -v;
  const auto a = align_components(est, truth);
  EXPECT_EQ(a.permutation, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(a.signs, (std::vector<int>{1, 1, -1}));
  EXPECT_NEAR(a.mean_rmse, 0.0, 1e-14);
}

TEST(Align, ScaleIsIrrelevant) {
  Rng rng(5);
  const Matrix truth = random_matrix(3, 40, rng);
  Matrix est = truth;
  for (auto& v : est.flat()) v *= 3.0;
  EXPECT_NEAR(align_components(est, truth).mean_rmse, 0.0, 1e-14);
}

TEST(Align, InvariantsHold) {
  Rng rng(6);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 2 + t % 4;
    const Matrix truth = random_matrix(n, 30, rng);
    const Matrix est = random_matrix(n, 30, rng);
    const auto base = align_components(est, truth);
    std::vector<std::size_t> seen(base.permutation);
    std::sort(seen.begin(), seen.end());
    for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(seen[i], i);
    EXPECT_NEAR(base.mean_rmse,
                std::accumulate(base.per_component_rmse.begin(), base.per_component_rmse.end(), 0.0) / n, 1e-15);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    Matrix moved(n, 30);
    for (std::size_t i = 0; i < n; ++i) {
      const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
      const double scale = std::exp(rng.normal(0.0, 2.0));
      for (std::size_t c = 0; c < 30; ++c) moved(i, c) = sign * scale * est(order[i], c);
    }
    EXPECT_NEAR(align_components(moved, truth).mean_rmse, base.mean_rmse, 1e-10);
  }
}

TEST(Align, MatchesBruteForceOracle) {
  Rng rng(7);
  for (int t = 0; t < 60; ++t) {
    const std::size_t n = 1 + t % 4;
    const Matrix truth = random_matrix(n, 25, rng);
    Matrix est = random_matrix(n, 25, rng);
    // Mix in truth so the optimum is not always trivial noise.
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < 25; ++c) est(i, c) += 0.8 * truth((i + 1) % n, c);
    const auto a = align_components(est, truth);
    const auto o = oracle::brute_force_align(est, truth);
    EXPECT_EQ(a.permutation, o.permutation);
    EXPECT_EQ(a.signs, o.signs);
    EXPECT_NEAR(a.mean_rmse, o.mean_rmse, 1e-12);
  }
}

TEST(Align, Errors) {
  Rng rng(8);
  EXPECT_THROW(align_components(Matrix(9, 10, 1.0), Matrix(9, 10, 1.0)), SizeLimitError);
  Matrix truth = random_matrix(2, 10, rng);
  Matrix est = random_matrix(2, 10, rng);
  for (auto& v : est.row(1)) v = 4.0;
  EXPECT_THROW(align_components(est, truth), DegenerateInputError);
  EXPECT_THROW(align_components(Matrix(2, 10), Matrix(2, 11)), ShapeError);
}

TEST(Align, EightComponentsIsAllowed) {
  Rng rng(9);
  const Matrix truth = random_matrix(8, 12, rng);
  Matrix est(8, 12);
  for (std::size_t i = 0; i < 8; ++i) std::copy(truth.row(7 - i).begin(), truth.row(7 - i).end(), est.row(i).begin());
  const auto a = align_components(est, truth);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(a.permutation[i], 7 - i);
  EXPECT_NEAR(a.mean_rmse, 0.0, 1e-14);
}

TEST(ScoreModels, PerfectRecoveryIsAllZero) {
  Rng rng(10);
  const Matrix truth = random_matrix(3, 20, rng);
  const auto table = score_models({{"a", truth}, {"b", truth}}, truth);
  ASSERT_EQ(table.models.size(), 2u);
  for (const auto& m : table.models) {
    EXPECT_EQ(m.alignment.mean_rmse, 0.0);
    for (double v : m.per_truth_component_rmse) EXPECT_EQ(v, 0.0);
  }
}

TEST(ScoreModels, HandComputedTwoByFour) {
  // truth rows (1,2,3,4) and (1,-1,1,-1). Estimate row 0 is -2x truth row 1
  // (exact after a sign flip); estimate row 1 swaps the last two entries of
  // truth row 0, giving z-score differences (0, 0, 2, -2)/sqrt(5), RMSE sqrt(0.4).
  const Matrix truth{{1, 2, 3, 4}, {1, -1, 1, -1}};
  const Matrix est{{-2, 2, -2, 2}, {1, 2, 4, 3}};
  const auto table = score_models({{"m", est}}, truth);
  const auto& s = table.models.front();
  EXPECT_EQ(s.alignment.permutation, (std::vector<std::size_t>{1, 0}));
  EXPECT_EQ(s.alignment.signs, (std::vector<int>{-1, 1}));
  EXPECT_NEAR(s.per_truth_component_rmse[0], std::sqrt(0.4), 1e-15);
  EXPECT_NEAR(s.per_truth_component_rmse[1], 0.0, 1e-15);
  EXPECT_NEAR(s.alignment.mean_rmse, std::sqrt(0.4) / 2.0, 1e-15);
}

TEST(AlignedEstimate, ReordersIntoTruthOrder) {
  Rng rng(11);
  const Matrix truth = random_matrix(3, 15, rng);
  Matrix est(3, 15);
  const std::size_t src[] = {2, 0, 1};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t c = 0; c < 15; ++c) est(i, c) = -5.0 * truth(src[i], c);
  const Matrix aligned = aligned_estimate(est, align_components(est, truth));
  const Matrix zt = zscore_rows(truth);
  for (std::size_t i = 0; i < aligned.size(); ++i) EXPECT_NEAR(aligned.flat()[i], zt.flat()[i], 1e-12);
}
