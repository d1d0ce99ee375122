#include <gtest/gtest.h>

#include <random>

#include "adaptraj/metrics.hpp"

using namespace adaptraj;

namespace {

std::vector<Trajectory> random_batch(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> d(0.0, 3.0);
  std::vector<Trajectory> out(n);
  for (auto& t : out) {
    for (std::size_t i = 0; i < kPredLen; ++i) t.push_back({d(rng), d(rng)});
  }
  return out;
}

}  // namespace

TEST(Metrics, MatchNaiveOracle) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 9;
    const auto p = random_batch(rng, n), g = random_batch(rng, n);
    double sum = 0, fsum = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t t = 0; t < kPredLen; ++t) {
        sum += std::sqrt((p[i][t].x - g[i][t].x) * (p[i][t].x - g[i][t].x) +
                         (p[i][t].y - g[i][t].y) * (p[i][t].y - g[i][t].y));
      }
      fsum += std::sqrt((p[i][11].x - g[i][11].x) * (p[i][11].x - g[i][11].x) +
                        (p[i][11].y - g[i][11].y) * (p[i][11].y - g[i][11].y));
    }
    EXPECT_NEAR(ade(p, g), sum / static_cast<double>(n * kPredLen), 1e-9);
    EXPECT_NEAR(fde(p, g), fsum / static_cast<double>(n), 1e-9);
  }
}

TEST(Metrics, ConstantOffsets) {
  Trajectory truth(kPredLen, Location{1, 1}), pred(kPredLen, Location{4, 5});
  EXPECT_EQ(ade(pred, truth), 5.0);
  EXPECT_EQ(ade(truth, truth), 0.0);
  pred = truth;
  pred.back() = {1, 3};
  EXPECT_EQ(fde(pred, truth), 2.0);
  EXPECT_EQ(fde(truth, truth), 0.0);
}

TEST(Metrics, BoundedByLargestStepError) {
  std::mt19937_64 rng(2);
  const auto p = random_batch(rng, 4), g = random_batch(rng, 4);
  double worst = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t t = 0; t < kPredLen; ++t) worst = std::max(worst, std::hypot(p[i][t].x - g[i][t].x, p[i][t].y - g[i][t].y));
  }
  EXPECT_GE(ade(p, g), 0.0);
  EXPECT_LE(ade(p, g), worst);
}

TEST(Metrics, Errors) {
  const std::vector<Trajectory> empty;
  EXPECT_THROW(ade(empty, empty), DataError);
  EXPECT_THROW(fde(empty, empty), DataError);
  std::vector<Trajectory> a(2, Trajectory(kPredLen)), b(1, Trajectory(kPredLen));
  EXPECT_THROW(ade(a, b), DimensionError);
  b.assign(2, Trajectory(kPredLen - 1));
  EXPECT_THROW(fde(a, b), DimensionError);
}
