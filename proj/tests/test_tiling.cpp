#include "scenerag/tiling.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace scenerag;

namespace {

tvl1::Signal at_one_hz(std::vector<double> values) {
  tvl1::Signal s;
  s.timestamps.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    s.timestamps[i] = static_cast<double>(i);
  s.values = std::move(values);
  return s;
}

TEST(Threshold, KnownValues) {
  const std::vector<double> constant{3.0, 3.0, 3.0};
  EXPECT_DOUBLE_EQ(tiling::threshold(constant, 2.5), 3.0);  // sigma = 0

  const std::vector<double> pair{0.0, 2.0};  // mean 1, population sigma 1
  EXPECT_DOUBLE_EQ(tiling::threshold(pair, 1.0), 2.0);

  const std::vector<double> four{1.0, 2.0, 3.0, 4.0};
  EXPECT_DOUBLE_EQ(tiling::threshold(four, 0.0), 2.5);

  EXPECT_THROW(
      try {
        tiling::threshold(std::vector<double>{}, 1.0);
      } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyInput);
        throw;
      },
      Error);
}

TEST(Threshold, LinearInAlpha) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::vector<double> x(50);
  for (auto& v : x) v = uni(rng);
  const double sigma = tiling::threshold(x, 1.0) - tiling::threshold(x, 0.0);
  for (double a : {-2.0, -0.5, 0.3, 1.5, 4.0}) {
    for (double b : {0.25, 1.0, 2.0}) {
      EXPECT_NEAR(tiling::threshold(x, a + b) - tiling::threshold(x, a),
                  b * sigma, 1e-12);
    }
  }
}

TEST(ExtractRuns, KnownValues) {
  using Runs = std::vector<std::pair<std::size_t, std::size_t>>;
  const std::vector<double> x{0, 5, 5, 0, 5};
  EXPECT_EQ(tiling::extract_runs(x, 3.0), (Runs{{1, 3}, {4, 5}}));

  const std::vector<double> ones{1, 1, 1};
  EXPECT_EQ(tiling::extract_runs(ones, 2.0), Runs{});
  EXPECT_EQ(tiling::extract_runs(ones, 1.0), (Runs{{0, 3}}));  // inclusive >=
}

TEST(ExtractRuns, MatchesScanOracleOnRandomInput) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x(1 + static_cast<std::size_t>(rng() % 64));
    for (auto& v : x) v = uni(rng);
    const double k = uni(rng);
    EXPECT_EQ(tiling::extract_runs(x, k), testing::oracle_runs(x, k));
  }
}

TEST(ExtractRuns, IdempotentUnderRethreshold) {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::vector<double> x(80);
  for (auto& v : x) v = uni(rng);
  const double k = 0.2;
  const auto runs = tiling::extract_runs(x, k);
  // keep only covered values, re-threshold: same index set
  std::vector<double> masked(x.size(), -2.0);
  for (const auto& [b, e] : runs)
    for (std::size_t i = b; i < e; ++i) masked[i] = x[i];
  EXPECT_EQ(tiling::extract_runs(masked, k), runs);
}

TEST(ExtractRuns, CoverageMonotoneInAlpha) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::vector<double> x(120);
  for (auto& v : x) v = uni(rng);
  std::size_t prev_covered = x.size() + 1;
  for (double alpha : {-1.0, -0.5, 0.0, 0.5, 1.0, 2.0}) {
    const double k = tiling::threshold(x, alpha);
    std::size_t covered = 0;
    for (const auto& [b, e] : tiling::extract_runs(x, k)) covered += e - b;
    EXPECT_LE(covered, prev_covered);
    prev_covered = covered;
  }
}

TEST(FilterMinLength, EndTimeConvention) {
  // 1 Hz timestamps: median gap 1 s, run [0,4) ends at t=3+1=4
  const std::vector<double> ts{0, 1, 2, 3, 4, 5};
  using Runs = std::vector<std::pair<std::size_t, std::size_t>>;

  auto kept = tiling::filter_min_length(Runs{{0, 4}}, ts, 3.0);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_DOUBLE_EQ(kept[0].t_start, 0.0);
  EXPECT_DOUBLE_EQ(kept[0].t_end, 4.0);
  EXPECT_DOUBLE_EQ(kept[0].duration_seconds(), 4.0);

  EXPECT_TRUE(tiling::filter_min_length(Runs{{0, 2}}, ts, 3.0).empty());
  EXPECT_EQ(tiling::filter_min_length(Runs{{0, 2}}, ts, 0.0).size(), 1u);

  // single-index run lasts one frame period
  auto single = tiling::filter_min_length(Runs{{2, 3}}, ts, 0.5);
  ASSERT_EQ(single.size(), 1u);
  EXPECT_DOUBLE_EQ(single[0].duration_seconds(), 1.0);

  EXPECT_THROW(
      try {
        tiling::filter_min_length(Runs{{4, 7}}, ts, 0.0);
      } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::IndexOutOfRange);
        throw;
      },
      Error);
}

TEST(Tile, ConstantSignalFallsBackToWholeSignal) {
  const auto s = at_one_hz(std::vector<double>(30, 0.5));
  const auto segments = tiling::tile(s, {});
  ASSERT_EQ(segments.size(), 1u);
  EXPECT_EQ(segments[0].i_start, 0u);
  EXPECT_EQ(segments[0].i_end, 30u);
  EXPECT_DOUBLE_EQ(segments[0].t_start, 0.0);
  EXPECT_DOUBLE_EQ(segments[0].t_end, 30.0);
}

// 120 samples at 1 Hz, similarity 0.9 on [10,50) and [70,110), 0.1 elsewhere.
// With lambda=1.5, alpha=0.5, l_min=3 the two plateaus are recovered exactly;
// +/-2 indices of slack bound any edge smoothing.
TEST(Tile, RecoversPlantedScenes) {
  std::vector<double> v(120, 0.1);
  for (std::size_t i = 10; i < 50; ++i) v[i] = 0.9;
  for (std::size_t i = 70; i < 110; ++i) v[i] = 0.9;
  const auto s = at_one_hz(std::move(v));

  tiling::TilingParams params;
  params.lambda = 1.5;
  params.alpha = 0.5;
  params.l_min_seconds = 3.0;
  const auto segments = tiling::tile(s, params);

  ASSERT_EQ(segments.size(), 2u);
  EXPECT_NEAR(static_cast<double>(segments[0].i_start), 10.0, 2.0);
  EXPECT_NEAR(static_cast<double>(segments[0].i_end), 50.0, 2.0);
  EXPECT_NEAR(static_cast<double>(segments[1].i_start), 70.0, 2.0);
  EXPECT_NEAR(static_cast<double>(segments[1].i_end), 110.0, 2.0);
}

TEST(Tile, AllRunsTooShortFallsBack) {
  // alternating spikes: every run is a single index; l_min = 3 discards all
  std::vector<double> v(40, 0.0);
  for (std::size_t i = 1; i < 40; i += 6) v[i] = 1.0;
  const auto s = at_one_hz(std::move(v));
  tiling::TilingParams params;
  params.lambda = 0.0;  // keep the spikes
  params.alpha = 1.0;
  params.l_min_seconds = 3.0;
  const auto segments = tiling::tile(s, params);
  ASSERT_EQ(segments.size(), 1u);
  EXPECT_EQ(segments[0].i_start, 0u);
  EXPECT_EQ(segments[0].i_end, 40u);
}

TEST(Tile, OutputSegmentsSortedDisjointLongEnough) {
  std::mt19937_64 rng(27);
  for (int trial = 0; trial < 25; ++trial) {
    const auto planted = testing::planted_signal(rng);
    tiling::TilingParams params;  // defaults: lambda 1.5, alpha 1.5, l_min 3
    const auto segments = tiling::tile(planted.signal, params);
    ASSERT_FALSE(segments.empty());
    const bool fallback = segments.size() == 1 &&
                          segments[0].i_start == 0 &&
                          segments[0].i_end == planted.signal.values.size();
    for (std::size_t i = 0; i < segments.size(); ++i) {
      EXPECT_LT(segments[i].i_start, segments[i].i_end);
      EXPECT_GT(segments[i].duration_seconds(), 0.0);
      if (!fallback)
        EXPECT_GE(segments[i].duration_seconds(), params.l_min_seconds);
      if (i > 0) EXPECT_LE(segments[i - 1].i_end, segments[i].i_start);
    }
  }
}

TEST(Tile, Deterministic) {
  std::mt19937_64 rng(33);
  const auto planted = testing::planted_signal(rng);
  const auto a = tiling::tile(planted.signal, {});
  const auto b = tiling::tile(planted.signal, {});
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(MedianFrameGap, Conventions) {
  const std::vector<double> odd{0.0, 1.0, 3.0, 6.0};  // gaps 1,2,3 -> 2
  EXPECT_DOUBLE_EQ(tiling::median_frame_gap(odd), 2.0);
  const std::vector<double> even{0.0, 1.0, 3.0};  // gaps 1,2 -> 1.5
  EXPECT_DOUBLE_EQ(tiling::median_frame_gap(even), 1.5);
  const std::vector<double> lone{5.0};  // nominal 1 s period
  EXPECT_DOUBLE_EQ(tiling::median_frame_gap(lone), 1.0);
}

}  // namespace
