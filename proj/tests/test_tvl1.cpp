#include "scenerag/tvl1.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "support/oracles.hpp"

using namespace scenerag;

namespace {

tvl1::Signal make_signal(std::vector<double> values) {
  tvl1::Signal s;
  s.timestamps.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    s.timestamps[i] = static_cast<double>(i);
  s.values = std::move(values);
  return s;
}

std::vector<double> random_values(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = uni(rng);
  return v;
}

// Count plateaus under the relative-tolerance equality rule.
std::size_t plateau_count(const std::vector<double>& x) {
  std::size_t count = 1;
  for (std::size_t i = 0; i + 1 < x.size(); ++i)
    if (std::abs(x[i] - x[i + 1]) > 1e-9 * std::max(1.0, std::abs(x[i])))
      ++count;
  return count;
}

TEST(Tvl1Denoise, LambdaZeroIsIdentity) {
  const auto s = make_signal({0.3, -0.7, 0.2, 0.9, -1.0});
  const auto x = tvl1::denoise(s, {.lambda = 0.0});
  EXPECT_EQ(x, s.values);
}

TEST(Tvl1Denoise, ConstantSignalIsFixedPoint) {
  const auto s = make_signal({0.42, 0.42, 0.42, 0.42});
  for (double lambda : {0.0, 0.3, 1.5, 100.0}) {
    const auto x = tvl1::denoise(s, {.lambda = lambda});
    for (double v : x) EXPECT_DOUBLE_EQ(v, 0.42);
  }
}

TEST(Tvl1Denoise, SingleSampleReturnsItself) {
  const auto s = make_signal({0.77});
  EXPECT_EQ(tvl1::denoise(s, {.lambda = 3.0}), std::vector<double>{0.77});
}

// s = [0,0,1,1], lambda = 0.25: two plateaus at lambda/2 and 1 - lambda/2.
// Value confirmed by the projected-gradient oracle at gap tolerance 1e-13.
TEST(Tvl1Denoise, StepSignalSmallLambda) {
  const auto s = make_signal({0.0, 0.0, 1.0, 1.0});
  const auto x = tvl1::denoise(s, {.lambda = 0.25});
  const std::vector<double> expected{0.125, 0.125, 0.875, 0.875};
  ASSERT_EQ(x.size(), expected.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    EXPECT_NEAR(x[i], expected[i], 1e-12);

  const auto oracle = testing::oracle_denoise(s, {.lambda = 0.25}, 1e-13);
  for (std::size_t i = 0; i < x.size(); ++i)
    EXPECT_NEAR(oracle[i], expected[i], 1e-6);
}

// The solution collapses to the mean once lambda >= max_k |sum_{t<=k}(s_t - mean)|,
// which is 1.0 for this signal.
TEST(Tvl1Denoise, StepSignalCollapsesToMean) {
  const auto s = make_signal({0.0, 0.0, 1.0, 1.0});
  for (double lambda : {1.0, 1.5, 10.0}) {
    const auto x = tvl1::denoise(s, {.lambda = lambda});
    for (double v : x) EXPECT_NEAR(v, 0.5, 1e-12);
  }
}

TEST(Tvl1Denoise, RejectsBadInput) {
  EXPECT_THROW(
      try { tvl1::denoise({}, {.lambda = 1.0}); } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptySignal);
        throw;
      },
      Error);

  auto nan_sig = make_signal({0.0, std::nan(""), 1.0});
  EXPECT_THROW(
      try {
        tvl1::denoise(nan_sig, {.lambda = 1.0});
      } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonFiniteInput);
        throw;
      },
      Error);

  const auto ok = make_signal({0.0, 1.0});
  EXPECT_THROW(
      try { tvl1::denoise(ok, {.lambda = -0.5}); } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidLambda);
        throw;
      },
      Error);
  EXPECT_THROW(tvl1::denoise(ok, {.lambda = std::nan("")}), Error);

  tvl1::Signal mismatched;
  mismatched.values = {1.0, 2.0};
  mismatched.timestamps = {0.0};
  EXPECT_THROW(
      try {
        tvl1::denoise(mismatched, {.lambda = 1.0});
      } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::LengthMismatch);
        throw;
      },
      Error);
}

TEST(Tvl1Objective, KnownValues) {
  const auto s = make_signal({0.0, 0.0, 1.0, 1.0});
  // x == s: fidelity is zero, TV(s) = 1
  EXPECT_DOUBLE_EQ(tvl1::objective(s, s.values, 0.25), 0.25);

  const std::vector<double> x{0.125, 0.125, 0.875, 0.875};
  EXPECT_NEAR(tvl1::objective(s, x, 0.25), 0.21875, 1e-15);

  const auto s2 = make_signal({0.0, 1.0});
  const std::vector<double> x2{0.0, 0.0};
  EXPECT_DOUBLE_EQ(tvl1::objective(s2, x2, 1.0), 0.5);

  EXPECT_THROW(
      try { tvl1::objective(s, x2, 1.0); } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::LengthMismatch);
        throw;
      },
      Error);
}

// KKT certificate of the exact minimizer: with r_k the cumulative residual
// sum_{t<=k}(x_t - s_t), |r_k| <= lambda for every k < n, r_n = 0, and r_k
// hits +/-lambda at each plateau boundary with the sign of the jump.
TEST(Tvl1Denoise, KktCumulativeResidualCertificate) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::size_t> len(2, 100);
  std::uniform_real_distribution<double> loglam(std::log(0.01), std::log(10.0));
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = make_signal(random_values(rng, len(rng)));
    const double lambda = std::exp(loglam(rng));
    const auto x = tvl1::denoise(s, {.lambda = lambda});

    double r = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      r += x[k] - s.values[k];
      if (k + 1 < x.size()) {
        ASSERT_LE(std::abs(r), lambda + 1e-9);
        const double jump = x[k + 1] - x[k];
        if (std::abs(jump) > 1e-9 * std::max(1.0, std::abs(x[k]))) {
          const double expected = jump > 0 ? lambda : -lambda;
          ASSERT_NEAR(r, expected, 1e-9);
        }
      }
    }
    ASSERT_NEAR(r, 0.0, 1e-9);  // mean preservation
  }
}

TEST(Tvl1Denoise, RangeConfinement) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> len(1, 80);
  for (int trial = 0; trial < 100; ++trial) {
    const auto s = make_signal(random_values(rng, len(rng)));
    const auto x = tvl1::denoise(s, {.lambda = 0.8});
    const auto [lo, hi] =
        std::minmax_element(s.values.begin(), s.values.end());
    for (double v : x) {
      ASSERT_GE(v, *lo);
      ASSERT_LE(v, *hi);
    }
  }
}

TEST(Tvl1Denoise, ProxNonexpansiveness) {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<std::size_t> len(2, 60);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = len(rng);
    const auto a = random_values(rng, n);
    const auto b = random_values(rng, n);
    const auto xa = tvl1::denoise_values(a, 1.5);
    const auto xb = tvl1::denoise_values(b, 1.5);
    double din = 0.0, dout = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      din += (a[i] - b[i]) * (a[i] - b[i]);
      dout += (xa[i] - xb[i]) * (xa[i] - xb[i]);
    }
    ASSERT_LE(std::sqrt(dout), std::sqrt(din) * (1.0 + 1e-10) + 1e-12);
  }
}

TEST(Tvl1Denoise, PlateauCountNonincreasingInLambda) {
  std::mt19937_64 rng(17);
  const std::vector<double> grid{0.01, 0.1, 0.5, 1.5, 5.0, 20.0};
  for (int trial = 0; trial < 50; ++trial) {
    const auto values = random_values(rng, 64);
    std::size_t prev = values.size() + 1;
    for (double lambda : grid) {
      const auto x = tvl1::denoise_values(values, lambda);
      const std::size_t count = plateau_count(x);
      ASSERT_LE(count, prev) << "lambda=" << lambda;
      prev = count;
    }
  }
}

TEST(Tvl1Oracle, MatchesFastSolver) {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<std::size_t> len(1, 100);
  std::uniform_real_distribution<double> loglam(std::log(0.01), std::log(10.0));
  for (int trial = 0; trial < 60; ++trial) {
    const auto s = make_signal(random_values(rng, len(rng)));
    const double lambda = std::exp(loglam(rng));
    const auto fast = tvl1::denoise(s, {.lambda = lambda});
    const auto slow = testing::oracle_denoise(s, {.lambda = lambda}, 1e-13);
    for (std::size_t i = 0; i < fast.size(); ++i)
      ASSERT_NEAR(fast[i], slow[i], 1e-6);
  }
}

TEST(Tvl1Oracle, TrivialCases) {
  const auto s = make_signal({0.4, -0.2, 0.6});
  const auto id = testing::oracle_denoise(s, {.lambda = 0.0}, 1e-13);
  for (std::size_t i = 0; i < s.values.size(); ++i)
    EXPECT_DOUBLE_EQ(id[i], s.values[i]);

  const auto c = make_signal({0.5, 0.5, 0.5});
  const auto xc = testing::oracle_denoise(c, {.lambda = 2.0}, 1e-13);
  for (double v : xc) EXPECT_NEAR(v, 0.5, 1e-7);

  EXPECT_THROW(testing::oracle_denoise(s, {.lambda = 1.0}, 1e-13, 2), Error);
}

}  // namespace
