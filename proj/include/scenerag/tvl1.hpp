#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "scenerag/errors.hpp"

namespace scenerag::tvl1 {

// A similarity sequence sampled along a video timeline. `values[i]` was
// observed at `timestamps[i]` seconds. Timestamps are only used downstream
// to convert index runs into durations; the solver itself works on indices.
struct Signal {
  std::vector<double> values;
  std::vector<double> timestamps;
};

struct DenoiseParams {
  double lambda = 1.5;
};

inline void validate(const Signal& s) {
  if (s.values.empty()) raise(ErrorCode::EmptySignal, "signal has no samples");
  if (s.values.size() != s.timestamps.size())
    raise(ErrorCode::LengthMismatch,
          "signal has " + std::to_string(s.values.size()) + " values but " +
              std::to_string(s.timestamps.size()) + " timestamps");
  for (double v : s.values)
    if (!std::isfinite(v))
      raise(ErrorCode::NonFiniteInput, "signal contains a non-finite value");
  double prev = -1.0;
  for (double t : s.timestamps) {
    if (!std::isfinite(t) || t < 0.0)
      raise(ErrorCode::NonFiniteInput,
            "timestamps must be finite and nonnegative");
    if (t <= prev)
      raise(ErrorCode::NonFiniteInput, "timestamps must be strictly increasing");
    prev = t;
  }
}

inline void validate_lambda(double lambda) {
  if (!std::isfinite(lambda) || lambda < 0.0)
    raise(ErrorCode::InvalidLambda,
          "lambda must be finite and nonnegative, got " +
              std::to_string(lambda));
}

// Exact minimizer of
//     1/2 * sum_t (x_t - y_t)^2  +  lambda * sum_{t>=2} |x_t - x_{t-1}|
// via dynamic programming over prefixes. The derivative of each prefix value
// function is piecewise linear and nondecreasing; it is kept as a breakpoint
// list with (slope, intercept) deltas, clipped to [-lambda, +lambda] before
// each new data term is added. Backtracking through the recorded clip knots
// yields the minimizer. O(n) in practice: each step appends at most two
// breakpoints and every breakpoint is consumed at most once.
inline std::vector<double> denoise_values(std::span<const double> y,
                                          double lambda) {
  const std::size_t n = y.size();
  std::vector<double> x(y.begin(), y.end());
  if (n <= 1 || lambda == 0.0) return x;

  std::vector<double> pos(2 * n);  // breakpoint positions, ascending in [l, r]
  std::vector<double> da(2 * n);   // slope delta across pos[i]
  std::vector<double> db(2 * n);   // intercept delta across pos[i]
  std::vector<double> clip_lo(n - 1), clip_hi(n - 1);

  // First data term by hand: f_1'(t) = t - y[0].
  std::size_t l = n - 1;
  std::size_t r = n;
  clip_lo[0] = y[0] - lambda;
  clip_hi[0] = y[0] + lambda;
  pos[l] = clip_lo[0];
  pos[r] = clip_hi[0];
  da[l] = 1.0;
  db[l] = -y[0] + lambda;
  da[r] = -1.0;
  db[r] = y[0] + lambda;
  // Derivative line left of pos[l] (flat clip plus the new quadratic), and
  // the negated line right of pos[r] so both scans accumulate the same way.
  double a_lo = 1.0, b_lo = -y[1] - lambda;
  double a_hi = -1.0, b_hi = y[1] - lambda;

  for (std::size_t k = 1; k + 1 < n; ++k) {
    // Walk right until the current piece crosses -lambda.
    double alo = a_lo, blo = b_lo;
    std::size_t lo = l;
    while (lo <= r && alo * pos[lo] + blo <= -lambda) {
      alo += da[lo];
      blo += db[lo];
      ++lo;
    }
    // Walk left until the (negated) current piece crosses +lambda.
    double ahi = a_hi, bhi = b_hi;
    std::size_t hi = r;
    while (hi >= lo && -ahi * pos[hi] - bhi >= lambda) {
      ahi += da[hi];
      bhi += db[hi];
      --hi;
    }

    clip_lo[k] = (-lambda - blo) / alo;
    l = lo - 1;
    pos[l] = clip_lo[k];
    da[l] = alo;
    db[l] = blo + lambda;

    clip_hi[k] = (lambda + bhi) / (-ahi);
    r = hi + 1;
    pos[r] = clip_hi[k];
    da[r] = ahi;
    db[r] = bhi + lambda;

    a_lo = 1.0;
    b_lo = -y[k + 1] - lambda;
    a_hi = -1.0;
    b_hi = y[k + 1] - lambda;
  }

  // Root of the final (unclipped) derivative.
  double alo = a_lo, blo = b_lo;
  std::size_t lo = l;
  while (lo <= r && alo * pos[lo] + blo <= 0.0) {
    alo += da[lo];
    blo += db[lo];
    ++lo;
  }
  x[n - 1] = -blo / alo;

  for (std::size_t k = n - 1; k-- > 0;)
    x[k] = std::clamp(x[k + 1], clip_lo[k], clip_hi[k]);

  // The exact minimizer lies in [min(y), max(y)]; pin down float residue so
  // the range invariant holds bit-exactly.
  const auto [mn, mx] = std::minmax_element(y.begin(), y.end());
  for (double& v : x) v = std::clamp(v, *mn, *mx);
  return x;
}

inline std::vector<double> denoise(const Signal& signal,
                                   const DenoiseParams& params) {
  validate(signal);
  validate_lambda(params.lambda);
  return denoise_values(signal.values, params.lambda);
}

// 1/2 * sum (x_t - s_t)^2 + lambda * sum_{t>=2} |x_t - x_{t-1}|
inline double objective(const Signal& signal, std::span<const double> x,
                        double lambda) {
  if (x.size() != signal.values.size())
    raise(ErrorCode::LengthMismatch,
          "candidate has " + std::to_string(x.size()) + " values, signal has " +
              std::to_string(signal.values.size()));
  double fidelity = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - signal.values[i];
    fidelity += d * d;
  }
  double tv = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) tv += std::abs(x[i] - x[i - 1]);
  return 0.5 * fidelity + lambda * tv;
}

}  // namespace scenerag::tvl1
