#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "scenerag/errors.hpp"
#include "scenerag/tvl1.hpp"

namespace scenerag::tiling {

struct TilingParams {
  double alpha = 1.5;          // threshold sensitivity (may be negative)
  double l_min_seconds = 3.0;  // minimum segment duration
  double lambda = 1.5;         // denoiser regularization strength
};

inline void validate(const TilingParams& p) {
  if (!std::isfinite(p.alpha))
    raise(ErrorCode::InvalidArgument, "alpha must be finite");
  if (!std::isfinite(p.l_min_seconds) || p.l_min_seconds < 0.0)
    raise(ErrorCode::InvalidArgument, "l_min_seconds must be >= 0");
  tvl1::validate_lambda(p.lambda);
}

// Half-open slice of a signal plus its span on the video timeline.
struct SceneSegment {
  std::size_t i_start = 0;
  std::size_t i_end = 0;  // exclusive
  double t_start = 0.0;
  double t_end = 0.0;  // exclusive

  double duration_seconds() const { return t_end - t_start; }

  friend bool operator==(const SceneSegment&, const SceneSegment&) = default;
};

// k = mean + alpha * population standard deviation (divisor n).
inline double threshold(std::span<const double> x, double alpha) {
  if (x.empty()) raise(ErrorCode::EmptyInput, "threshold over empty sequence");
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.size());
  return mean + alpha * std::sqrt(var);
}

// Maximal runs of consecutive indices with x[i] >= k, as half-open intervals.
inline std::vector<std::pair<std::size_t, std::size_t>> extract_runs(
    std::span<const double> x, double k) {
  if (x.empty()) raise(ErrorCode::EmptyInput, "extract_runs over empty sequence");
  std::vector<std::pair<std::size_t, std::size_t>> runs;
  std::size_t i = 0;
  while (i < x.size()) {
    if (x[i] >= k) {
      std::size_t j = i + 1;
      while (j < x.size() && x[j] >= k) ++j;
      runs.emplace_back(i, j);
      i = j;
    } else {
      ++i;
    }
  }
  return runs;
}

// Median of consecutive timestamp differences; the typical frame period.
// Falls back to 1 s when the signal is too short to carry a gap.
inline double median_frame_gap(std::span<const double> timestamps) {
  if (timestamps.size() < 2) return 1.0;
  std::vector<double> gaps(timestamps.size() - 1);
  for (std::size_t i = 0; i + 1 < timestamps.size(); ++i)
    gaps[i] = timestamps[i + 1] - timestamps[i];
  const std::size_t mid = gaps.size() / 2;
  std::nth_element(gaps.begin(), gaps.begin() + mid, gaps.end());
  if (gaps.size() % 2 == 1) return gaps[mid];
  const double hi = gaps[mid];
  const double lo = *std::max_element(gaps.begin(), gaps.begin() + mid);
  return 0.5 * (lo + hi);
}

// A run's end time is its last member timestamp plus the median inter-frame
// gap, so single-index runs still carry one frame period of duration.
inline std::vector<SceneSegment> filter_min_length(
    std::span<const std::pair<std::size_t, std::size_t>> runs,
    std::span<const double> timestamps, double l_min_seconds) {
  const double gap = median_frame_gap(timestamps);
  std::vector<SceneSegment> segments;
  for (const auto& [i_start, i_end] : runs) {
    if (i_start >= i_end || i_end > timestamps.size())
      raise(ErrorCode::IndexOutOfRange,
            "run [" + std::to_string(i_start) + ", " + std::to_string(i_end) +
                ") does not fit a signal of length " +
                std::to_string(timestamps.size()));
    SceneSegment seg;
    seg.i_start = i_start;
    seg.i_end = i_end;
    seg.t_start = timestamps[i_start];
    seg.t_end = timestamps[i_end - 1] + gap;
    if (seg.duration_seconds() >= l_min_seconds) segments.push_back(seg);
  }
  return segments;
}

// denoise -> threshold -> runs -> duration filter. An empty result collapses
// to a single whole-signal segment so downstream memory construction always
// has at least one scene to index.
inline std::vector<SceneSegment> tile(const tvl1::Signal& signal,
                                      const TilingParams& params) {
  tvl1::validate(signal);
  validate(params);
  const std::vector<double> x =
      tvl1::denoise_values(signal.values, params.lambda);
  const double k = threshold(x, params.alpha);
  const auto runs = extract_runs(x, k);
  auto segments =
      filter_min_length(runs, signal.timestamps, params.l_min_seconds);
  if (segments.empty()) {
    SceneSegment whole;
    whole.i_start = 0;
    whole.i_end = signal.values.size();
    whole.t_start = signal.timestamps.front();
    whole.t_end =
        signal.timestamps.back() + median_frame_gap(signal.timestamps);
    segments.push_back(whole);
  }
  return segments;
}

}  // namespace scenerag::tiling
