#pragma once

// Seeded generators for planted-ground-truth fixtures shared by the unit and
// acceptance suites.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "scenerag/bench.hpp"
#include "scenerag/clients.hpp"
#include "scenerag/memory.hpp"
#include "scenerag/pipeline.hpp"
#include "scenerag/tvl1.hpp"

namespace scenerag::testing {

inline std::vector<float> random_unit_vector(std::size_t dim,
                                             std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> v(dim);
  double norm = 0.0;
  for (auto& c : v) {
    c = gauss(rng);
    norm += c * c;
  }
  norm = std::sqrt(norm);
  if (norm == 0.0) {
    v[0] = 1.0;
    norm = 1.0;
  }
  std::vector<float> out(dim);
  for (std::size_t i = 0; i < dim; ++i)
    out[i] = static_cast<float>(v[i] / norm);
  return out;
}

// Two high-similarity runs planted into a low-similarity background, with
// additive Gaussian noise. Ground truth is carried in signal index space.
struct PlantedSignal {
  tvl1::Signal signal;
  std::size_t run1_begin, run1_end;  // half-open signal index ranges
  std::size_t run2_begin, run2_end;
  double high, low;
};

inline PlantedSignal planted_signal(std::mt19937_64& rng,
                                    std::size_t n = 420,
                                    double contrast_min = 0.6,
                                    double contrast_max = 0.8,
                                    double noise_max = 0.08) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  PlantedSignal out;
  const double contrast =
      contrast_min + (contrast_max - contrast_min) * uni(rng);
  out.low = 0.05 + 0.1 * uni(rng);
  out.high = out.low + contrast;
  const double noise = 0.02 + (noise_max - 0.02) * uni(rng);

  std::uniform_int_distribution<std::size_t> run_len(25, 45);
  const std::size_t len1 = run_len(rng), len2 = run_len(rng);
  // keep the runs and the boundaries well separated
  std::uniform_int_distribution<std::size_t> start1(10, 60);
  out.run1_begin = start1(rng);
  out.run1_end = out.run1_begin + len1;
  std::uniform_int_distribution<std::size_t> start2(out.run1_end + 60,
                                                    n - 10 - 45);
  out.run2_begin = start2(rng);
  out.run2_end = out.run2_begin + len2;

  std::normal_distribution<double> gauss(0.0, noise);
  out.signal.values.resize(n);
  out.signal.timestamps.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool hot = (i >= out.run1_begin && i < out.run1_end) ||
                     (i >= out.run2_begin && i < out.run2_end);
    double v = (hot ? out.high : out.low) + gauss(rng);
    out.signal.values[i] = std::clamp(v, -1.0, 1.0);
    out.signal.timestamps[i] = static_cast<double>(i);
  }
  return out;
}

// A manifest whose frame embeddings are constructed so consecutive-frame
// cosines reproduce a planted two-scene similarity pattern exactly: each next
// frame is the previous one rotated by the angle the target similarity
// dictates, inside the plane spanned with a fresh orthogonal direction.
struct PlantedManifest {
  pipeline::VideoManifest manifest;
  // planted coherent frame ranges, half-open
  std::size_t scene1_begin, scene1_end;
  std::size_t scene2_begin, scene2_end;
  // the same in frame-timestamp seconds
  double scene1_t0, scene1_t1;
  double scene2_t0, scene2_t1;
};

inline PlantedManifest planted_manifest(std::mt19937_64& rng,
                                        const std::string& video_id,
                                        std::size_t dim = 32,
                                        std::size_t n_frames = 240,
                                        double frame_period = 1.0,
                                        double high = 0.92, double low = 0.15,
                                        double noise = 0.03) {
  PlantedManifest out;
  out.manifest.video_id = video_id;

  std::uniform_int_distribution<std::size_t> run_len(25, 45);
  const std::size_t len1 = run_len(rng), len2 = run_len(rng);
  std::uniform_int_distribution<std::size_t> start1(8, 40);
  out.scene1_begin = start1(rng);
  out.scene1_end = out.scene1_begin + len1;
  std::uniform_int_distribution<std::size_t> start2(out.scene1_end + 40,
                                                    n_frames - len2 - 8);
  out.scene2_begin = start2(rng);
  out.scene2_end = out.scene2_begin + len2;
  out.scene1_t0 = static_cast<double>(out.scene1_begin) * frame_period;
  out.scene1_t1 = static_cast<double>(out.scene1_end) * frame_period;
  out.scene2_t0 = static_cast<double>(out.scene2_begin) * frame_period;
  out.scene2_t1 = static_cast<double>(out.scene2_end) * frame_period;

  std::normal_distribution<double> gauss(0.0, 1.0);
  std::normal_distribution<double> jitter(0.0, noise);
  std::vector<double> cur(dim);
  double norm = 0.0;
  for (auto& c : cur) {
    c = gauss(rng);
    norm += c * c;
  }
  norm = std::sqrt(norm);
  for (auto& c : cur) c /= norm;

  for (std::size_t i = 0; i < n_frames; ++i) {
    pipeline::FrameRecord f;
    f.timestamp = static_cast<double>(i) * frame_period;
    f.ref = video_id + "/frame-" + std::to_string(i) + ".jpg";
    f.embedding.resize(dim);
    for (std::size_t d = 0; d < dim; ++d)
      f.embedding[d] = static_cast<float>(cur[d]);
    out.manifest.frames.push_back(std::move(f));
    if (i + 1 == n_frames) break;

    // target similarity between frame i and i+1
    const bool coherent =
        (i + 1 > out.scene1_begin && i + 1 < out.scene1_end) ||
        (i + 1 > out.scene2_begin && i + 1 < out.scene2_end);
    const double target =
        std::clamp((coherent ? high : low) + jitter(rng), -0.999, 0.999);

    // orthogonal direction via one Gram-Schmidt step
    std::vector<double> ortho(dim);
    double dot = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      ortho[d] = gauss(rng);
      dot += ortho[d] * cur[d];
    }
    double onorm = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      ortho[d] -= dot * cur[d];
      onorm += ortho[d] * ortho[d];
    }
    onorm = std::sqrt(onorm);
    const double sin_part = std::sqrt(std::max(0.0, 1.0 - target * target));
    for (std::size_t d = 0; d < dim; ++d)
      cur[d] = target * cur[d] + sin_part * (ortho[d] / onorm);
  }
  return out;
}

// Random well-formed bank for retrieval and persistence tests.
inline memory::MemoryBank random_bank(std::mt19937_64& rng,
                                      std::size_t entries, std::size_t dim,
                                      std::size_t videos = 4) {
  std::vector<memory::SceneEntry> list;
  list.reserve(entries);
  std::uniform_real_distribution<double> dur(1.0, 30.0);
  std::vector<double> cursor(videos, 0.0);
  for (std::size_t i = 0; i < entries; ++i) {
    memory::SceneEntry e;
    const std::size_t vid = i % videos;
    e.video_id = "vid-" + std::to_string(vid);
    e.entry_id = e.video_id + "#" + std::to_string(i);
    e.segment.i_start = i;
    e.segment.i_end = i + 2;
    e.segment.t_start = cursor[vid];
    cursor[vid] += dur(rng);
    e.segment.t_end = cursor[vid];
    e.visual_embedding = random_unit_vector(dim, rng);
    if (i % 3 == 0) e.audio_caption = "caption " + std::to_string(i);
    list.push_back(std::move(e));
  }
  return memory::build_bank(std::move(list));
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<unsigned> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("scenerag-" + tag + "-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace scenerag::testing
