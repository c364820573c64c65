#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "scenerag/errors.hpp"
#include "scenerag/log.hpp"

namespace scenerag::clients {

// What a visual request points at: a slice of one video.
struct SceneRef {
  std::string video_id;
  double t_start = 0.0;
  double t_end = 0.0;
  std::vector<std::string> frame_refs;
};

struct EmbedRequest {
  enum class Kind { scene_visual, text };

  Kind kind = Kind::text;
  SceneRef scene;    // meaningful when kind == scene_visual
  std::string text;  // meaningful when kind == text

  static EmbedRequest visual(SceneRef ref) {
    EmbedRequest r;
    r.kind = Kind::scene_visual;
    r.scene = std::move(ref);
    return r;
  }
  static EmbedRequest for_text(std::string t) {
    EmbedRequest r;
    r.kind = Kind::text;
    r.text = std::move(t);
    return r;
  }
};

// A fine-grained sub-query produced by decomposition. Index 0 is always the
// full original query.
struct Clue {
  std::string text;
  std::size_t index = 0;
};

class EmbedClient {
 public:
  virtual ~EmbedClient() = default;
  virtual std::vector<float> embed(const EmbedRequest& request) = 0;
  virtual std::size_t dim() const = 0;
  // Stable identity of this embedder's output space; part of cache keys.
  virtual std::string fingerprint() const = 0;
};

class CaptionClient {
 public:
  virtual ~CaptionClient() = default;
  virtual std::string caption_audio(const SceneRef& scene) = 0;
};

class DecomposeClient {
 public:
  virtual ~DecomposeClient() = default;
  // Raw clue texts; the caller prepends the original query and caps the list.
  virtual std::vector<std::string> decompose(const std::string& query,
                                             std::size_t max_clues) = 0;
};

namespace detail {

inline std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes,
                             std::uint64_t seed = 0xcbf29ce484222325ull) {
  std::uint64_t h = seed;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s,
                             std::uint64_t seed = 0xcbf29ce484222325ull) {
  return fnv1a64(
      std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()),
      seed);
}

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97f4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string canonical_payload(const EmbedRequest& r) {
  if (r.kind == EmbedRequest::Kind::text) return "text\x1f" + r.text;
  std::string s = "scene\x1f" + r.scene.video_id + "\x1f" +
                  fmt_double(r.scene.t_start) + "\x1f" +
                  fmt_double(r.scene.t_end);
  for (const auto& f : r.scene.frame_refs) s += "\x1f" + f;
  return s;
}

inline double overlap_seconds(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

}  // namespace detail

// Deterministic, dependency-free stand-in for the visual/text encoder: the
// payload is hashed and expanded into d pseudo-random Gaussian coordinates,
// then l2-normalized. Identical payloads map to identical vectors across
// process restarts; distinct payloads collide with 64-bit-hash probability.
// Fixture vectors can be pinned per text or per video time range, which is
// how tests plant semantic structure.
class MockEmbedder final : public EmbedClient {
 public:
  MockEmbedder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
    if (dim_ == 0) raise(ErrorCode::InvalidArgument, "embed dim must be >= 1");
  }

  std::vector<float> embed(const EmbedRequest& request) override {
    if (request.kind == EmbedRequest::Kind::text) {
      if (auto it = text_fixtures_.find_vec(request.text)) return normalize(*it);
    } else {
      const ScenePin* best = nullptr;
      double best_overlap = 0.0;
      for (const auto& pin : scene_pins_) {
        if (pin.video_id != request.scene.video_id) continue;
        const double ov =
            detail::overlap_seconds(pin.t_start, pin.t_end,
                                    request.scene.t_start, request.scene.t_end);
        if (ov > best_overlap) {
          best_overlap = ov;
          best = &pin;
        }
      }
      if (best) return normalize(best->vec);
    }
    return hash_to_sphere(detail::canonical_payload(request));
  }

  std::size_t dim() const override { return dim_; }

  std::string fingerprint() const override {
    return "mock:dim=" + std::to_string(dim_) +
           ":seed=" + std::to_string(seed_);
  }

  // Pin the vector returned for one exact text payload.
  void pin_text(const std::string& text, std::vector<float> vec) {
    text_fixtures_.items.emplace_back(text, std::move(vec));
  }

  // Pin the vector returned for any scene_visual request overlapping
  // [t_start, t_end) of video_id; the largest overlap wins.
  void pin_scene(const std::string& video_id, double t_start, double t_end,
                 std::vector<float> vec) {
    scene_pins_.push_back({video_id, t_start, t_end, std::move(vec)});
  }

 private:
  struct ScenePin {
    std::string video_id;
    double t_start, t_end;
    std::vector<float> vec;
  };
  struct TextFixtures {
    std::vector<std::pair<std::string, std::vector<float>>> items;
    const std::vector<float>* find_vec(const std::string& text) const {
      for (const auto& [t, v] : items)
        if (t == text) return &v;
      return nullptr;
    }
  };

  std::vector<float> normalize(std::vector<float> v) const {
    if (v.size() != dim_)
      raise(ErrorCode::DimensionMismatch,
            "fixture vector has dim " + std::to_string(v.size()) +
                ", embedder is configured for " + std::to_string(dim_));
    double norm = 0.0;
    for (float c : v) norm += static_cast<double>(c) * c;
    norm = std::sqrt(norm);
    if (norm == 0.0)
      raise(ErrorCode::InvalidArgument, "fixture vector has zero norm");
    for (float& c : v) c = static_cast<float>(c / norm);
    return v;
  }

  std::vector<float> hash_to_sphere(const std::string& payload) const {
    std::uint64_t state =
        detail::fnv1a64(payload, detail::fnv1a64(std::to_string(seed_)));
    std::vector<double> coords(dim_);
    for (std::size_t i = 0; i < dim_; i += 2) {
      // Box-Muller on two uniform draws
      const double u1 =
          (static_cast<double>(detail::splitmix64(state) >> 11) + 1.0) /
          9007199254740993.0;  // (0, 1)
      const double u2 =
          static_cast<double>(detail::splitmix64(state) >> 11) /
          9007199254740992.0;  // [0, 1)
      const double r = std::sqrt(-2.0 * std::log(u1));
      coords[i] = r * std::cos(2.0 * std::numbers::pi * u2);
      if (i + 1 < dim_) coords[i + 1] = r * std::sin(2.0 * std::numbers::pi * u2);
    }
    double norm = 0.0;
    for (double c : coords) norm += c * c;
    norm = std::sqrt(norm);
    if (norm == 0.0) {
      coords[0] = 1.0;
      norm = 1.0;
    }
    std::vector<float> out(dim_);
    for (std::size_t i = 0; i < dim_; ++i)
      out[i] = static_cast<float>(coords[i] / norm);
    return out;
  }

  std::size_t dim_;
  std::uint64_t seed_;
  TextFixtures text_fixtures_;
  std::vector<ScenePin> scene_pins_;
};

// Caption fixture map keyed by video time overlap. Scenes that match no
// fixture caption to the empty string, mirroring a silent track. A fault
// span makes the matching call raise Timeout, for failure-path tests.
class MockCaptioner final : public CaptionClient {
 public:
  std::string caption_audio(const SceneRef& scene) override {
    for (const auto& f : faults_) {
      if (f.video_id == scene.video_id &&
          detail::overlap_seconds(f.t_start, f.t_end, scene.t_start,
                                  scene.t_end) > 0.0)
        raise(ErrorCode::Timeout, "captioner deadline exceeded (injected)");
    }
    const Fixture* best = nullptr;
    double best_overlap = 0.0;
    for (const auto& f : fixtures_) {
      if (f.video_id != scene.video_id) continue;
      const double ov = detail::overlap_seconds(f.t_start, f.t_end,
                                                scene.t_start, scene.t_end);
      if (ov > best_overlap) {
        best_overlap = ov;
        best = &f;
      }
    }
    return best ? best->caption : std::string{};
  }

  void add_caption(const std::string& video_id, double t_start, double t_end,
                   std::string caption) {
    fixtures_.push_back({video_id, t_start, t_end, std::move(caption)});
  }

  void add_fault(const std::string& video_id, double t_start, double t_end) {
    faults_.push_back({video_id, t_start, t_end, {}});
  }

 private:
  struct Fixture {
    std::string video_id;
    double t_start, t_end;
    std::string caption;
  };
  std::vector<Fixture> fixtures_;
  std::vector<Fixture> faults_;
};

// Test decomposer with a scripted response; an empty script simulates a
// malformed upstream answer and exercises the fallback path.
class ScriptedDecomposer final : public DecomposeClient {
 public:
  explicit ScriptedDecomposer(std::vector<std::string> clues)
      : clues_(std::move(clues)) {}

  std::vector<std::string> decompose(const std::string&, std::size_t) override {
    return clues_;
  }

 private:
  std::vector<std::string> clues_;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline bool is_coordinating_conjunction(std::string word) {
  std::transform(word.begin(), word.end(), word.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return word == "for" || word == "and" || word == "nor" || word == "but" ||
         word == "or" || word == "yet" || word == "so";
}

inline bool has_letter_or_digit(const std::string& s) {
  return std::any_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isalnum(c) != 0;
  });
}

// Split on sentence-final punctuation (kept with the fragment), then break
// each sentence at standalone coordinating conjunctions (dropped).
inline std::vector<std::string> rule_based_fragments(const std::string& query) {
  std::vector<std::string> sentences;
  std::string cur;
  for (std::size_t i = 0; i < query.size(); ++i) {
    cur += query[i];
    if (query[i] == '.' || query[i] == '!' || query[i] == '?') {
      while (i + 1 < query.size() &&
             (query[i + 1] == '.' || query[i + 1] == '!' ||
              query[i + 1] == '?')) {
        cur += query[++i];
      }
      sentences.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) sentences.push_back(cur);

  std::vector<std::string> fragments;
  for (const auto& sentence : sentences) {
    std::string piece;
    std::string word;
    auto flush_word = [&]() {
      if (word.empty()) return;
      if (is_coordinating_conjunction(word)) {
        const std::string t = trim(piece);
        if (has_letter_or_digit(t)) fragments.push_back(t);
        piece.clear();
      } else {
        if (!piece.empty()) piece += ' ';
        piece += word;
      }
      word.clear();
    };
    for (char c : sentence) {
      if (std::isspace(static_cast<unsigned char>(c))) {
        flush_word();
      } else {
        word += c;
      }
    }
    flush_word();
    const std::string t = trim(piece);
    if (has_letter_or_digit(t)) fragments.push_back(t);
  }
  return fragments;
}

}  // namespace detail

// Deterministic rule-based decomposition; no external model involved.
inline std::vector<Clue> fallback_decompose(const std::string& query,
                                            std::size_t max_clues) {
  const std::string original = detail::trim(query);
  if (original.empty()) raise(ErrorCode::EmptyInput, "empty query");
  if (max_clues == 0)
    raise(ErrorCode::InvalidArgument, "max_clues must be >= 1");
  std::vector<Clue> clues;
  clues.push_back({original, 0});
  for (const auto& frag : detail::rule_based_fragments(original)) {
    if (clues.size() >= max_clues) break;
    const bool dup = std::any_of(clues.begin(), clues.end(),
                                 [&](const Clue& c) { return c.text == frag; });
    if (!dup) clues.push_back({frag, clues.size()});
  }
  return clues;
}

// Decomposition entry point: uses the configured client when present, and
// silently degrades to the rule-based splitter on any client failure or an
// empty response. Never fails for a nonempty query.
inline std::vector<Clue> decompose(const std::string& query,
                                   std::size_t max_clues,
                                   DecomposeClient* client = nullptr) {
  const std::string original = detail::trim(query);
  if (original.empty()) raise(ErrorCode::EmptyInput, "empty query");
  if (max_clues == 0)
    raise(ErrorCode::InvalidArgument, "max_clues must be >= 1");
  if (client) {
    try {
      std::vector<std::string> raw = client->decompose(original, max_clues);
      std::vector<Clue> clues;
      clues.push_back({original, 0});
      for (auto& r : raw) {
        if (clues.size() >= max_clues) break;
        const std::string t = detail::trim(r);
        if (t.empty()) continue;
        const bool dup =
            std::any_of(clues.begin(), clues.end(),
                        [&](const Clue& c) { return c.text == t; });
        if (!dup) clues.push_back({t, clues.size()});
      }
      if (clues.size() > 1) return clues;
      log::warn("decomposer returned no usable clues; using rule-based fallback");
    } catch (const Error& e) {
      log::warn(std::string("decomposer failed (") +
                error_code_name(e.code()) + "): " + e.what() +
                "; using rule-based fallback");
    }
  }
  return fallback_decompose(original, max_clues);
}

}  // namespace scenerag::clients
