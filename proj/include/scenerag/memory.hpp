#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "scenerag/errors.hpp"
#include "scenerag/log.hpp"
#include "scenerag/tiling.hpp"

namespace scenerag::memory {

// One scene of one video: where it lives on the timeline, what it looks
// like, what it sounds like.
struct SceneEntry {
  std::string entry_id;
  std::string video_id;
  tiling::SceneSegment segment;
  std::vector<float> visual_embedding;  // unit l2 norm
  std::string audio_caption;            // empty when the track is silent
};

struct MemoryBank {
  std::vector<SceneEntry> entries;  // ascending (video_id, t_start, entry_id)
  std::size_t dim = 0;
};

struct RetrievalHit {
  std::string entry_id;
  double score = 0.0;                 // cosine similarity
  std::size_t matched_clue_index = 0;
  std::size_t entry_index = 0;        // position in bank.entries
};

inline double embedding_norm(std::span<const float> v) {
  double s = 0.0;
  for (float c : v) s += static_cast<double>(c) * static_cast<double>(c);
  return std::sqrt(s);
}

inline double cosine_score(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

// Validates entries, renormalizes slightly-off embeddings (deviation in
// (1e-6, 1e-3]) with a warning, and orders the bank. The bank is immutable
// after this call.
inline MemoryBank build_bank(std::vector<SceneEntry> entries) {
  if (entries.empty()) raise(ErrorCode::EmptyInput, "bank needs at least one entry");
  MemoryBank bank;
  bank.dim = entries.front().visual_embedding.size();
  if (bank.dim == 0)
    raise(ErrorCode::DimensionMismatch, "zero-dimensional embedding");

  std::unordered_set<std::string> seen;
  for (auto& e : entries) {
    if (e.visual_embedding.size() != bank.dim)
      raise(ErrorCode::DimensionMismatch,
            "entry " + e.entry_id + " has dim " +
                std::to_string(e.visual_embedding.size()) + ", bank has " +
                std::to_string(bank.dim));
    if (!seen.insert(e.entry_id).second)
      raise(ErrorCode::DuplicateEntryId, "duplicate entry_id " + e.entry_id);
    const double norm = embedding_norm(e.visual_embedding);
    const double dev = std::abs(norm - 1.0);
    if (dev > 1e-3)
      raise(ErrorCode::DenormalizedEmbedding,
            "entry " + e.entry_id + " has ||v|| = " + std::to_string(norm));
    if (dev > 1e-6) {
      log::warn("renormalizing embedding of entry " + e.entry_id +
                " (||v|| = " + std::to_string(norm) + ")");
      for (float& c : e.visual_embedding)
        c = static_cast<float>(c / norm);
    }
  }
  std::sort(entries.begin(), entries.end(),
            [](const SceneEntry& a, const SceneEntry& b) {
              if (a.video_id != b.video_id) return a.video_id < b.video_id;
              if (a.segment.t_start != b.segment.t_start)
                return a.segment.t_start < b.segment.t_start;
              return a.entry_id < b.entry_id;
            });
  bank.entries = std::move(entries);
  return bank;
}

namespace detail {

// Descending score, ties broken by bank position (which encodes ascending
// video_id, t_start, entry_id).
struct Scored {
  double score;
  std::size_t index;
  std::size_t clue;
};

inline std::vector<RetrievalHit> select_top(const MemoryBank& bank,
                                            std::vector<Scored> scored,
                                            std::size_t k) {
  const std::size_t take = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + take, scored.end(),
                    [](const Scored& a, const Scored& b) {
                      if (a.score != b.score) return a.score > b.score;
                      return a.index < b.index;
                    });
  std::vector<RetrievalHit> hits;
  hits.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    const auto& s = scored[i];
    hits.push_back({bank.entries[s.index].entry_id, s.score, s.clue, s.index});
  }
  return hits;
}

}  // namespace detail

inline std::vector<RetrievalHit> search(const MemoryBank& bank,
                                        std::span<const float> query_vec,
                                        std::size_t k) {
  if (bank.entries.empty()) raise(ErrorCode::EmptyBank, "search over empty bank");
  if (query_vec.size() != bank.dim)
    raise(ErrorCode::DimensionMismatch,
          "query dim " + std::to_string(query_vec.size()) + " != bank dim " +
              std::to_string(bank.dim));
  if (k == 0) raise(ErrorCode::InvalidArgument, "k must be >= 1");
  std::vector<detail::Scored> scored;
  scored.reserve(bank.entries.size());
  for (std::size_t i = 0; i < bank.entries.size(); ++i)
    scored.push_back(
        {cosine_score(bank.entries[i].visual_embedding, query_vec), i, 0});
  return detail::select_top(bank, std::move(scored), k);
}

// Each entry is scored by its best cosine over all clues (ties keep the
// lowest clue index); the global top-K of those scores is returned. An entry
// can appear at most once no matter how many clues match it.
inline std::vector<RetrievalHit> global_topk(
    const MemoryBank& bank, std::span<const std::vector<float>> clue_vecs,
    std::size_t k) {
  if (bank.entries.empty())
    raise(ErrorCode::EmptyBank, "global_topk over empty bank");
  if (clue_vecs.empty()) raise(ErrorCode::NoClues, "no clue vectors given");
  if (k == 0) raise(ErrorCode::InvalidArgument, "K must be >= 1");
  for (const auto& c : clue_vecs)
    if (c.size() != bank.dim)
      raise(ErrorCode::DimensionMismatch,
            "clue dim " + std::to_string(c.size()) + " != bank dim " +
                std::to_string(bank.dim));
  std::vector<detail::Scored> scored;
  scored.reserve(bank.entries.size());
  for (std::size_t i = 0; i < bank.entries.size(); ++i) {
    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_clue = 0;
    for (std::size_t c = 0; c < clue_vecs.size(); ++c) {
      const double s =
          cosine_score(bank.entries[i].visual_embedding, clue_vecs[c]);
      if (s > best) {
        best = s;
        best_clue = c;
      }
    }
    scored.push_back({best, i, best_clue});
  }
  return detail::select_top(bank, std::move(scored), k);
}

// ---------------------------------------------------------------------------
// Persistence. Little-endian container, layout documented in
// docs/formats.md:
//   magic "SRAGBNK1" | schema_version u32 | dim u32 | count u64 | crc32 u32
//   then per entry:
//   entry_id str | video_id str | i_start u64 | i_end u64 | t_start f64 |
//   t_end f64 | embedding dim*f32 | caption str
// Strings are u32 length + UTF-8 bytes. The CRC covers everything after the
// checksum field.
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr std::array<char, 8> kBankMagic = {'S', 'R', 'A', 'G',
                                                   'B', 'N', 'K', '1'};
inline constexpr std::uint32_t kBankSchemaVersion = 1;

inline std::uint32_t crc32(std::span<const std::uint8_t> data,
                           std::uint32_t seed = 0) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k)
        c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : (c >> 1);
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t crc = seed ^ 0xFFFFFFFFu;
  for (std::uint8_t b : data) crc = table[(crc ^ b) & 0xFFu] ^ (crc >> 8);
  return crc ^ 0xFFFFFFFFu;
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xFFu);
}

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back((v >> (8 * i)) & 0xFFu);
}

inline void put_f32(std::vector<std::uint8_t>& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

inline void put_f64(std::vector<std::uint8_t>& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

inline void put_str(std::vector<std::uint8_t>& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str() {
    const std::uint32_t len = u32();
    need(len);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), len);
    pos_ += len;
    return s;
  }
  bool exhausted() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t bytes) {
    if (pos_ + bytes > data_.size())
      raise(ErrorCode::CorruptBank, "bank file truncated");
  }
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline void save_bank(const MemoryBank& bank,
                      const std::filesystem::path& path) {
  std::vector<std::uint8_t> payload;
  for (const auto& e : bank.entries) {
    detail::put_str(payload, e.entry_id);
    detail::put_str(payload, e.video_id);
    detail::put_u64(payload, e.segment.i_start);
    detail::put_u64(payload, e.segment.i_end);
    detail::put_f64(payload, e.segment.t_start);
    detail::put_f64(payload, e.segment.t_end);
    for (float c : e.visual_embedding) detail::put_f32(payload, c);
    detail::put_str(payload, e.audio_caption);
  }

  std::vector<std::uint8_t> head;
  head.insert(head.end(), detail::kBankMagic.begin(), detail::kBankMagic.end());
  detail::put_u32(head, detail::kBankSchemaVersion);
  detail::put_u32(head, static_cast<std::uint32_t>(bank.dim));
  detail::put_u64(head, bank.entries.size());
  detail::put_u32(head, detail::crc32(payload));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(head.data()),
            static_cast<std::streamsize>(head.size()));
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size()));
  if (!out) raise(ErrorCode::IoFailure, "write failed for " + path.string());
}

inline MemoryBank load_bank(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  if (in.bad()) raise(ErrorCode::IoFailure, "read failed for " + path.string());

  constexpr std::size_t header_size = 8 + 4 + 4 + 8 + 4;
  if (data.size() < header_size)
    raise(ErrorCode::CorruptBank, "bank file shorter than its header");
  if (!std::equal(detail::kBankMagic.begin(), detail::kBankMagic.end(),
                  reinterpret_cast<const char*>(data.data())))
    raise(ErrorCode::CorruptBank, "bad magic: not a bank file");

  const std::span<const std::uint8_t> whole(data);
  detail::Reader header(whole.subspan(8, header_size - 8));
  const std::uint32_t version = header.u32();
  if (version != detail::kBankSchemaVersion)
    raise(ErrorCode::VersionMismatch,
          "bank schema_version " + std::to_string(version) +
              " is not supported (expected " +
              std::to_string(detail::kBankSchemaVersion) + ")");
  const std::uint32_t dim = header.u32();
  const std::uint64_t count = header.u64();
  const std::uint32_t stored_crc = header.u32();

  const auto payload = whole.subspan(header_size);
  if (detail::crc32(payload) != stored_crc)
    raise(ErrorCode::CorruptBank, "bank payload checksum mismatch");

  MemoryBank bank;
  bank.dim = dim;
  detail::Reader r(payload);
  for (std::uint64_t i = 0; i < count; ++i) {
    SceneEntry e;
    e.entry_id = r.str();
    e.video_id = r.str();
    e.segment.i_start = r.u64();
    e.segment.i_end = r.u64();
    e.segment.t_start = r.f64();
    e.segment.t_end = r.f64();
    e.visual_embedding.resize(dim);
    for (std::uint32_t d = 0; d < dim; ++d) e.visual_embedding[d] = r.f32();
    e.audio_caption = r.str();
    bank.entries.push_back(std::move(e));
  }
  if (!r.exhausted())
    raise(ErrorCode::CorruptBank, "bank file has trailing bytes");
  if (bank.entries.empty())
    raise(ErrorCode::CorruptBank, "bank file holds no entries");
  return bank;
}

}  // namespace scenerag::memory
