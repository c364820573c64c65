#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "scenerag/clients.hpp"
#include "scenerag/errors.hpp"
#include "scenerag/http_clients.hpp"
#include "scenerag/log.hpp"
#include "scenerag/pipeline.hpp"

namespace scenerag::config {

// Runtime configuration; a JSON file plus SCENERAG_* environment overrides.
// Schema documented in docs/formats.md.
struct Config {
  std::string embedder = "mock";     // "mock" or an http(s) URL
  std::string captioner = "mock";    // "mock" or an http(s) URL
  std::string decomposer = "fallback";  // "fallback" or an http(s) URL
  int embed_dim = 64;
  std::uint64_t seed = 42;           // mock determinism
  std::string cache_dir = ".scenerag-cache";
  std::string log_level = "info";
  int timeout_ms = 5000;
  int retry_backoff_ms = 100;
  int workers = 1;
  pipeline::PipelineParams params{};
  // Reserved smoothing weight carried alongside lambda; the denoiser only
  // consumes lambda. Kept as a named knob so configs can state it explicitly.
  double mu = 0.5;
};

namespace detail {

inline void apply_env_overrides(Config& c) {
  auto str = [](const char* name, std::string& field) {
    if (const char* v = std::getenv(name)) field = v;
  };
  auto integer = [](const char* name, auto& field) {
    if (const char* v = std::getenv(name)) {
      try {
        field = static_cast<std::decay_t<decltype(field)>>(std::stoll(v));
      } catch (...) {
        raise(ErrorCode::BadConfig,
              std::string(name) + " is not an integer: " + v);
      }
    }
  };
  auto real = [](const char* name, double& field) {
    if (const char* v = std::getenv(name)) {
      try {
        field = std::stod(v);
      } catch (...) {
        raise(ErrorCode::BadConfig,
              std::string(name) + " is not a number: " + v);
      }
    }
  };
  str("SCENERAG_EMBEDDER", c.embedder);
  str("SCENERAG_CAPTIONER", c.captioner);
  str("SCENERAG_DECOMPOSER", c.decomposer);
  integer("SCENERAG_EMBED_DIM", c.embed_dim);
  integer("SCENERAG_SEED", c.seed);
  str("SCENERAG_CACHE_DIR", c.cache_dir);
  str("SCENERAG_LOG_LEVEL", c.log_level);
  integer("SCENERAG_TIMEOUT_MS", c.timeout_ms);
  integer("SCENERAG_RETRY_BACKOFF_MS", c.retry_backoff_ms);
  integer("SCENERAG_WORKERS", c.workers);
  real("SCENERAG_ALPHA", c.params.tiling.alpha);
  real("SCENERAG_L_MIN", c.params.tiling.l_min_seconds);
  real("SCENERAG_LAMBDA", c.params.tiling.lambda);
  integer("SCENERAG_TOP_K", c.params.top_k);
  real("SCENERAG_MIX_RATIO", c.params.mix_ratio);
  integer("SCENERAG_FRAME_BUDGET", c.params.frame_budget);
  integer("SCENERAG_MAX_CLUES", c.params.max_clues);
  real("SCENERAG_MU", c.mu);
}

}  // namespace detail

inline void validate(const Config& c) {
  if (c.embed_dim < 1) raise(ErrorCode::BadConfig, "embed_dim must be >= 1");
  if (c.timeout_ms < 1) raise(ErrorCode::BadConfig, "timeout_ms must be >= 1");
  if (c.workers < 1) raise(ErrorCode::BadConfig, "workers must be >= 1");
  try {
    pipeline::validate(c.params);
  } catch (const Error& e) {
    raise(ErrorCode::BadConfig, e.what());
  }
}

inline Config config_from_json(const nlohmann::json& j) {
  Config c;
  if (!j.is_object()) raise(ErrorCode::BadConfig, "config must be a JSON object");
  c.embedder = j.value("embedder", c.embedder);
  c.captioner = j.value("captioner", c.captioner);
  c.decomposer = j.value("decomposer", c.decomposer);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.seed = j.value("seed", c.seed);
  c.cache_dir = j.value("cache_dir", c.cache_dir);
  c.log_level = j.value("log_level", c.log_level);
  c.timeout_ms = j.value("timeout_ms", c.timeout_ms);
  c.retry_backoff_ms = j.value("retry_backoff_ms", c.retry_backoff_ms);
  c.workers = j.value("workers", c.workers);
  c.mu = j.value("mu", c.mu);
  if (j.contains("params")) {
    const auto& p = j["params"];
    c.params.tiling.alpha = p.value("alpha", c.params.tiling.alpha);
    c.params.tiling.l_min_seconds =
        p.value("l_min_seconds", c.params.tiling.l_min_seconds);
    c.params.tiling.lambda = p.value("lambda", c.params.tiling.lambda);
    c.params.top_k = p.value("top_k", c.params.top_k);
    c.params.mix_ratio = p.value("mix_ratio", c.params.mix_ratio);
    c.params.frame_budget = p.value("frame_budget", c.params.frame_budget);
    c.params.max_clues = p.value("max_clues", c.params.max_clues);
  }
  return c;
}

// Defaults -> file (when given) -> environment, then validation.
inline Config load(const std::filesystem::path& path = {}) {
  Config c;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) raise(ErrorCode::IoFailure, "cannot open config " + path.string());
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded())
      raise(ErrorCode::BadConfig, path.string() + " is not valid JSON");
    c = config_from_json(j);
  }
  detail::apply_env_overrides(c);
  validate(c);
  log::settings().level = log::parse_level(c.log_level);
  return c;
}

// Builds the client set the config names: deterministic in-process mocks, or
// HTTP bindings for real endpoints.
inline pipeline::Clients make_clients(const Config& c) {
  pipeline::Clients out;
  clients::HttpOptions opts;
  opts.timeout_ms = c.timeout_ms;
  opts.retry_backoff_ms = c.retry_backoff_ms;

  if (c.embedder == "mock") {
    out.embedder = std::make_shared<clients::MockEmbedder>(
        static_cast<std::size_t>(c.embed_dim), c.seed);
  } else {
    out.embedder = std::make_shared<clients::HttpEmbedder>(
        c.embedder, static_cast<std::size_t>(c.embed_dim), opts);
  }
  if (c.captioner == "mock") {
    out.captioner = std::make_shared<clients::MockCaptioner>();
  } else {
    out.captioner = std::make_shared<clients::HttpCaptioner>(c.captioner, opts);
  }
  if (c.decomposer == "fallback") {
    out.decomposer = nullptr;  // rule-based splitter
  } else {
    out.decomposer =
        std::make_shared<clients::HttpDecomposer>(c.decomposer, opts);
  }
  return out;
}

}  // namespace scenerag::config
