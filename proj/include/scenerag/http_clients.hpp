#pragma once

// HTTP/JSON bindings for the three model endpoints. Request and response
// schemas are documented in docs/formats.md; any model server that speaks
// them can back the pipeline.

#include <chrono>
#include <cmath>
#include <memory>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "scenerag/clients.hpp"
#include "scenerag/errors.hpp"

namespace scenerag::clients {

struct HttpOptions {
  int timeout_ms = 5000;      // per-call deadline
  int max_retries = 2;        // transient transport failures only
  int retry_backoff_ms = 100; // doubles per attempt
};

namespace detail {

struct ParsedUrl {
  std::string base;  // scheme://host[:port]
  std::string path;  // leading slash
};

inline ParsedUrl parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    raise(ErrorCode::BadConfig, "endpoint URL needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

// POST with a bounded deadline. Connection-level failures are retried with
// exponential backoff; deadline overruns are not (the configured deadline is
// a promise to the caller).
inline std::string post_json(const ParsedUrl& url, const std::string& body,
                             const HttpOptions& opts) {
  int backoff = opts.retry_backoff_ms;
  for (int attempt = 0;; ++attempt) {
    httplib::Client cli(url.base);
    cli.set_connection_timeout(0, opts.timeout_ms * 1000);
    cli.set_read_timeout(0, opts.timeout_ms * 1000);
    cli.set_write_timeout(0, opts.timeout_ms * 1000);

    const auto start = std::chrono::steady_clock::now();
    httplib::Result res = cli.Post(url.path, body, "application/json");
    const auto elapsed_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - start)
            .count();

    if (res) {
      if (res->status != 200)
        raise(ErrorCode::EndpointUnavailable,
              url.base + url.path + " returned HTTP " +
                  std::to_string(res->status));
      return res->body;
    }
    const bool deadline_hit =
        res.error() == httplib::Error::ConnectionTimeout ||
        elapsed_ms >= opts.timeout_ms;
    if (deadline_hit)
      raise(ErrorCode::Timeout, url.base + url.path + " exceeded the " +
                                    std::to_string(opts.timeout_ms) +
                                    " ms deadline");
    if (attempt >= opts.max_retries)
      raise(ErrorCode::EndpointUnavailable,
            "cannot reach " + url.base + url.path + " after " +
                std::to_string(attempt + 1) + " attempts");
    std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
    backoff *= 2;
  }
}

inline nlohmann::json parse_response(const std::string& body) {
  nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded())
    raise(ErrorCode::MalformedResponse, "response is not valid JSON");
  return j;
}

inline nlohmann::json scene_payload(const SceneRef& scene) {
  return {{"video_id", scene.video_id},
          {"t_start", scene.t_start},
          {"t_end", scene.t_end},
          {"frame_refs", scene.frame_refs}};
}

}  // namespace detail

class HttpEmbedder final : public EmbedClient {
 public:
  HttpEmbedder(std::string url, std::size_t dim, HttpOptions opts = {})
      : url_(detail::parse_url(url)), raw_url_(std::move(url)), dim_(dim),
        opts_(opts) {
    if (dim_ == 0) raise(ErrorCode::BadConfig, "embed dim must be >= 1");
  }

  std::vector<float> embed(const EmbedRequest& request) override {
    nlohmann::json body;
    if (request.kind == EmbedRequest::Kind::text) {
      body = {{"kind", "text"}, {"payload", {{"text", request.text}}}};
    } else {
      body = {{"kind", "scene_visual"},
              {"payload", detail::scene_payload(request.scene)}};
    }
    const nlohmann::json j =
        detail::parse_response(detail::post_json(url_, body.dump(), opts_));
    if (!j.contains("vector") || !j["vector"].is_array())
      raise(ErrorCode::MalformedResponse, "embed response lacks a vector field");
    const auto& arr = j["vector"];
    if (arr.size() != dim_)
      raise(ErrorCode::DimensionMismatch,
            "endpoint returned " + std::to_string(arr.size()) +
                " components, configured dim is " + std::to_string(dim_));
    std::vector<float> vec(dim_);
    double norm = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) {
      if (!arr[i].is_number())
        raise(ErrorCode::MalformedResponse, "vector holds a non-number");
      const double v = arr[i].get<double>();
      if (!std::isfinite(v))
        raise(ErrorCode::MalformedResponse, "vector holds a non-finite value");
      vec[i] = static_cast<float>(v);
      norm += v * v;
    }
    norm = std::sqrt(norm);
    if (norm == 0.0)
      raise(ErrorCode::MalformedResponse, "embedding has zero norm");
    for (float& c : vec) c = static_cast<float>(c / norm);
    return vec;
  }

  std::size_t dim() const override { return dim_; }

  std::string fingerprint() const override {
    return "http:" + raw_url_ + ":dim=" + std::to_string(dim_);
  }

 private:
  detail::ParsedUrl url_;
  std::string raw_url_;
  std::size_t dim_;
  HttpOptions opts_;
};

class HttpCaptioner final : public CaptionClient {
 public:
  explicit HttpCaptioner(std::string url, HttpOptions opts = {})
      : url_(detail::parse_url(url)), opts_(opts) {}

  std::string caption_audio(const SceneRef& scene) override {
    const nlohmann::json body = {{"kind", "caption_audio"},
                                 {"payload", detail::scene_payload(scene)}};
    const nlohmann::json j =
        detail::parse_response(detail::post_json(url_, body.dump(), opts_));
    if (!j.contains("text") || !j["text"].is_string())
      raise(ErrorCode::MalformedResponse, "caption response lacks a text field");
    return j["text"].get<std::string>();
  }

 private:
  detail::ParsedUrl url_;
  HttpOptions opts_;
};

// The decomposer endpoint answers with one clue per line in "text".
class HttpDecomposer final : public DecomposeClient {
 public:
  explicit HttpDecomposer(std::string url, HttpOptions opts = {})
      : url_(detail::parse_url(url)), opts_(opts) {}

  std::vector<std::string> decompose(const std::string& query,
                                     std::size_t max_clues) override {
    const nlohmann::json body = {
        {"kind", "decompose"},
        {"payload", {{"query", query}, {"max_clues", max_clues}}}};
    const nlohmann::json j =
        detail::parse_response(detail::post_json(url_, body.dump(), opts_));
    if (!j.contains("text") || !j["text"].is_string())
      raise(ErrorCode::MalformedResponse,
            "decompose response lacks a text field");
    std::vector<std::string> clues;
    std::string line;
    for (char c : j["text"].get<std::string>() + "\n") {
      if (c == '\n') {
        const std::string t = detail::trim(line);
        if (!t.empty()) clues.push_back(t);
        line.clear();
      } else {
        line += c;
      }
    }
    if (clues.empty())
      raise(ErrorCode::MalformedResponse, "decomposer produced no clues");
    return clues;
  }

 private:
  detail::ParsedUrl url_;
  HttpOptions opts_;
};

}  // namespace scenerag::clients
