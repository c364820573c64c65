// scenerag: scene tiling, memory construction, retrieval, and evaluation
// from the command line. File formats are documented in docs/formats.md.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "scenerag/bench.hpp"
#include "scenerag/config.hpp"
#include "scenerag/errors.hpp"
#include "scenerag/log.hpp"
#include "scenerag/memory.hpp"
#include "scenerag/pipeline.hpp"
#include "scenerag/tvl1.hpp"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct GlobalOpts {
  std::string config_path;
  bool json = false;
  std::string log_level;
};

void emit_error(const GlobalOpts& g, const std::string& code,
                const std::string& message) {
  if (g.json) {
    nlohmann::json j = {{"error", code}, {"message", message}};
    std::cerr << j.dump() << "\n";
  } else {
    std::cerr << "error: " << message << " [" << code << "]\n";
  }
}

int error_exit(const GlobalOpts& g, const scenerag::Error& e, int code) {
  emit_error(g, scenerag::error_code_name(e.code()), e.what());
  return code;
}

scenerag::config::Config load_config(const GlobalOpts& g) {
  auto cfg = scenerag::config::load(g.config_path);
  if (!g.log_level.empty())
    scenerag::log::settings().level = scenerag::log::parse_level(g.log_level);
  scenerag::log::settings().json = g.json;
  return cfg;
}

// ---------------------------------------------------------------------------
// denoise
// ---------------------------------------------------------------------------

scenerag::tvl1::Signal read_signal_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    scenerag::raise(scenerag::ErrorCode::IoFailure,
                    "cannot open " + path.string());
  scenerag::tvl1::Signal s;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    double t = 0, v = 0;
    char trailing = 0;
    const int got = std::sscanf(line.c_str(), " %lf , %lf %c", &t, &v, &trailing);
    if (got < 2) {
      if (lineno == 1) continue;  // tolerate a header row
      scenerag::raise(scenerag::ErrorCode::InvalidArgument,
                      path.string() + ":" + std::to_string(lineno) +
                          ": expected 'timestamp,value'");
    }
    s.timestamps.push_back(t);
    s.values.push_back(v);
  }
  return s;
}

int cmd_denoise(const GlobalOpts& g, const std::string& input,
                const std::string& output, std::optional<double> lambda) {
  scenerag::tvl1::Signal signal;
  scenerag::tvl1::DenoiseParams params;
  try {
    auto cfg = load_config(g);
    params.lambda = lambda.value_or(cfg.params.tiling.lambda);
    signal = read_signal_csv(input);
  } catch (const scenerag::Error& e) {
    return error_exit(g, e, kExitUsage);
  }
  try {
    const auto denoised = scenerag::tvl1::denoise(signal, params);
    std::ofstream out(output, std::ios::trunc);
    if (!out)
      scenerag::raise(scenerag::ErrorCode::IoFailure,
                      "cannot open " + output + " for writing");
    for (std::size_t i = 0; i < denoised.size(); ++i) {
      char line[80];
      std::snprintf(line, sizeof(line), "%.17g,%.17g\n", signal.timestamps[i],
                    denoised[i]);
      out << line;
    }
    if (!out)
      scenerag::raise(scenerag::ErrorCode::IoFailure,
                      "write failed for " + output);
    if (g.json) {
      nlohmann::json j = {{"output", output}, {"samples", denoised.size()}};
      std::cout << j.dump() << "\n";
    } else {
      std::cout << "wrote " << denoised.size() << " samples to " << output
                << "\n";
    }
    return 0;
  } catch (const scenerag::Error& e) {
    return error_exit(g, e, kExitRuntime);
  }
}

// ---------------------------------------------------------------------------
// preprocess
// ---------------------------------------------------------------------------

nlohmann::json segments_to_json(
    const std::vector<scenerag::tiling::SceneSegment>& segments) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : segments)
    arr.push_back({{"i_start", s.i_start},
                   {"i_end", s.i_end},
                   {"t_start", s.t_start},
                   {"t_end", s.t_end},
                   {"duration_seconds", s.duration_seconds()}});
  return arr;
}

int cmd_preprocess(const GlobalOpts& g, const std::string& manifest_path,
                   const std::string& bank_path,
                   const std::string& segments_path) {
  scenerag::config::Config cfg;
  scenerag::pipeline::VideoManifest manifest;
  try {
    cfg = load_config(g);
    manifest = scenerag::pipeline::load_manifest(manifest_path);
  } catch (const scenerag::Error& e) {
    return error_exit(g, e, kExitUsage);
  }
  try {
    const auto clients = scenerag::config::make_clients(cfg);
    auto result = scenerag::pipeline::preprocess(manifest, cfg.params, clients);
    scenerag::memory::save_bank(result.bank, bank_path);

    nlohmann::json report = {{"video_id", manifest.video_id},
                             {"bank", bank_path},
                             {"entries", result.bank.entries.size()},
                             {"segments", segments_to_json(result.segments)},
                             {"latency", result.latency.to_json()}};
    if (!segments_path.empty()) {
      std::ofstream out(segments_path, std::ios::trunc);
      if (!out)
        scenerag::raise(scenerag::ErrorCode::IoFailure,
                        "cannot open " + segments_path + " for writing");
      out << report.dump(2) << "\n";
    }
    if (g.json) {
      std::cout << report.dump() << "\n";
    } else {
      std::cout << "built bank " << bank_path << " with "
                << result.bank.entries.size() << " scene entries from "
                << manifest.frames.size() << " frames\n";
      for (const auto& s : result.segments) {
        char line[96];
        std::snprintf(line, sizeof(line), "  scene [%zu, %zu)  %8.2fs .. %8.2fs\n",
                      s.i_start, s.i_end, s.t_start, s.t_end);
        std::cout << line;
      }
    }
    return 0;
  } catch (const scenerag::Error& e) {
    return error_exit(g, e, kExitRuntime);
  }
}

// ---------------------------------------------------------------------------
// retrieve
// ---------------------------------------------------------------------------

int cmd_retrieve(const GlobalOpts& g, const std::string& manifest_path,
                 const std::string& bank_path, const std::string& query,
                 bool no_cache) {
  scenerag::config::Config cfg;
  scenerag::pipeline::VideoManifest manifest;
  try {
    cfg = load_config(g);
    manifest = scenerag::pipeline::load_manifest(manifest_path);
    if (query.empty())
      scenerag::raise(scenerag::ErrorCode::EmptyInput, "query is empty");
  } catch (const scenerag::Error& e) {
    return error_exit(g, e, kExitUsage);
  }
  try {
    const auto clients = scenerag::config::make_clients(cfg);
    nlohmann::json out;
    if (!bank_path.empty()) {
      // Stage 1-2 already ran; reuse the bank on disk.
      const auto bank = scenerag::memory::load_bank(bank_path);
      scenerag::pipeline::LatencyReport report;
      report.cache = "hit";
      const auto bundle = scenerag::pipeline::retrieve(
          bank, manifest.frames, query, cfg.params, clients,
          &report.online_inference);
      out = bundle.to_json();
      out["latency"] = report.to_json();
    } else {
      const auto result = scenerag::pipeline::run(
          manifest, query, cfg.params, clients,
          no_cache ? std::filesystem::path{}
                   : std::filesystem::path(cfg.cache_dir));
      out = result.bundle.to_json();
      out["latency"] = result.report.to_json();
    }
    std::cout << (g.json ? out.dump() : out.dump(2)) << "\n";
    return 0;
  } catch (const scenerag::Error& e) {
    return error_exit(g, e, kExitRuntime);
  }
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

std::vector<double> parse_edges(const std::string& spec) {
  if (spec.empty()) return scenerag::bench::default_bin_edges();
  std::vector<double> edges;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      edges.push_back(std::stod(tok));
    } catch (...) {
      scenerag::raise(scenerag::ErrorCode::BadEdges,
                      "edge is not a number: " + tok);
    }
  }
  return edges;
}

int cmd_eval(const GlobalOpts& g, const std::string& records_path,
             const std::string& predictions_path, const std::string& edges_spec,
             const std::string& curve_path, std::size_t window) {
  std::vector<scenerag::bench::QARecord> records;
  std::map<std::string, std::string> predictions;
  std::vector<double> edges;
  try {
    load_config(g);
    records = scenerag::bench::load_records_jsonl(records_path);
    edges = parse_edges(edges_spec);
    std::ifstream in(predictions_path);
    if (!in)
      scenerag::raise(scenerag::ErrorCode::IoFailure,
                      "cannot open " + predictions_path);
    nlohmann::json pj = nlohmann::json::parse(in, nullptr, false);
    if (pj.is_discarded() || !pj.is_object())
      scenerag::raise(scenerag::ErrorCode::InvalidArgument,
                      predictions_path + " must be a JSON object");
    for (const auto& [k, v] : pj.items())
      predictions[k] = v.get<std::string>();
  } catch (const scenerag::Error& e) {
    return error_exit(g, e, kExitUsage);
  }
  try {
    const auto result = scenerag::bench::score(records, predictions);
    const auto bins = scenerag::bench::bin_by_distance(records, result, edges);
    const auto raw = scenerag::bench::curve_points(bins);
    const auto smoothed =
        raw.empty() ? raw : scenerag::bench::rolling_mean(raw, window);

    if (!curve_path.empty()) {
      std::ofstream out(curve_path, std::ios::trunc);
      if (!out)
        scenerag::raise(scenerag::ErrorCode::IoFailure,
                        "cannot open " + curve_path + " for writing");
      out << scenerag::bench::curve_to_csv(raw, smoothed);
    }

    if (g.json) {
      nlohmann::json j = scenerag::bench::eval_to_json(result, bins);
      j["curve"] = nlohmann::json::array();
      for (std::size_t i = 0; i < raw.size(); ++i)
        j["curve"].push_back({{"distance", raw[i].first},
                              {"accuracy_pct", raw[i].second},
                              {"smoothed_pct", smoothed[i].second}});
      std::cout << j.dump() << "\n";
    } else {
      char line[96];
      std::snprintf(line, sizeof(line), "overall accuracy: %.2f%% (%zu/%zu)\n",
                    result.overall.accuracy_pct, result.overall.correct,
                    result.overall.count);
      std::cout << line;
      for (const auto& [task, acc] : result.per_task) {
        std::snprintf(line, sizeof(line), "  %-16s %.2f%% (%zu/%zu)\n",
                      scenerag::bench::task_name(task), acc.accuracy_pct,
                      acc.correct, acc.count);
        std::cout << line;
      }
      std::cout << "\n" << scenerag::bench::format_bin_table(bins);
      if (!curve_path.empty())
        std::cout << "\ncurve written to " << curve_path << "\n";
    }
    return 0;
  } catch (const scenerag::Error& e) {
    return error_exit(g, e, kExitRuntime);
  }
}

// ---------------------------------------------------------------------------
// ablate
// ---------------------------------------------------------------------------

scenerag::bench::AblationSetting setting_from_json(
    const nlohmann::json& j, const scenerag::bench::AblationSetting& base) {
  scenerag::bench::AblationSetting s = base;
  s.name = j.value("name", std::string("setting"));
  s.alpha = j.value("alpha", base.alpha);
  s.l_min_seconds = j.value("l_min_seconds", base.l_min_seconds);
  s.lambda = j.value("lambda", base.lambda);
  s.top_k = j.value("top_k", base.top_k);
  return s;
}

int cmd_ablate(const GlobalOpts& g, const std::string& grid_path,
               const std::string& fixtures_dir) {
  scenerag::config::Config cfg;
  std::vector<scenerag::bench::AblationSetting> grid;
  std::vector<scenerag::pipeline::VideoManifest> manifests;
  std::vector<scenerag::bench::QARecord> records;
  try {
    cfg = load_config(g);
    std::ifstream in(grid_path);
    if (!in)
      scenerag::raise(scenerag::ErrorCode::IoFailure,
                      "cannot open " + grid_path);
    nlohmann::json gj = nlohmann::json::parse(in, nullptr, false);
    if (gj.is_discarded() || !gj.is_object() || !gj.contains("baseline"))
      scenerag::raise(scenerag::ErrorCode::InvalidArgument,
                      grid_path + " must be a JSON object with a baseline");
    scenerag::bench::AblationSetting defaults;
    defaults.alpha = cfg.params.tiling.alpha;
    defaults.l_min_seconds = cfg.params.tiling.l_min_seconds;
    defaults.lambda = cfg.params.tiling.lambda;
    defaults.top_k = cfg.params.top_k;
    auto baseline = setting_from_json(gj["baseline"], defaults);
    if (baseline.name == "setting") baseline.name = "baseline";
    grid.push_back(baseline);
    if (gj.contains("rows"))
      for (const auto& rj : gj["rows"])
        grid.push_back(setting_from_json(rj, baseline));

    for (const auto& entry :
         std::filesystem::directory_iterator(fixtures_dir)) {
      const auto name = entry.path().filename().string();
      if (name.ends_with(".manifest.json"))
        manifests.push_back(scenerag::pipeline::load_manifest(entry.path()));
      else if (name.ends_with(".jsonl"))
        for (auto& r : scenerag::bench::load_records_jsonl(entry.path()))
          records.push_back(std::move(r));
    }
    if (manifests.empty() || records.empty())
      scenerag::raise(scenerag::ErrorCode::EmptyInput,
                      fixtures_dir +
                          " needs *.manifest.json files and a records .jsonl");
  } catch (const scenerag::Error& e) {
    return error_exit(g, e, kExitUsage);
  }
  try {
    const auto clients = scenerag::config::make_clients(cfg);
    const auto rows = scenerag::bench::ablation_sweep(
        manifests, records, grid, /*baseline_index=*/0, cfg.params, clients);
    if (g.json) {
      std::cout << scenerag::bench::ablation_to_json(rows, 0).dump() << "\n";
    } else {
      std::cout << scenerag::bench::format_ablation_table(rows, 0);
    }
    return 0;
  } catch (const scenerag::Error& e) {
    return error_exit(g, e, kExitRuntime);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scene-structured video retrieval toolkit"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config_path, "config file (JSON)");
  app.add_flag("--json", g.json, "machine-readable output and errors");
  app.add_option("--log-level", g.log_level, "debug|info|warn|error|off");

  auto* denoise = app.add_subcommand("denoise", "TV-L1 denoise a signal CSV");
  std::string den_in, den_out;
  double den_lambda = -1.0;
  bool den_lambda_set = false;
  denoise->add_option("--input", den_in, "CSV of timestamp,value rows")
      ->required();
  denoise->add_option("--output", den_out, "output CSV path")->required();
  denoise->add_option("--lambda", den_lambda, "regularization strength")
      ->check(CLI::NonNegativeNumber)
      ->each([&](const std::string&) { den_lambda_set = true; });

  auto* preprocess =
      app.add_subcommand("preprocess", "build the scene memory bank");
  std::string pre_manifest, pre_bank, pre_segments;
  preprocess->add_option("--manifest", pre_manifest, "video manifest JSON")
      ->required();
  preprocess->add_option("--bank", pre_bank, "output bank path")->required();
  preprocess->add_option("--segments", pre_segments,
                         "also write the segments report here");

  auto* retrieve =
      app.add_subcommand("retrieve", "query a video's scene memory");
  std::string ret_manifest, ret_bank, ret_query;
  bool ret_no_cache = false;
  retrieve->add_option("--manifest", ret_manifest, "video manifest JSON")
      ->required();
  retrieve->add_option("--bank", ret_bank,
                       "reuse a prebuilt bank instead of preprocessing");
  retrieve->add_option("--query", ret_query, "user query")->required();
  retrieve->add_flag("--no-cache", ret_no_cache, "skip the bank cache");

  auto* eval = app.add_subcommand("eval", "score predictions against records");
  std::string ev_records, ev_predictions, ev_edges, ev_curve;
  std::size_t ev_window = 3;
  eval->add_option("--records", ev_records, "QA records (JSON Lines)")
      ->required();
  eval->add_option("--predictions", ev_predictions,
                   "JSON object of qa_id -> label")
      ->required();
  eval->add_option("--edges", ev_edges,
                   "comma-separated bin edges (default: the standard bins)");
  eval->add_option("--curve-out", ev_curve, "write distance curve CSV here");
  eval->add_option("--window", ev_window, "rolling mean window (default 3)")
      ->check(CLI::PositiveNumber);

  auto* ablate = app.add_subcommand("ablate", "hyperparameter sweep");
  std::string ab_grid, ab_fixtures;
  ablate->add_option("--grid", ab_grid, "grid spec JSON")->required();
  ablate->add_option("--fixtures", ab_fixtures,
                     "directory of manifests + records")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (denoise->parsed())
    return cmd_denoise(g, den_in, den_out,
                       den_lambda_set ? std::optional<double>(den_lambda)
                                      : std::nullopt);
  if (preprocess->parsed())
    return cmd_preprocess(g, pre_manifest, pre_bank, pre_segments);
  if (retrieve->parsed())
    return cmd_retrieve(g, ret_manifest, ret_bank, ret_query, ret_no_cache);
  if (eval->parsed())
    return cmd_eval(g, ev_records, ev_predictions, ev_edges, ev_curve,
                    ev_window);
  if (ablate->parsed()) return cmd_ablate(g, ab_grid, ab_fixtures);
  return kExitUsage;
}
