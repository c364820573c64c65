#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "scenerag/errors.hpp"
#include "scenerag/pipeline.hpp"

namespace scenerag::bench {

enum class Task {
  scene_qa,
  scene_qa_audio,
  clip_qa,
  i_vqa,
  title_pred,
  comment_pred,
};

inline const char* task_name(Task t) {
  switch (t) {
    case Task::scene_qa: return "scene_qa";
    case Task::scene_qa_audio: return "scene_qa_audio";
    case Task::clip_qa: return "clip_qa";
    case Task::i_vqa: return "i_vqa";
    case Task::title_pred: return "title_pred";
    case Task::comment_pred: return "comment_pred";
  }
  return "scene_qa";
}

inline Task task_from_name(const std::string& name) {
  if (name == "scene_qa") return Task::scene_qa;
  if (name == "scene_qa_audio") return Task::scene_qa_audio;
  if (name == "clip_qa") return Task::clip_qa;
  if (name == "i_vqa") return Task::i_vqa;
  if (name == "title_pred") return Task::title_pred;
  if (name == "comment_pred") return Task::comment_pred;
  raise(ErrorCode::InvalidArgument, "unknown task name: " + name);
}

struct QAOption {
  std::string label;
  std::string text;
};

struct QARecord {
  std::string qa_id;
  std::string video_id;
  Task task = Task::scene_qa;
  std::string question;
  std::vector<QAOption> options;
  std::string gold_label;
  std::vector<std::pair<double, double>> evidence_spans;  // seconds
  double qa_distance_seconds = 0.0;
};

inline void validate(const QARecord& r) {
  if (r.qa_id.empty()) raise(ErrorCode::InvalidArgument, "record needs a qa_id");
  if (r.options.size() < 2)
    raise(ErrorCode::InvalidArgument,
          r.qa_id + ": multiple choice needs at least 2 options");
  const bool gold_found =
      std::any_of(r.options.begin(), r.options.end(),
                  [&](const QAOption& o) { return o.label == r.gold_label; });
  if (r.gold_label.empty() || !gold_found)
    raise(ErrorCode::MissingGold,
          r.qa_id + ": gold label is missing from the options");
  if (!(r.qa_distance_seconds >= 0.0))
    raise(ErrorCode::InvalidArgument,
          r.qa_id + ": qa_distance_seconds must be >= 0");
}

struct TaskAccuracy {
  std::size_t count = 0;
  std::size_t correct = 0;
  double accuracy_pct = 0.0;
};

struct EvalResult {
  std::map<std::string, bool> correctness;  // qa_id -> exact label match
  std::map<Task, TaskAccuracy> per_task;
  TaskAccuracy overall;
};

// Exact-label-match accuracy. A record without a prediction counts as an
// abstention and scores as incorrect.
inline EvalResult score(std::span<const QARecord> records,
                        const std::map<std::string, std::string>& predictions) {
  if (records.empty()) raise(ErrorCode::EmptyInput, "no records to score");
  std::map<std::string, const QARecord*> by_id;
  for (const auto& r : records) {
    validate(r);
    by_id[r.qa_id] = &r;
  }
  for (const auto& [qa_id, label] : predictions)
    if (!by_id.count(qa_id))
      raise(ErrorCode::UnknownQaId,
            "prediction for unknown qa_id " + qa_id);

  EvalResult out;
  for (const auto& r : records) {
    const auto it = predictions.find(r.qa_id);
    const bool correct = it != predictions.end() && it->second == r.gold_label;
    out.correctness[r.qa_id] = correct;
    auto& t = out.per_task[r.task];
    ++t.count;
    ++out.overall.count;
    if (correct) {
      ++t.correct;
      ++out.overall.correct;
    }
  }
  for (auto& [task, acc] : out.per_task)
    acc.accuracy_pct = 100.0 * static_cast<double>(acc.correct) /
                       static_cast<double>(acc.count);
  out.overall.accuracy_pct = 100.0 *
                             static_cast<double>(out.overall.correct) /
                             static_cast<double>(out.overall.count);
  return out;
}

// One row of the temporal-distance table: [lo, hi) in seconds.
struct DistanceBin {
  double lo = 0.0;
  double hi = 0.0;  // +inf for the top bin
  std::size_t count = 0;
  double mean_span = 0.0;
  std::optional<double> accuracy_pct;  // absent when the bin is empty
};

inline std::vector<double> default_bin_edges() {
  return {0, 250, 500, 750, 1000, 1250, 1500, 1750, 2000};
}

// Partition records into half-open bins by qa_distance_seconds. `edges` are
// the finite left endpoints, starting at 0; the last bin's right edge is
// +inf.
inline std::vector<DistanceBin> bin_by_distance(
    std::span<const QARecord> records, const EvalResult& result,
    std::span<const double> edges) {
  if (edges.empty() || edges.front() != 0.0)
    raise(ErrorCode::BadEdges, "edges must start at 0");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1]))
      raise(ErrorCode::BadEdges, "edges must be strictly increasing");

  std::vector<DistanceBin> bins(edges.size());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    bins[i].lo = edges[i];
    bins[i].hi = (i + 1 < edges.size())
                     ? edges[i + 1]
                     : std::numeric_limits<double>::infinity();
  }

  std::vector<std::size_t> correct(bins.size(), 0);
  for (const auto& r : records) {
    const double d = r.qa_distance_seconds;
    std::size_t b = 0;
    while (b + 1 < bins.size() && d >= bins[b].hi) ++b;
    ++bins[b].count;
    bins[b].mean_span += d;
    const auto it = result.correctness.find(r.qa_id);
    if (it != result.correctness.end() && it->second) ++correct[b];
  }
  for (std::size_t b = 0; b < bins.size(); ++b) {
    if (bins[b].count == 0) continue;
    bins[b].mean_span /= static_cast<double>(bins[b].count);
    bins[b].accuracy_pct = 100.0 * static_cast<double>(correct[b]) /
                           static_cast<double>(bins[b].count);
  }
  return bins;
}

// Centered rolling mean over the accuracy column; windows shrink at the
// boundaries so the output has the same length as the input.
inline std::vector<std::pair<double, double>> rolling_mean(
    std::span<const std::pair<double, double>> points, std::size_t window) {
  if (points.empty()) raise(ErrorCode::EmptyInput, "no points to smooth");
  if (window < 1) raise(ErrorCode::InvalidArgument, "window must be >= 1");
  std::vector<std::pair<double, double>> out;
  out.reserve(points.size());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(points.size());
  const std::ptrdiff_t left = static_cast<std::ptrdiff_t>((window - 1) / 2);
  const std::ptrdiff_t right = static_cast<std::ptrdiff_t>(window / 2);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - left);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n - 1, i + right);
    double acc = 0.0;
    for (std::ptrdiff_t j = lo; j <= hi; ++j) acc += points[j].second;
    out.emplace_back(points[i].first,
                     acc / static_cast<double>(hi - lo + 1));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ablation sweep: one pipeline run per grid point, scored by planted-evidence
// hit rate
// ---------------------------------------------------------------------------

struct AblationSetting {
  std::string name;
  double alpha = 1.5;
  double l_min_seconds = 3.0;
  double lambda = 1.5;
  int top_k = 10;
};

struct AblationRow {
  AblationSetting setting;
  bool failed = false;
  std::string error;
  double avg_score_pct = 0.0;  // % of records whose evidence was retrieved
  double gain = 0.0;           // vs. the baseline row
  std::size_t trials = 0;
};

inline bool spans_overlap(double a0, double a1, double b0, double b1) {
  return std::max(a0, b0) < std::min(a1, b1);
}

// A record counts as a hit when at least one retrieved scene overlaps at
// least one of its annotated evidence spans.
inline bool evidence_retrieved(const pipeline::ContextBundle& bundle,
                               const QARecord& record) {
  for (const auto& scene : bundle.retrieved_scenes) {
    if (scene.entry.video_id != record.video_id) continue;
    for (const auto& [e0, e1] : record.evidence_spans)
      if (spans_overlap(scene.entry.segment.t_start, scene.entry.segment.t_end,
                        e0, e1))
        return true;
  }
  return false;
}

// Runs the full pipeline once per (setting, record) pair. A failing grid
// point marks its row and the sweep moves on.
inline std::vector<AblationRow> ablation_sweep(
    std::span<const pipeline::VideoManifest> manifests,
    std::span<const QARecord> records,
    std::span<const AblationSetting> grid, std::size_t baseline_index,
    const pipeline::PipelineParams& base_params,
    const pipeline::Clients& clients) {
  if (grid.empty()) raise(ErrorCode::EmptyInput, "empty ablation grid");
  if (baseline_index >= grid.size())
    raise(ErrorCode::InvalidArgument, "baseline index outside the grid");
  std::map<std::string, const pipeline::VideoManifest*> by_video;
  for (const auto& m : manifests) by_video[m.video_id] = &m;

  std::vector<AblationRow> rows;
  rows.reserve(grid.size());
  for (const auto& setting : grid) {
    AblationRow row;
    row.setting = setting;
    pipeline::PipelineParams params = base_params;
    params.tiling.alpha = setting.alpha;
    params.tiling.l_min_seconds = setting.l_min_seconds;
    params.tiling.lambda = setting.lambda;
    params.top_k = setting.top_k;
    try {
      std::size_t hits = 0, scored = 0;
      for (const auto& record : records) {
        const auto it = by_video.find(record.video_id);
        if (it == by_video.end()) continue;
        const auto result =
            pipeline::run(*it->second, record.question, params, clients);
        ++scored;
        if (evidence_retrieved(result.bundle, record)) ++hits;
      }
      if (scored == 0)
        raise(ErrorCode::EmptyInput, "no record matches any manifest");
      row.trials = scored;
      row.avg_score_pct =
          100.0 * static_cast<double>(hits) / static_cast<double>(scored);
    } catch (const Error& e) {
      row.failed = true;
      row.error = std::string(error_code_name(e.code())) + ": " + e.what();
    }
    rows.push_back(std::move(row));
  }
  if (!rows[baseline_index].failed) {
    const double base = rows[baseline_index].avg_score_pct;
    for (auto& row : rows)
      if (!row.failed) row.gain = row.avg_score_pct - base;
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Serialization: JSONL records, JSON results, aligned-text tables, CSV curves
// ---------------------------------------------------------------------------

inline QARecord record_from_json(const nlohmann::json& j) {
  QARecord r;
  r.qa_id = j.at("qa_id").get<std::string>();
  r.video_id = j.value("video_id", std::string{});
  r.task = task_from_name(j.value("task", std::string("scene_qa")));
  r.question = j.value("question", std::string{});
  if (j.contains("options"))
    for (const auto& oj : j["options"])
      r.options.push_back({oj.at("label").get<std::string>(),
                           oj.value("text", std::string{})});
  r.gold_label = j.value("gold_label", std::string{});
  if (j.contains("evidence_spans"))
    for (const auto& sj : j["evidence_spans"])
      r.evidence_spans.emplace_back(sj.at(0).get<double>(),
                                    sj.at(1).get<double>());
  r.qa_distance_seconds = j.value("qa_distance_seconds", 0.0);
  validate(r);
  return r;
}

inline std::vector<QARecord> load_records_jsonl(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<QARecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded())
      raise(ErrorCode::InvalidArgument,
            path.string() + ":" + std::to_string(lineno) +
                " is not valid JSON");
    records.push_back(record_from_json(j));
  }
  return records;
}

inline nlohmann::json eval_to_json(const EvalResult& result,
                                   std::span<const DistanceBin> bins) {
  nlohmann::json j;
  j["overall"] = {{"count", result.overall.count},
                  {"correct", result.overall.correct},
                  {"accuracy_pct", result.overall.accuracy_pct}};
  j["per_task"] = nlohmann::json::object();
  for (const auto& [task, acc] : result.per_task)
    j["per_task"][task_name(task)] = {{"count", acc.count},
                                      {"correct", acc.correct},
                                      {"accuracy_pct", acc.accuracy_pct}};
  j["bins"] = nlohmann::json::array();
  for (const auto& b : bins) {
    nlohmann::json bj = {{"lo", b.lo},
                         {"count", b.count},
                         {"mean_span", b.mean_span}};
    bj["hi"] = std::isinf(b.hi) ? nlohmann::json() : nlohmann::json(b.hi);
    bj["accuracy_pct"] =
        b.accuracy_pct ? nlohmann::json(*b.accuracy_pct) : nlohmann::json();
    j["bins"].push_back(bj);
  }
  return j;
}

inline std::string format_bin_table(std::span<const DistanceBin> bins) {
  std::ostringstream out;
  out << "Range (s)        Count   Avg. Span   Accuracy\n";
  for (const auto& b : bins) {
    char range[32];
    if (std::isinf(b.hi))
      std::snprintf(range, sizeof(range), "[%g, +inf)", b.lo);
    else
      std::snprintf(range, sizeof(range), "[%g, %g)", b.lo, b.hi);
    char line[128];
    if (b.accuracy_pct)
      std::snprintf(line, sizeof(line), "%-16s %5zu   %9.2f   %7.2f%%\n",
                    range, b.count, b.mean_span, *b.accuracy_pct);
    else
      std::snprintf(line, sizeof(line), "%-16s %5zu   %9s   %8s\n", range,
                    b.count, "-", "-");
    out << line;
  }
  return out.str();
}

inline std::string format_ablation_table(std::span<const AblationRow> rows,
                                         std::size_t baseline_index) {
  std::ostringstream out;
  out << "Setting               alpha   L_min   lambda    K      Avg.    Gain\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    char line[160];
    if (r.failed) {
      std::snprintf(line, sizeof(line), "%-20s %6.2f  %6.2f   %6.2f  %3d    failed: %s\n",
                    r.setting.name.c_str(), r.setting.alpha,
                    r.setting.l_min_seconds, r.setting.lambda, r.setting.top_k,
                    r.error.c_str());
    } else if (i == baseline_index) {
      std::snprintf(line, sizeof(line),
                    "%-20s %6.2f  %6.2f   %6.2f  %3d   %6.2f       -\n",
                    r.setting.name.c_str(), r.setting.alpha,
                    r.setting.l_min_seconds, r.setting.lambda, r.setting.top_k,
                    r.avg_score_pct);
    } else {
      std::snprintf(line, sizeof(line),
                    "%-20s %6.2f  %6.2f   %6.2f  %3d   %6.2f  %+6.2f\n",
                    r.setting.name.c_str(), r.setting.alpha,
                    r.setting.l_min_seconds, r.setting.lambda, r.setting.top_k,
                    r.avg_score_pct, r.gain);
    }
    out << line;
  }
  return out.str();
}

inline nlohmann::json ablation_to_json(std::span<const AblationRow> rows,
                                       std::size_t baseline_index) {
  nlohmann::json j = nlohmann::json::array();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    nlohmann::json rj = {{"name", r.setting.name},
                         {"alpha", r.setting.alpha},
                         {"l_min_seconds", r.setting.l_min_seconds},
                         {"lambda", r.setting.lambda},
                         {"top_k", r.setting.top_k},
                         {"baseline", i == baseline_index}};
    if (r.failed) {
      rj["failed"] = true;
      rj["error"] = r.error;
    } else {
      rj["failed"] = false;
      rj["avg_score_pct"] = r.avg_score_pct;
      rj["gain"] = r.gain;
      rj["trials"] = r.trials;
    }
    j.push_back(rj);
  }
  return j;
}

// distance,accuracy,smoothed rows for external plotting
inline std::string curve_to_csv(
    std::span<const std::pair<double, double>> raw,
    std::span<const std::pair<double, double>> smoothed) {
  std::ostringstream out;
  out << "distance_seconds,accuracy_pct,smoothed_accuracy_pct\n";
  for (std::size_t i = 0; i < raw.size(); ++i) {
    char line[96];
    std::snprintf(line, sizeof(line), "%.6g,%.6g,%.6g\n", raw[i].first,
                  raw[i].second, smoothed[i].second);
    out << line;
  }
  return out.str();
}

// Per-bin accuracy points (bin midpointed at its mean span), smoothed for the
// distance-vs-accuracy curve.
inline std::vector<std::pair<double, double>> curve_points(
    std::span<const DistanceBin> bins) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& b : bins)
    if (b.accuracy_pct) pts.emplace_back(b.mean_span, *b.accuracy_pct);
  return pts;
}

}  // namespace scenerag::bench
