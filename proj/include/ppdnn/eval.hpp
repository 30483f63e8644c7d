#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ppdnn/core.hpp"
#include "ppdnn/sim.hpp"
#include "ppdnn/traceio.hpp"

namespace ppdnn {

struct TimedDetections {
  std::int64_t t_us = 0;
  std::vector<Detection> detections;
};

// Online (keyframe) results against full offline results; both time-ordered.
struct CompletenessInput {
  std::vector<TimedDetections> keyframes;
  std::vector<TimedDetections> offline;
};

// How the keyframe cursor follows the offline timestamps: one step per
// offline frame at most, or as many as needed.
enum class AdvancePolicy : std::uint8_t { single_step, catch_up };

struct CompletenessCounts {
  std::int64_t objects = 0;
  std::int64_t detected = 0;
  // Per offline frame, for distributions.
  std::vector<std::int64_t> frame_objects;
  std::vector<std::int64_t> frame_detected;

  double value() const {
    if (objects == 0) throw ValidationError("no scorable objects");
    return static_cast<double>(detected) / static_cast<double>(objects);
  }
};

struct MaxIou {
  double iou = 0.0;
  int index = -1;
};

inline MaxIou max_iou(const std::vector<Detection>& candidates, const BBox& box) {
  MaxIou best;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double v = iou(candidates[i].box, box);
    if (v > best.iou) best = {v, static_cast<int>(i)};
  }
  return best;
}

inline CompletenessCounts completeness_counts(const CompletenessInput& in,
                                              AdvancePolicy policy = AdvancePolicy::single_step) {
  auto check_sorted = [](const std::vector<TimedDetections>& v) {
    for (std::size_t i = 1; i < v.size(); ++i)
      if (v[i].t_us < v[i - 1].t_us) throw ValidationError("completeness: timestamps must be non-decreasing");
  };
  check_sorted(in.keyframes);
  check_sorted(in.offline);

  CompletenessCounts c;
  const std::vector<Detection> none;
  std::size_t key = 0;
  for (const TimedDetections& frame : in.offline) {
    if (!in.keyframes.empty()) {
      if (policy == AdvancePolicy::single_step) {
        if (frame.t_us > in.keyframes[key].t_us && key + 1 < in.keyframes.size()) ++key;
      } else {
        while (frame.t_us > in.keyframes[key].t_us && key + 1 < in.keyframes.size()) ++key;
      }
    }
    const auto& dk = in.keyframes.empty() ? none : in.keyframes[key].detections;
    std::int64_t fo = 0, fd = 0;
    for (const Detection& d : frame.detections) {
      const MaxIou m = max_iou(dk, d.box);
      if (!(d.score > 0.5)) continue;
      ++fo;
      if (m.iou > 0.5 && dk[static_cast<std::size_t>(m.index)].score > 0.5) ++fd;
    }
    c.objects += fo;
    c.detected += fd;
    c.frame_objects.push_back(fo);
    c.frame_detected.push_back(fd);
  }
  return c;
}

/// Fraction of confident offline objects that the online results also
/// found (IoU > 0.5, score > 0.5).
inline double detection_completeness(const CompletenessInput& in, AdvancePolicy policy = AdvancePolicy::single_step) {
  return completeness_counts(in, policy).value();
}

/// Latency per unit of fusion accuracy; lower is better.
inline double cost_effectiveness(double avg_latency_ms, double fusion_ratio, double avg_dc) {
  if (!(fusion_ratio > 0.0) || !(avg_dc > 0.0)) throw ValidationError("cost_effectiveness: zero denominator");
  return avg_latency_ms / (fusion_ratio * avg_dc);
}

// Converts ms-valued cost-effectiveness to seconds for presentation.
inline constexpr double kCostEffectivenessDisplayScale = 1e-3;

struct DelayStats {
  double mean = 0, p50 = 0, p99 = 0, min = 0, max = 0, range = 0;
  std::size_t count = 0;
};

/// Nearest-rank percentile, q in (0, 1].
inline double nearest_rank(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw ValidationError("percentile of empty sample");
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size()) - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

inline DelayStats delay_stats(std::vector<double> samples) {
  if (samples.empty()) throw ValidationError("delay_stats: empty sample");
  std::sort(samples.begin(), samples.end());
  DelayStats s;
  s.count = samples.size();
  double sum = 0;
  for (double v : samples) sum += v;
  s.mean = sum / static_cast<double>(samples.size());
  s.p50 = nearest_rank(samples, 0.50);
  s.p99 = nearest_rank(samples, 0.99);
  s.min = samples.front();
  s.max = samples.back();
  s.range = s.max - s.min;
  return s;
}

// Everything the metrics need from one run, whether in memory or on disk.
struct RunData {
  std::string mode;
  std::string trace_hash;
  std::string scenario_tag;
  std::int64_t frame_count = 0;
  PerTask<std::int64_t> processed{};
  std::int64_t bundles = 0;
  std::vector<double> fusion_delays_ms;
  std::vector<PublishedRecord> published;
};

inline RunData run_data(const SimReport& r) {
  RunData d;
  d.mode = std::string(to_string(r.mode));
  d.trace_hash = r.trace_hash;
  d.scenario_tag = r.scenario_tag;
  d.frame_count = r.frame_count;
  d.processed = r.processed;
  d.bundles = static_cast<std::int64_t>(r.bundles.size());
  d.fusion_delays_ms = r.fusion_delays_ms();
  d.published = r.published;
  return d;
}

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  return out;
}

}  // namespace detail

inline RunData read_run_dir(const std::filesystem::path& dir) {
  auto open = [&](const char* name) {
    std::ifstream is(dir / name, std::ios::binary);
    if (!is) throw ValidationError("report: cannot read " + (dir / name).string());
    return is;
  };
  RunData d;
  try {
    auto is = open("report.json");
    const auto j = nlohmann::json::parse(is);
    d.mode = j.at("mode").get<std::string>();
    d.trace_hash = j.at("trace").at("hash").get<std::string>();
    d.scenario_tag = j.at("trace").value("scenario_tag", std::string());
    d.frame_count = j.at("trace").at("frames").get<std::int64_t>();
    for (TaskId t : kAllTasks) d.processed[index_of(t)] = j.at("processed").at(std::string(to_string(t))).get<std::int64_t>();
    d.bundles = j.at("fusion").at("bundles").get<std::int64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("report.json: ") + e.what());
  }
  {
    auto is = open("fusion.csv");
    std::string line;
    std::getline(is, line);
    const auto header = detail::split_csv(line);
    const auto col = std::find(header.begin(), header.end(), "fusion_delay_ms");
    if (col == header.end()) throw ValidationError("fusion.csv: missing fusion_delay_ms column");
    const auto k = static_cast<std::size_t>(col - header.begin());
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
      ++line_no;
      const auto cells = detail::split_csv(line);
      if (cells.size() <= k) throw ValidationError("fusion.csv:" + std::to_string(line_no) + ": short row");
      d.fusion_delays_ms.push_back(std::stod(cells[k]));
    }
  }
  {
    auto is = open("published.jsonl");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
      ++line_no;
      try {
        const auto j = nlohmann::json::parse(line);
        PublishedRecord p;
        p.task = task_from_string(j.at("task").get<std::string>());
        p.frame_seq = j.at("seq").get<std::int64_t>();
        p.stamp_us = j.at("stamp_us").get<std::int64_t>();
        p.published_us = j.at("published_us").get<std::int64_t>();
        p.provenance = j.at("provenance").get<std::string>() == "predicted" ? Provenance::predicted : Provenance::inference;
        for (const auto& det : j.at("detections")) p.payload.push_back(detection_from_json(det));
        d.published.push_back(std::move(p));
      } catch (const nlohmann::json::exception& e) {
        throw ValidationError("published.jsonl:" + std::to_string(line_no) + ": " + e.what());
      }
    }
  }
  return d;
}

/// Online results of one task ordered by availability time, against the
/// trace's ground truth as the offline reference.
inline CompletenessInput completeness_input(const RunData& run, const Trace& trace, TaskId task) {
  CompletenessInput in;
  std::vector<const PublishedRecord*> recs;
  for (const PublishedRecord& p : run.published)
    if (p.task == task) recs.push_back(&p);
  std::stable_sort(recs.begin(), recs.end(),
                   [](const PublishedRecord* a, const PublishedRecord* b) { return a->published_us < b->published_us; });
  for (const PublishedRecord* p : recs) in.keyframes.push_back(TimedDetections{p->published_us, p->payload});
  for (const FrameRecord& f : trace.frames) in.offline.push_back(TimedDetections{f.timestamp_us, task_truth(f, task)});
  return in;
}

struct MetricsSummary {
  std::string mode;
  std::string trace_hash;
  std::int64_t frame_count = 0;
  PerTask<std::int64_t> processed{};
  std::int64_t bundles = 0;
  double fusion_ratio = 0.0;  // bundles / frames
  std::optional<DelayStats> delay;
  AdvancePolicy policy = AdvancePolicy::single_step;
  PerTask<std::optional<double>> dc{};
  PerTask<std::optional<double>> dc_catch_up{};
  std::optional<double> avg_dc;
  std::optional<double> cost_effectiveness;
  std::vector<double> frame_dc;  // object task, frames with scorable objects

  double fusion_percent() const { return 100.0 * fusion_ratio; }
};

/// Metrics of one run. Completeness needs the trace; without it the
/// completeness and cost-effectiveness fields stay empty.
inline MetricsSummary compute_metrics(const RunData& run, const Trace* trace,
                                      AdvancePolicy policy = AdvancePolicy::single_step) {
  MetricsSummary m;
  m.mode = run.mode;
  m.trace_hash = run.trace_hash;
  m.frame_count = run.frame_count;
  m.processed = run.processed;
  m.bundles = run.bundles;
  m.policy = policy;
  m.fusion_ratio = run.frame_count == 0 ? 0.0 : static_cast<double>(run.bundles) / static_cast<double>(run.frame_count);
  if (!run.fusion_delays_ms.empty()) m.delay = delay_stats(run.fusion_delays_ms);
  if (!trace) return m;

  double sum = 0;
  int n = 0;
  for (TaskId t : kAllTasks) {
    const CompletenessInput in = completeness_input(run, *trace, t);
    const CompletenessCounts c = completeness_counts(in, policy);
    const CompletenessCounts cu = completeness_counts(in, AdvancePolicy::catch_up);
    if (c.objects == 0) continue;
    m.dc[index_of(t)] = c.value();
    m.dc_catch_up[index_of(t)] = cu.value();
    sum += c.value();
    ++n;
    if (t == TaskId::object_detection)
      for (std::size_t k = 0; k < c.frame_objects.size(); ++k)
        if (c.frame_objects[k] > 0)
          m.frame_dc.push_back(static_cast<double>(c.frame_detected[k]) / static_cast<double>(c.frame_objects[k]));
  }
  if (n > 0) m.avg_dc = sum / n;
  if (m.delay && m.avg_dc && m.fusion_ratio > 0 && *m.avg_dc > 0)
    m.cost_effectiveness = ppdnn::cost_effectiveness(m.delay->mean, m.fusion_ratio, *m.avg_dc);
  return m;
}

inline nlohmann::ordered_json to_json(const MetricsSummary& m) {
  using nlohmann::ordered_json;
  auto opt = [](const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); };
  ordered_json j;
  j["mode"] = m.mode;
  j["trace_hash"] = m.trace_hash;
  j["frames"] = m.frame_count;
  j["processed"] = per_task_json(m.processed);
  j["fusion"] = {{"bundles", m.bundles}, {"percent", m.fusion_percent()}};
  if (m.delay)
    j["fusion_delay_ms"] = {{"mean", m.delay->mean}, {"p50", m.delay->p50}, {"p99", m.delay->p99},
                            {"min", m.delay->min},   {"max", m.delay->max}, {"range", m.delay->range}};
  else
    j["fusion_delay_ms"] = nullptr;
  ordered_json dc, dcc;
  for (TaskId t : kAllTasks) {
    dc[std::string(to_string(t))] = opt(m.dc[index_of(t)]);
    dcc[std::string(to_string(t))] = opt(m.dc_catch_up[index_of(t)]);
  }
  j["advance"] = m.policy == AdvancePolicy::single_step ? "single_step" : "catch_up";
  j["completeness"] = dc;
  j["completeness_catch_up"] = dcc;
  j["avg_completeness"] = opt(m.avg_dc);
  j["cost_effectiveness"] = opt(m.cost_effectiveness);
  j["cost_effectiveness_s"] =
      m.cost_effectiveness ? ordered_json(*m.cost_effectiveness * kCostEffectivenessDisplayScale) : ordered_json(nullptr);
  return j;
}

inline void write_cdf(std::ostream& os, std::vector<double> values) {
  std::sort(values.begin(), values.end());
  os << "value,cumulative_probability\n";
  const auto n = static_cast<double>(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    os << detail::fixed3(values[i]) << ',' << detail::fixed3(static_cast<double>(i + 1) / n) << '\n';
}

inline void write_metrics(const std::filesystem::path& dir, const MetricsSummary& m, const RunData& run) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "metrics.json", std::ios::binary);
    os << to_json(m).dump(2) << '\n';
  }
  {
    std::ofstream os(dir / "cdf_fusion_delay.csv", std::ios::binary);
    write_cdf(os, run.fusion_delays_ms);
  }
  {
    std::ofstream os(dir / "cdf_dc.csv", std::ios::binary);
    write_cdf(os, m.frame_dc);
  }
}

}  // namespace ppdnn
