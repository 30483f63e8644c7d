#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <optional>
#include <queue>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ppdnn/core.hpp"
#include "ppdnn/dispatch.hpp"
#include "ppdnn/flops.hpp"
#include "ppdnn/fusion.hpp"
#include "ppdnn/keyframe.hpp"
#include "ppdnn/predictor.hpp"
#include "ppdnn/roi.hpp"
#include "ppdnn/traceio.hpp"
#include "ppdnn/tracker.hpp"

namespace ppdnn {

// Pipeline variants, from the plain fan-out to the full control plane.
enum class Mode : std::uint8_t { baseline, fd, fd_fg, fd_dp, ppdnn };

inline constexpr std::array<Mode, 5> kAllModes = {Mode::baseline, Mode::fd, Mode::fd_fg, Mode::fd_dp, Mode::ppdnn};

inline std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::baseline: return "baseline";
    case Mode::fd: return "fd";
    case Mode::fd_fg: return "fd_fg";
    case Mode::fd_dp: return "fd_dp";
    case Mode::ppdnn: return "ppdnn";
  }
  return "baseline";
}

inline Mode mode_from_string(std::string_view s) {
  for (Mode m : kAllModes)
    if (to_string(m) == s) return m;
  throw ValidationError("unknown mode '" + std::string(s) + "' (valid: baseline, fd, fd_fg, fd_dp, ppdnn)");
}

struct ModeFeatures {
  bool dispatcher = false;
  bool frame_generator = false;  // critical frames + ROIs
  bool predictor = false;
};

inline ModeFeatures features(Mode m) {
  switch (m) {
    case Mode::baseline: return {false, false, false};
    case Mode::fd: return {true, false, false};
    case Mode::fd_fg: return {true, true, false};
    case Mode::fd_dp: return {true, false, true};
    case Mode::ppdnn: return {true, true, true};
  }
  return {};
}

// Mean per-task inference latency on full frames, ms.
inline constexpr PerTask<double> kReferenceLatencyMs = {257.4, 311.2, 366.2};

struct LatencyModel {
  PerTask<double> base_ms{};
  PerTask<double> ms_per_gmac{};
  double noise_stddev_ms = 5.0;
  std::uint64_t seed = 0;

  void validate() const {
    for (TaskId t : kAllTasks) {
      if (!(base_ms[index_of(t)] >= 0.0)) throw ValidationError("latency.base_ms must be >= 0");
      if (!(ms_per_gmac[index_of(t)] >= 0.0)) throw ValidationError("latency.ms_per_gmac must be >= 0");
    }
    if (!(noise_stddev_ms >= 0.0)) throw ValidationError("latency.noise_stddev_ms must be >= 0");
  }
};

/// Noise-free service time in ms.
inline double mean_service_time(TaskId task, const RoiSet& rois, const LatencyModel& lm, const FlopsModel& m) {
  return lm.base_ms[index_of(task)] + lm.ms_per_gmac[index_of(task)] * predict_roiset(rois, task, m);
}

inline double service_time(TaskId task, const RoiSet& rois, const LatencyModel& lm, const FlopsModel& m,
                           std::mt19937_64& rng) {
  double v = mean_service_time(task, rois, lm, m);
  if (lm.noise_stddev_ms > 0.0) v += std::normal_distribution<double>(0.0, lm.noise_stddev_ms)(rng);
  return std::max(0.0, v);
}

/// Seeded service-time source for one run.
class LatencySampler {
 public:
  LatencySampler(LatencyModel lm, FlopsModel m) : lm_(lm), m_(m), rng_(lm.seed) {
    lm_.validate();
    m_.validate();
  }
  double sample(TaskId task, const RoiSet& rois) { return service_time(task, rois, lm_, m_, rng_); }
  const LatencyModel& model() const { return lm_; }

 private:
  LatencyModel lm_;
  FlopsModel m_;
  std::mt19937_64 rng_;
};

/// Solves base + k * mean_gmacs = target per task, with base a fixed
/// fraction of the target. A zero-cost stream puts everything in base.
inline LatencyModel calibrate(const PerTask<double>& target_means_ms, const PerTask<double>& mean_gmacs,
                              double base_fraction = 0.2) {
  if (!(base_fraction >= 0.0 && base_fraction <= 1.0)) throw ValidationError("calibrate: base fraction out of [0, 1]");
  LatencyModel lm;
  for (TaskId t : kAllTasks) {
    const std::size_t i = index_of(t);
    if (!(target_means_ms[i] > 0.0)) throw ValidationError("calibrate: targets must be positive");
    if (!(mean_gmacs[i] >= 0.0)) throw ValidationError("calibrate: negative GMACs");
    if (mean_gmacs[i] == 0.0) {
      lm.base_ms[i] = target_means_ms[i];
      lm.ms_per_gmac[i] = 0.0;
    } else {
      lm.base_ms[i] = base_fraction * target_means_ms[i];
      lm.ms_per_gmac[i] = (1.0 - base_fraction) * target_means_ms[i] / mean_gmacs[i];
    }
  }
  return lm;
}

inline LatencyModel calibrate(const PerTask<double>& target_means_ms, const PerTask<std::vector<RoiSet>>& stream,
                              const FlopsModel& m, double base_fraction = 0.2) {
  PerTask<double> mean{};
  for (TaskId t : kAllTasks) {
    const auto& s = stream[index_of(t)];
    double sum = 0.0;
    for (const RoiSet& r : s) sum += predict_roiset(r, t, m);
    mean[index_of(t)] = s.empty() ? 0.0 : sum / static_cast<double>(s.size());
  }
  return calibrate(target_means_ms, mean, base_fraction);
}

struct ExecutorConfig {
  // One GPU serves all three tasks unless a config splits them.
  int executor_count = 1;
  PerTask<int> assignment = {0, 0, 0};

  static ExecutorConfig per_task() { return {3, {0, 1, 2}}; }
  static ExecutorConfig shared() { return {}; }

  void validate() const {
    if (executor_count < 1) throw ValidationError("executors.count must be >= 1");
    for (int a : assignment)
      if (a < 0 || a >= executor_count) throw ValidationError("executors.assignment index out of range");
  }
};

/// What a task would ideally output for a frame.
inline Payload task_truth(const FrameRecord& f, TaskId task) {
  switch (task) {
    case TaskId::object_detection: return f.truths;
    case TaskId::lane_detection: {
      Payload out;
      for (const SegBox& s : f.seg_boxes)
        if (s.class_id == ClassId::other) out.push_back(Detection{s.class_id, s.box, 1.0});
      return out;
    }
    case TaskId::segmentation: return from_seg_boxes(f.seg_boxes);
  }
  return {};
}

struct DetectorConfig {
  double dropout_rate = 0.05;
  double jitter_px = 2.0;

  void validate() const {
    if (!(dropout_rate >= 0.0 && dropout_rate <= 1.0)) throw ValidationError("detector.dropout_rate out of [0, 1]");
    if (!(jitter_px >= 0.0)) throw ValidationError("detector.jitter_px must be >= 0");
  }
};

/// Stand-in for a DNN: ground truth seen through the dispatched crops,
/// with random misses and box jitter.
class DetectorEmulator {
 public:
  DetectorEmulator(DetectorConfig cfg, std::uint64_t seed) : cfg_(cfg), rng_(seed) { cfg_.validate(); }

  Payload detect(const FrameRecord& f, TaskId task, const RoiSet& rois) {
    Payload out;
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::uniform_real_distribution<double> jit(-cfg_.jitter_px, cfg_.jitter_px);
    for (const Detection& d : task_truth(f, task)) {
      bool seen = false;
      for (const BBox& r : rois.boxes) seen = seen || intersection_area(d.box, r) > 0.0;
      if (!seen) continue;
      if (u01(rng_) < cfg_.dropout_rate) continue;
      if (cfg_.jitter_px == 0.0) {
        out.push_back(d);
        continue;
      }
      const double x = d.box.x() + jit(rng_), y = d.box.y() + jit(rng_);
      const double w = std::max(1.0, d.box.w() + jit(rng_)), h = std::max(1.0, d.box.h() + jit(rng_));
      if (auto b = try_clip(Corners{x, y, x + w, y + h}, f.width, f.height))
        out.push_back(Detection{d.class_id, *b, d.score});
    }
    return out;
  }

 private:
  DetectorConfig cfg_;
  std::mt19937_64 rng_;
};

// CPU cost of the per-frame control work (tracking, ROI generation).
struct ControlPlaneConfig {
  double tracker_ms = 20.0;
  double roi_generator_ms = 8.0;

  void validate() const {
    if (!(tracker_ms >= 0.0) || !(roi_generator_ms >= 0.0)) throw ValidationError("control costs must be >= 0");
  }
};

struct SimConfig {
  Mode mode = Mode::ppdnn;
  std::uint64_t seed = 0;

  KeyframeConfig keyframe;
  TrackerConfig tracker;
  FlopsModel flops;
  double deadline_ms = 500.0;
  DispatchConfig dispatch;
  PredictorConfig predictor;
  std::size_t cache_capacity = DetectionCache::kDefaultCapacity;
  SyncConfig fusion;

  // When set, the latency model is fitted so full-frame inference on the
  // trace averages `latency_targets_ms`; otherwise `latency` is used as is.
  bool calibrate_latency = true;
  PerTask<double> latency_targets_ms = kReferenceLatencyMs;
  double latency_base_fraction = 0.2;
  LatencyModel latency;

  ExecutorConfig executors;
  std::size_t baseline_queue_depth = 100;
  std::size_t dispatch_queue_depth = 1;
  DetectorConfig inference_detector{0.05, 2.0};
  DetectorConfig light_detector{0.03, 1.0};
  ControlPlaneConfig control;
  // Time the pipeline keeps running after the last frame; work still
  // queued or in flight then is cut. Negative runs until idle.
  double drain_ms = 1000.0;

  void validate() const {
    keyframe.validate();
    flops.validate();
    fusion.validate();
    latency.validate();
    executors.validate();
    inference_detector.validate();
    light_detector.validate();
    control.validate();
    if (!(deadline_ms > 0.0)) throw ValidationError("dispatch.deadline_ms must be positive");
    if (cache_capacity < 1) throw ValidationError("predictor.cache_capacity must be >= 1");
    if (baseline_queue_depth < 1) throw ValidationError("queue.baseline_depth must be >= 1");
    if (dispatch_queue_depth < 1) throw ValidationError("queue.dispatch_depth must be >= 1");
    if (!(tracker.match_threshold >= 0.0 && tracker.match_threshold <= 1.0))
      throw ValidationError("tracker.match_threshold out of [0, 1]");
    if (tracker.max_misses < 0) throw ValidationError("tracker.max_misses must be >= 0");
    if (calibrate_latency) {
      for (double t : latency_targets_ms)
        if (!(t > 0.0)) throw ValidationError("latency.target_ms must be positive");
      if (!(latency_base_fraction >= 0.0 && latency_base_fraction <= 1.0))
        throw ValidationError("latency.base_fraction out of [0, 1]");
    }
  }
};

struct PublishedRecord {
  TaskId task = TaskId::object_detection;
  std::int64_t frame_seq = 0;
  std::int64_t stamp_us = 0;      // capture time of the frame
  std::int64_t published_us = 0;  // when the result became available
  Provenance provenance = Provenance::inference;
  Payload payload;
};

struct ExecutionRecord {
  int executor = 0;
  TaskId task = TaskId::object_detection;
  std::int64_t frame_seq = 0;
  std::int64_t arrival_us = 0;
  std::int64_t enqueued_us = 0;
  std::int64_t start_us = 0;
  std::int64_t end_us = 0;
  std::uint64_t enqueue_order = 0;
};

struct SimReport {
  Mode mode = Mode::baseline;
  std::string scenario_tag;
  std::string trace_hash;
  std::int64_t frame_count = 0;
  double fps = 0.0;
  LatencyModel latency;

  PerTask<std::int64_t> processed{};
  PerTask<std::int64_t> enqueued{};
  PerTask<std::int64_t> superseded{};  // dropped from a bounded queue
  PerTask<std::int64_t> published_inference{};
  PerTask<std::int64_t> published_predicted{};
  PerTask<std::int64_t> unpublished{};  // frames left without output at the end
  PerTask<std::int64_t> unfinished{};   // jobs queued or running when the run was cut

  std::vector<FusionBundle> bundles;
  SyncCounters sync;
  std::vector<DispatchDecision> dispatch_log;
  std::vector<PublishedRecord> published;
  std::vector<ExecutionRecord> executions;
  std::vector<std::int64_t> seq_gaps;  // newest arrived seq minus the seq being started
  std::int64_t critical_frames = 0;
  std::array<std::int64_t, 5> critical_reasons{};

  double fusion_percent() const {
    return frame_count == 0 ? 0.0 : 100.0 * static_cast<double>(bundles.size()) / static_cast<double>(frame_count);
  }

  std::vector<double> fusion_delays_ms() const {
    std::vector<double> out;
    out.reserve(bundles.size());
    for (const FusionBundle& b : bundles) out.push_back(static_cast<double>(b.fusion_delay_us()) / 1000.0);
    return out;
  }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ (stream * 0xD1B54A32D192ED03ULL));
}

inline std::int64_t ms_to_us(double ms) { return std::llround(ms * 1000.0); }

class Simulation {
 public:
  Simulation(const Trace& trace, const SimConfig& cfg)
      : trace_(trace),
        cfg_(cfg),
        feat_(features(cfg.mode)),
        width_(trace.header.width),
        height_(trace.header.height),
        sampler_(effective_latency(trace, cfg), cfg.flops),
        light_(cfg.light_detector, stream_seed(cfg.seed, 7)),
        tracker_(tracker_config(trace, cfg)),
        selector_(cfg.keyframe),
        dispatcher_(Dispatcher::uniform(cfg.deadline_ms, trace.header.fps, cfg.dispatch)),
        sync_(cfg.fusion),
        executors_(static_cast<std::size_t>(cfg.executors.executor_count)) {
    for (TaskId t : kAllTasks) {
      detectors_.emplace_back(cfg.inference_detector, stream_seed(cfg.seed, 10 + index_of(t)));
      caches_[index_of(t)] = DetectionCache(cfg.cache_capacity);
    }
    report_.mode = cfg.mode;
    report_.scenario_tag = trace.header.scenario_tag;
    report_.frame_count = static_cast<std::int64_t>(trace.frames.size());
    report_.fps = trace.header.fps;
    report_.latency = sampler_.model();
  }

  SimReport run() {
    for (std::size_t i = 0; i < trace_.frames.size(); ++i) {
      Event e;
      e.at_us = trace_.frames[i].timestamp_us;
      e.kind = Kind::frame_arrival;
      e.frame = i;
      schedule(std::move(e));
    }
    const bool bounded = cfg_.drain_ms >= 0.0 && !trace_.frames.empty();
    const std::int64_t horizon_us = bounded ? trace_.frames.back().timestamp_us + ms_to_us(cfg_.drain_ms) : 0;
    while (!events_.empty()) {
      Event e = events_.top();
      if (bounded && e.at_us > horizon_us) break;
      events_.pop();
      now_us_ = e.at_us;
      switch (e.kind) {
        case Kind::frame_arrival: on_arrival(e.frame); break;
        case Kind::publish_prediction: on_control_done(e.frame); break;
        case Kind::inference_complete: on_inference(e); break;
      }
    }
    for (; !events_.empty(); events_.pop())
      if (events_.top().kind == Kind::inference_complete) ++report_.unfinished[index_of(events_.top().job.task)];
    for (const Executor& ex : executors_)
      for (const Job& j : ex.queue) ++report_.unfinished[index_of(j.task)];
    // Services cut mid-run never finished; keep the log to completed work.
    if (bounded)
      std::erase_if(report_.executions, [&](const ExecutionRecord& r) { return r.end_us > horizon_us; });
    sync_.flush();
    report_.sync = sync_.counters();
    for (TaskId t : kAllTasks) report_.unpublished[index_of(t)] = static_cast<std::int64_t>(pending_[index_of(t)].size());
    check_invariants();
    return std::move(report_);
  }

 private:
  enum class Kind : std::uint8_t { frame_arrival, publish_prediction, inference_complete };

  struct Job {
    TaskId task = TaskId::object_detection;
    std::size_t frame = 0;
    RoiSet rois;
    std::int64_t enqueued_us = 0;
    std::uint64_t order = 0;
  };

  struct Event {
    std::int64_t at_us = 0;
    std::uint64_t order = 0;
    Kind kind = Kind::frame_arrival;
    std::size_t frame = 0;
    int executor = 0;
    Job job;
  };

  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.at_us != b.at_us ? a.at_us > b.at_us : a.order > b.order;
    }
  };

  struct Executor {
    std::deque<Job> queue;
    bool busy = false;
  };

  struct Pending {
    std::size_t frame = 0;
    TrackerOutput tracker_out;
  };

  static LatencyModel effective_latency(const Trace& trace, const SimConfig& cfg) {
    if (!cfg.calibrate_latency) return cfg.latency;
    PerTask<std::vector<RoiSet>> stream;
    for (TaskId t : kAllTasks) stream[index_of(t)].push_back(RoiSet::full(trace.header.width, trace.header.height));
    LatencyModel lm = calibrate(cfg.latency_targets_ms, stream, cfg.flops, cfg.latency_base_fraction);
    lm.noise_stddev_ms = cfg.latency.noise_stddev_ms;
    lm.seed = cfg.latency.seed;
    return lm;
  }

  static TrackerConfig tracker_config(const Trace& trace, const SimConfig& cfg) {
    TrackerConfig t = cfg.tracker;
    t.frame_width = trace.header.width;
    t.frame_height = trace.header.height;
    return t;
  }

  void schedule(Event e) {
    e.order = next_event_order_++;
    events_.push(std::move(e));
  }

  const FrameRecord& frame(std::size_t i) const { return trace_.frames[i]; }

  PerTask<RoiSet> full_rois() const {
    const RoiSet full = RoiSet::full(width_, height_);
    return {full, full, full};
  }

  void on_arrival(std::size_t i) {
    latest_seq_ = frame(i).seq;
    if (!feat_.dispatcher) {
      for (TaskId t : kAllTasks) enqueue(Job{t, i, RoiSet::full(width_, height_)}, cfg_.baseline_queue_depth, false);
      return;
    }
    if (!feat_.frame_generator && !feat_.predictor) {
      const ScenarioSnapshot scenario =
          classify_scenario(std::span<const Detection>(last_object_output_), cfg_.keyframe.pedestrian_ratio_threshold);
      dispatch_frame(i, full_rois(), scenario);
      return;
    }
    double cost = cfg_.control.tracker_ms;
    if (feat_.frame_generator) cost += cfg_.control.roi_generator_ms;
    control_free_us_ = std::max(control_free_us_, now_us_) + ms_to_us(cost);
    Event e;
    e.at_us = control_free_us_;
    e.kind = Kind::publish_prediction;
    e.frame = i;
    schedule(std::move(e));
  }

  // Tracking, critical-frame selection and prediction for one frame.
  void on_control_done(std::size_t i) {
    const FrameRecord& f = frame(i);
    const Payload light = light_.detect(f, TaskId::object_detection, RoiSet::full(width_, height_));
    TrackerOutput tout = tracker_.step(light, f.seq);
    const auto observed = tout.observed();
    const ScenarioSnapshot scenario =
        classify_scenario(std::span<const Track>(observed), cfg_.keyframe.pedestrian_ratio_threshold);

    if (feat_.frame_generator) {
      const KeyframeDecision kd = selector_.next(f, tout, scenario);
      if (kd.is_critical) {
        ++report_.critical_frames;
        ++report_.critical_reasons[static_cast<std::size_t>(kd.reason)];
        PerTask<RoiSet> rois;
        for (TaskId t : kAllTasks)
          rois[index_of(t)] = choose_roi(kd.roi_candidates->single, kd.roi_candidates->batch, t, cfg_.flops);
        dispatch_frame(i, rois, scenario);
      }
    } else {
      dispatch_frame(i, full_rois(), scenario);
    }

    if (!feat_.predictor) return;
    for (TaskId t : kAllTasks) {
      auto& pend = pending_[index_of(t)];
      if (!pend.empty() || caches_[index_of(t)].empty()) {
        pend.push_back(Pending{i, tout});
        continue;
      }
      publish(t, i, predict_for(t, tout), Provenance::predicted);
    }
  }

  Payload predict_for(TaskId t, const TrackerOutput& tout) const {
    const DetectionCache& cache = caches_[index_of(t)];
    switch (t) {
      case TaskId::object_detection: return predict_boxes(cache, tout, cfg_.predictor);
      case TaskId::lane_detection: return predict_lanes(cache);
      case TaskId::segmentation: return from_seg_boxes(predict_segmentation(cache, tout, width_, height_));
    }
    return {};
  }

  void dispatch_frame(std::size_t i, const PerTask<RoiSet>& rois, const ScenarioSnapshot& scenario) {
    DispatchDecision d = dispatcher_.dispatch(frame(i).seq, rois, scenario);
    for (TaskId t : kAllTasks) {
      const TaskAction& a = d.per_task[index_of(t)];
      if (a.dispatch) enqueue(Job{t, i, a.rois}, cfg_.dispatch_queue_depth, true);
    }
    report_.dispatch_log.push_back(std::move(d));
  }

  void enqueue(Job job, std::size_t depth, bool tracked) {
    job.enqueued_us = now_us_;
    job.order = next_job_order_++;
    const int ex = cfg_.executors.assignment[index_of(job.task)];
    Executor& e = executors_[static_cast<std::size_t>(ex)];
    std::size_t same = 0;
    for (const Job& j : e.queue) same += j.task == job.task;
    while (same >= depth) {
      auto it = std::find_if(e.queue.begin(), e.queue.end(), [&](const Job& j) { return j.task == job.task; });
      e.queue.erase(it);
      --same;
      ++report_.superseded[index_of(job.task)];
      if (tracked) dispatcher_.record_abandoned(job.task);
    }
    ++report_.enqueued[index_of(job.task)];
    e.queue.push_back(std::move(job));
    try_start(ex);
  }

  void try_start(int ex) {
    Executor& e = executors_[static_cast<std::size_t>(ex)];
    if (e.busy || e.queue.empty()) return;
    Job job = std::move(e.queue.front());
    e.queue.pop_front();
    e.busy = true;
    const std::int64_t service_us = ms_to_us(sampler_.sample(job.task, job.rois));
    const FrameRecord& f = frame(job.frame);
    report_.executions.push_back(ExecutionRecord{ex, job.task, f.seq, f.timestamp_us, job.enqueued_us, now_us_,
                                                 now_us_ + service_us, job.order});
    report_.seq_gaps.push_back(latest_seq_ - f.seq);
    Event done;
    done.at_us = now_us_ + service_us;
    done.kind = Kind::inference_complete;
    done.frame = job.frame;
    done.executor = ex;
    done.job = std::move(job);
    schedule(std::move(done));
  }

  void on_inference(const Event& ev) {
    const Job& job = ev.job;
    const TaskId t = job.task;
    const FrameRecord& f = frame(job.frame);
    executors_[static_cast<std::size_t>(ev.executor)].busy = false;
    Payload payload = detectors_[index_of(t)].detect(f, t, job.rois);
    ++report_.processed[index_of(t)];
    if (feat_.dispatcher)
      dispatcher_.record_completion(t, f.seq, f.timestamp_ms(), static_cast<double>(now_us_) / 1000.0);
    if (t == TaskId::object_detection) last_object_output_ = payload;

    if (feat_.predictor) {
      caches_[index_of(t)].insert(CacheEntry{f.seq, f.timestamp_ms(), payload});
      auto& pend = pending_[index_of(t)];
      for (const Pending& p : pend) {
        if (p.frame == job.frame) publish(t, p.frame, payload, Provenance::inference);
        else publish(t, p.frame, predict_for(t, p.tracker_out), Provenance::predicted);
      }
      pend.clear();
    } else {
      publish(t, job.frame, std::move(payload), Provenance::inference);
    }
    try_start(ev.executor);
  }

  void publish(TaskId t, std::size_t i, Payload payload, Provenance prov) {
    const FrameRecord& f = frame(i);
    if (prov == Provenance::inference) ++report_.published_inference[index_of(t)];
    else ++report_.published_predicted[index_of(t)];
    const auto id = static_cast<std::uint64_t>(report_.published.size());
    report_.published.push_back(PublishedRecord{t, f.seq, f.timestamp_us, now_us_, prov, std::move(payload)});
    for (FusionBundle& b : sync_.push(FusionMessage{t, f.seq, f.timestamp_us, prov, id}, now_us_))
      report_.bundles.push_back(b);
  }

  void check_invariants() const {
    const SyncCounters& c = report_.sync;
    if (c.received != kTaskCount * report_.bundles.size() + c.dropped())
      throw InvariantError("sim: fusion message conservation violated");
    for (const FusionBundle& b : report_.bundles)
      if (b.spread_us() > cfg_.fusion.slop_us) throw InvariantError("sim: bundle spread exceeds slop");

    std::vector<std::vector<const ExecutionRecord*>> per_exec(executors_.size());
    for (const ExecutionRecord& r : report_.executions) {
      if (r.start_us < r.arrival_us || r.end_us < r.start_us) throw InvariantError("sim: causality violated");
      per_exec[static_cast<std::size_t>(r.executor)].push_back(&r);
    }
    for (const auto& rs : per_exec) {
      for (std::size_t k = 1; k < rs.size(); ++k) {
        if (rs[k]->start_us < rs[k - 1]->end_us) throw InvariantError("sim: overlapping service on an executor");
        if (rs[k]->enqueue_order < rs[k - 1]->enqueue_order) throw InvariantError("sim: executor broke FIFO order");
      }
    }

    const std::int64_t threshold = compute_threshold(cfg_.deadline_ms, trace_.header.fps);
    for (const DispatchDecision& d : report_.dispatch_log) {
      if (d.rule != DispatchRule::delay_threshold) continue;
      for (const TaskAction& a : d.per_task)
        if (a.dispatch && a.delay > threshold) throw InvariantError("sim: rule-3 dispatch beyond threshold");
    }
  }

  const Trace& trace_;
  const SimConfig& cfg_;
  ModeFeatures feat_;
  int width_;
  int height_;
  LatencySampler sampler_;
  DetectorEmulator light_;
  std::vector<DetectorEmulator> detectors_;
  Tracker tracker_;
  KeyframeSelector selector_;
  Dispatcher dispatcher_;
  ApproximateTimeSync sync_;
  std::vector<Executor> executors_;
  PerTask<DetectionCache> caches_;
  PerTask<std::vector<Pending>> pending_;
  Payload last_object_output_;

  std::priority_queue<Event, std::vector<Event>, Later> events_;
  std::uint64_t next_event_order_ = 0;
  std::uint64_t next_job_order_ = 0;
  std::int64_t now_us_ = 0;
  std::int64_t control_free_us_ = 0;
  std::int64_t latest_seq_ = -1;
  SimReport report_;
};

}  // namespace detail

/// Replays `trace` through the configured pipeline. Single-threaded and
/// deterministic in (trace, config).
inline SimReport run(const Trace& trace, const SimConfig& cfg) {
  cfg.validate();
  if (!(trace.header.fps > 0.0)) throw ValidationError("trace fps must be positive");
  detail::Simulation sim(trace, cfg);
  SimReport r = sim.run();
  r.trace_hash = hex64(fnv1a64(trace_to_string(trace)));
  return r;
}

// Report directory -----------------------------------------------------------

inline nlohmann::ordered_json per_task_json(const PerTask<std::int64_t>& v) {
  nlohmann::ordered_json j;
  for (TaskId t : kAllTasks) j[std::string(to_string(t))] = v[index_of(t)];
  return j;
}

inline nlohmann::ordered_json report_summary(const SimReport& r) {
  using nlohmann::ordered_json;
  ordered_json latency;
  for (TaskId t : kAllTasks)
    latency[std::string(to_string(t))] = {{"base_ms", r.latency.base_ms[index_of(t)]},
                                          {"ms_per_gmac", r.latency.ms_per_gmac[index_of(t)]}};
  latency["noise_stddev_ms"] = r.latency.noise_stddev_ms;

  ordered_json published;
  for (TaskId t : kAllTasks)
    published[std::string(to_string(t))] = {{"inference", r.published_inference[index_of(t)]},
                                            {"predicted", r.published_predicted[index_of(t)]}};

  std::array<std::int64_t, 3> rules{};
  for (const DispatchDecision& d : r.dispatch_log) ++rules[static_cast<std::size_t>(d.rule) - 1];
  ordered_json reasons;
  for (std::size_t k = 0; k < 4; ++k)
    reasons[std::string(to_string(static_cast<CriticalReason>(k)))] = r.critical_reasons[k];

  const auto delays = r.fusion_delays_ms();
  double mean = 0.0;
  for (double d : delays) mean += d;
  if (!delays.empty()) mean /= static_cast<double>(delays.size());

  return ordered_json{
      {"mode", to_string(r.mode)},
      {"trace", {{"scenario_tag", r.scenario_tag}, {"hash", r.trace_hash}, {"frames", r.frame_count}, {"fps", r.fps}}},
      {"latency", latency},
      {"processed", per_task_json(r.processed)},
      {"enqueued", per_task_json(r.enqueued)},
      {"superseded", per_task_json(r.superseded)},
      {"published", published},
      {"unpublished", per_task_json(r.unpublished)},
      {"unfinished", per_task_json(r.unfinished)},
      {"fusion",
       {{"bundles", r.bundles.size()}, {"percent", r.fusion_percent()}, {"mean_delay_ms", mean}}},
      {"sync",
       {{"received", r.sync.received},
        {"bundled", r.sync.bundled},
        {"dropped_out_of_order", r.sync.dropped_out_of_order},
        {"dropped_overflow", r.sync.dropped_overflow},
        {"dropped_unmatched", r.sync.dropped_unmatched},
        {"dropped_at_flush", r.sync.dropped_at_flush}}},
      {"dispatch", {{"decisions", r.dispatch_log.size()}, {"rule1", rules[0]}, {"rule2", rules[1]}, {"rule3", rules[2]}}},
      {"keyframe", {{"critical_frames", r.critical_frames}, {"reasons", reasons}}},
  };
}

namespace detail {

inline std::string fixed3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace detail

inline void write_fusion_csv(std::ostream& os, const SimReport& r) {
  write_fusion_csv_header(os);
  for (const FusionBundle& b : r.bundles) {
    os << b.id;
    for (const FusionMessage& m : b.messages) os << ',' << m.frame_seq;
    for (const FusionMessage& m : b.messages) os << ',' << to_string(m.provenance);
    os << ',' << detail::fixed3(static_cast<double>(b.spread_us()) / 1000.0) << ',' << b.seq_spread() << ','
       << detail::fixed3(static_cast<double>(b.fusion_delay_us()) / 1000.0) << '\n';
  }
}

inline std::string published_line(const PublishedRecord& p) {
  nlohmann::ordered_json dets = nlohmann::ordered_json::array();
  for (const Detection& d : p.payload) dets.push_back(detection_to_json(d));
  nlohmann::ordered_json j = {{"task", to_string(p.task)},         {"seq", p.frame_seq},
                              {"stamp_us", p.stamp_us},            {"published_us", p.published_us},
                              {"provenance", to_string(p.provenance)}, {"detections", std::move(dets)}};
  return j.dump();
}

inline void write_report(const std::filesystem::path& dir, const SimReport& r) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream os(dir / name, std::ios::binary);
    if (!os) throw ValidationError("cannot write " + (dir / name).string());
    return os;
  };
  {
    auto os = open("report.json");
    os << report_summary(r).dump(2) << '\n';
  }
  {
    auto os = open("fusion.csv");
    write_fusion_csv(os, r);
  }
  {
    auto os = open("dispatch.csv");
    write_dispatch_csv_header(os);
    for (const DispatchDecision& d : r.dispatch_log) write_dispatch_csv_rows(os, d);
  }
  {
    auto os = open("published.jsonl");
    for (const PublishedRecord& p : r.published) os << published_line(p) << '\n';
  }
}

}  // namespace ppdnn
