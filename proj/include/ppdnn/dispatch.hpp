#pragma once

#include <cmath>
#include <cstdint>
#include <mutex>
#include <optional>
#include <ostream>
#include <string_view>
#include <vector>

#include "ppdnn/core.hpp"
#include "ppdnn/keyframe.hpp"
#include "ppdnn/roi.hpp"

namespace ppdnn {

/// Frames of slack allowed by an end-to-end budget at a camera rate;
/// floored, never below one.
inline std::int64_t compute_threshold(double deadline_ms, double fps) {
  if (!(deadline_ms > 0.0) || !(fps > 0.0)) throw ValidationError("dispatch: deadline and fps must be positive");
  const auto frames = static_cast<std::int64_t>(std::floor(deadline_ms * fps / 1000.0 + 1e-9));
  return std::max<std::int64_t>(1, frames);
}

struct TaskProgress {
  TaskId task = TaskId::object_detection;
  std::int64_t last_output_seq = -1;
  std::int64_t last_dispatch_seq = -1;
  double deadline_ms = 500.0;
  bool deadline_missed = false;
  std::int64_t delay_threshold_frames = 15;
  // Dispatched frames neither completed nor abandoned yet.
  int outstanding = 0;
};

enum class DispatchRule : std::uint8_t { deadline_missed = 1, safety_broadcast = 2, delay_threshold = 3 };

inline std::string_view to_string(DispatchRule r) {
  switch (r) {
    case DispatchRule::deadline_missed: return "rule1";
    case DispatchRule::safety_broadcast: return "rule2";
    case DispatchRule::delay_threshold: return "rule3";
  }
  return "rule3";
}

struct TaskAction {
  bool dispatch = false;
  RoiSet rois;              // meaningful when dispatch is set
  std::int64_t delay = 0;   // sequence gap used by the delay rule
};

struct DispatchDecision {
  std::int64_t frame_seq = 0;
  DispatchRule rule = DispatchRule::delay_threshold;
  PerTask<TaskAction> per_task;
};

struct DispatchConfig {
  // Rule 1 routes to every missed task (false: only the first missed task).
  bool route_all_missed = true;
};

/// Shared per-task progress plus the three routing rules:
///  1. a task that missed its deadline gets the frame exclusively,
///  2. a safety-critical frame is broadcast,
///  3. otherwise a task is skipped when its backlog exceeds its threshold.
///
/// An idle task (nothing outstanding) has a backlog of one frame. All
/// methods are serialized by an internal mutex.
class Dispatcher {
 public:
  Dispatcher(PerTask<TaskProgress> state, DispatchConfig cfg = {}) : state_(state), cfg_(cfg) {
    for (TaskId t : kAllTasks) {
      TaskProgress& p = state_[index_of(t)];
      p.task = t;
      if (p.delay_threshold_frames < 1) throw ValidationError("dispatch: delay threshold must be >= 1");
      if (p.last_output_seq > p.last_dispatch_seq) throw ValidationError("dispatch: output ahead of dispatch");
    }
  }

  // Same deadline for every task; threshold derived from the frame rate.
  static Dispatcher uniform(double deadline_ms, double fps, DispatchConfig cfg = {}) {
    PerTask<TaskProgress> s;
    for (TaskId t : kAllTasks) {
      s[index_of(t)].task = t;
      s[index_of(t)].deadline_ms = deadline_ms;
      s[index_of(t)].delay_threshold_frames = compute_threshold(deadline_ms, fps);
    }
    return Dispatcher(s, cfg);
  }

  DispatchDecision dispatch(std::int64_t frame_seq, const PerTask<RoiSet>& rois, const ScenarioSnapshot& scenario) {
    std::lock_guard lock(mu_);
    DispatchDecision d;
    d.frame_seq = frame_seq;

    for (TaskId t : kAllTasks) d.per_task[index_of(t)].delay = backlog(state_[index_of(t)], frame_seq);

    bool any_missed = false;
    for (const TaskProgress& p : state_) any_missed = any_missed || p.deadline_missed;

    if (any_missed) {
      d.rule = DispatchRule::deadline_missed;
      bool routed = false;
      for (TaskId t : kAllTasks) {
        const bool take = state_[index_of(t)].deadline_missed && (cfg_.route_all_missed || !routed);
        d.per_task[index_of(t)].dispatch = take;
        routed = routed || take;
      }
    } else if (scenario.safety_critical) {
      d.rule = DispatchRule::safety_broadcast;
      for (TaskAction& a : d.per_task) a.dispatch = true;
    } else {
      d.rule = DispatchRule::delay_threshold;
      for (TaskId t : kAllTasks) {
        TaskAction& a = d.per_task[index_of(t)];
        a.dispatch = a.delay <= state_[index_of(t)].delay_threshold_frames;
      }
    }

    for (TaskId t : kAllTasks) {
      TaskAction& a = d.per_task[index_of(t)];
      if (!a.dispatch) continue;
      TaskProgress& p = state_[index_of(t)];
      if (frame_seq <= p.last_dispatch_seq) throw InvariantError("dispatch: frame dispatched twice to a task");
      a.rois = rois[index_of(t)];
      p.last_dispatch_seq = frame_seq;
      ++p.outstanding;
    }
    return d;
  }

  /// Marks a dispatched frame as finished. `frame_timestamp_ms` is the
  /// capture time of that frame.
  void record_completion(TaskId task, std::int64_t frame_seq, double frame_timestamp_ms, double finished_at_ms) {
    std::lock_guard lock(mu_);
    TaskProgress& p = state_[index_of(task)];
    if (frame_seq < p.last_output_seq) throw ValidationError("dispatch: completion sequence regressed");
    p.last_output_seq = frame_seq;
    p.last_dispatch_seq = std::max(p.last_dispatch_seq, frame_seq);
    p.deadline_missed = finished_at_ms - frame_timestamp_ms > p.deadline_ms;
    p.outstanding = std::max(0, p.outstanding - 1);
  }

  /// A dispatched frame was discarded before running (superseded in a
  /// bounded queue).
  void record_abandoned(TaskId task) {
    std::lock_guard lock(mu_);
    TaskProgress& p = state_[index_of(task)];
    p.outstanding = std::max(0, p.outstanding - 1);
  }

  TaskProgress progress(TaskId t) const {
    std::lock_guard lock(mu_);
    return state_[index_of(t)];
  }

  static std::int64_t backlog(const TaskProgress& p, std::int64_t frame_seq) {
    return p.outstanding > 0 ? frame_seq - p.last_output_seq : 1;
  }

 private:
  PerTask<TaskProgress> state_;
  DispatchConfig cfg_;
  mutable std::mutex mu_;
};

inline void write_dispatch_csv_header(std::ostream& os) { os << "frame_seq,task,action,rule,delay\n"; }

inline void write_dispatch_csv_rows(std::ostream& os, const DispatchDecision& d) {
  for (TaskId t : kAllTasks) {
    const TaskAction& a = d.per_task[index_of(t)];
    os << d.frame_seq << ',' << to_string(t) << ',' << (a.dispatch ? "dispatch" : "drop") << ',' << to_string(d.rule)
       << ',' << a.delay << '\n';
  }
}

}  // namespace ppdnn
