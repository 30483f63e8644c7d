#pragma once

#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "ppdnn/core.hpp"
#include "ppdnn/roi.hpp"
#include "ppdnn/similarity.hpp"
#include "ppdnn/tracker.hpp"

namespace ppdnn {

struct KeyframeConfig {
  double ssim_threshold = 0.95;
  int miss_threshold = 1;  // critical when misses > threshold
  double tracked_iou_threshold = 0.5;
  double interval_deadline_ms = 500.0;
  double pedestrian_ratio_threshold = 0.5;
  double stationary_ratio_epsilon = 0.05;
  // Also treat a low mean tracked IoU as a miss-type trigger.
  bool use_mean_iou = true;
  double roi_margin_px = 8.0;
  // Use the (min x, min y, max h, max w) single-ROI formula verbatim
  // instead of the covering rectangle.
  bool literal_one_roi = false;
  SsimParams ssim;

  void validate() const {
    if (!(ssim_threshold >= -1.0 && ssim_threshold <= 1.0)) throw ValidationError("keyframe.ssim_threshold out of range");
    if (miss_threshold < 0) throw ValidationError("keyframe.miss_threshold must be >= 0");
    if (!(tracked_iou_threshold >= 0.0 && tracked_iou_threshold <= 1.0))
      throw ValidationError("keyframe.tracked_iou_threshold out of range");
    if (!(interval_deadline_ms >= 0.0)) throw ValidationError("keyframe.interval_deadline_ms must be >= 0");
    if (!(pedestrian_ratio_threshold >= 0.0 && pedestrian_ratio_threshold <= 1.0))
      throw ValidationError("keyframe.pedestrian_ratio_threshold out of range");
    if (!(stationary_ratio_epsilon >= 0.0 && stationary_ratio_epsilon <= 1.0))
      throw ValidationError("keyframe.stationary_ratio_epsilon out of range");
    if (!(roi_margin_px >= 0.0)) throw ValidationError("keyframe.roi_margin_px must be >= 0");
    ssim.validate();
  }
};

struct ScenarioSnapshot {
  double moving_ratio = 0.0;
  double stationary_ratio = 0.0;
  double pedestrian_ratio = 0.0;
  bool safety_critical = false;

  friend bool operator==(const ScenarioSnapshot&, const ScenarioSnapshot&) = default;
};

/// Class mix of confident (score > 0.5) detections.
inline ScenarioSnapshot classify_scenario(std::span<const Detection> detections,
                                          double pedestrian_ratio_threshold = 0.5) {
  int n = 0, moving = 0, stationary = 0, pedestrians = 0;
  for (const Detection& d : detections) {
    if (!(d.score > 0.5)) continue;
    ++n;
    if (is_moving_class(d.class_id)) ++moving;
    if (is_stationary_class(d.class_id)) ++stationary;
    if (d.class_id == ClassId::pedestrian) ++pedestrians;
  }
  ScenarioSnapshot s;
  if (n == 0) return s;
  s.moving_ratio = static_cast<double>(moving) / n;
  s.stationary_ratio = static_cast<double>(stationary) / n;
  s.pedestrian_ratio = static_cast<double>(pedestrians) / n;
  s.safety_critical = s.pedestrian_ratio > pedestrian_ratio_threshold;
  return s;
}

inline ScenarioSnapshot classify_scenario(std::span<const Track> tracks, double pedestrian_ratio_threshold = 0.5) {
  std::vector<Detection> dets;
  dets.reserve(tracks.size());
  for (const Track& t : tracks) dets.push_back(Detection{t.class_id, t.box, t.score});
  return classify_scenario(std::span<const Detection>(dets), pedestrian_ratio_threshold);
}

enum class CriticalReason : std::uint8_t { interval, scenario, ssim, misses, not_critical };

inline std::string_view to_string(CriticalReason r) {
  switch (r) {
    case CriticalReason::interval: return "interval";
    case CriticalReason::scenario: return "scenario";
    case CriticalReason::ssim: return "ssim";
    case CriticalReason::misses: return "misses";
    case CriticalReason::not_critical: return "not_critical";
  }
  return "not_critical";
}

struct RoiCandidates {
  RoiSet single;  // one_roi, or full_frame
  RoiSet batch;   // multi_roi, or full_frame
};

struct KeyframeDecision {
  std::int64_t frame_seq = 0;
  bool is_critical = false;
  CriticalReason reason = CriticalReason::not_critical;
  double ssim = 1.0;
  std::optional<RoiCandidates> roi_candidates;
};

/// Builds the single-crop and batch candidates from the current tracks.
inline RoiCandidates build_rois(const TrackerOutput& tracker_out, const ScenarioSnapshot& scenario,
                                const FrameRecord& frame, const KeyframeConfig& cfg) {
  const RoiSet full = RoiSet::full(frame.width, frame.height);
  std::vector<BBox> boxes;
  std::vector<BBox> stationary;
  const double m = cfg.roi_margin_px;
  for (const Track& t : tracker_out.tracked) {
    auto padded = try_clip(Corners{t.box.x() - m, t.box.y() - m, t.box.right() + m, t.box.bottom() + m},
                           frame.width, frame.height);
    if (!padded) continue;
    boxes.push_back(*padded);
    if (is_stationary_class(t.class_id)) stationary.push_back(*padded);
  }
  if (boxes.empty()) return {full, full};

  RoiCandidates out;
  if (scenario.safety_critical) {
    out.single = full;
  } else if (cfg.literal_one_roi) {
    double x = boxes.front().x(), y = boxes.front().y(), h = 0, w = 0;
    for (const BBox& b : boxes) {
      x = std::min(x, b.x());
      y = std::min(y, b.y());
      h = std::max(h, b.h());
      w = std::max(w, b.w());
    }
    out.single = RoiSet::one(clip(BBox(x, y, w, h), frame.width, frame.height));
  } else {
    out.single = RoiSet::one(union_cover(boxes));
  }

  std::vector<BBox> batch = boxes;
  if (scenario.stationary_ratio > cfg.stationary_ratio_epsilon && !stationary.empty())
    batch.push_back(union_cover(stationary));
  out.batch = RoiSet::multi(std::move(batch));
  return out;
}

/// Critical-frame cascade: interval deadline or scenario trigger first, then
/// thumbnail similarity, then tracker misses.
///
/// `last_critical_ms` is empty before the first critical frame, which makes
/// the current frame critical by the interval rule.
inline KeyframeDecision decide(const FrameRecord& frame, const Thumbnail& prev_thumbnail,
                               const TrackerOutput& tracker_out, std::optional<double> last_critical_ms,
                               const ScenarioSnapshot& scenario, const KeyframeConfig& cfg) {
  KeyframeDecision d;
  d.frame_seq = frame.seq;
  const bool overdue = !last_critical_ms || frame.timestamp_ms() - *last_critical_ms > cfg.interval_deadline_ms;
  if (overdue) {
    d.reason = CriticalReason::interval;
  } else if (scenario.safety_critical) {
    d.reason = CriticalReason::scenario;
  } else {
    d.ssim = ssim(to_thumbnail(frame.thumbnail), prev_thumbnail, cfg.ssim);
    if (d.ssim < cfg.ssim_threshold) {
      d.reason = CriticalReason::ssim;
    } else if (tracker_out.missed_count > cfg.miss_threshold ||
               (cfg.use_mean_iou && tracker_out.mean_tracked_iou < cfg.tracked_iou_threshold)) {
      d.reason = CriticalReason::misses;
    }
  }
  d.is_critical = d.reason != CriticalReason::not_critical;
  if (d.is_critical) d.roi_candidates = build_rois(tracker_out, scenario, frame, cfg);
  return d;
}

/// Per-stream keyframe state: previous thumbnail and last critical time.
class KeyframeSelector {
 public:
  explicit KeyframeSelector(KeyframeConfig cfg = {}) : cfg_(std::move(cfg)) { cfg_.validate(); }

  KeyframeDecision next(const FrameRecord& frame, const TrackerOutput& tracker_out, const ScenarioSnapshot& scenario) {
    const Thumbnail current = to_thumbnail(frame.thumbnail);
    const Thumbnail& prev = prev_ ? *prev_ : current;
    KeyframeDecision d = decide(frame, prev, tracker_out, last_critical_ms_, scenario, cfg_);
    if (d.is_critical) last_critical_ms_ = frame.timestamp_ms();
    prev_ = current;
    return d;
  }

  const KeyframeConfig& config() const { return cfg_; }

 private:
  KeyframeConfig cfg_;
  std::optional<Thumbnail> prev_;
  std::optional<double> last_critical_ms_;
};

}  // namespace ppdnn
