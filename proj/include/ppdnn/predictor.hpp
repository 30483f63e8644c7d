#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string_view>
#include <vector>

#include "ppdnn/core.hpp"
#include "ppdnn/tracker.hpp"

namespace ppdnn {

// Every task output is a list of scored boxes. Segmentation and lane
// regions are carried with score 1.
using Payload = std::vector<Detection>;

inline Payload from_seg_boxes(std::span<const SegBox> segs) {
  Payload out;
  out.reserve(segs.size());
  for (const SegBox& s : segs) out.push_back(Detection{s.class_id, s.box, 1.0});
  return out;
}

inline std::vector<SegBox> to_seg_boxes(const Payload& p) {
  std::vector<SegBox> out;
  out.reserve(p.size());
  for (const Detection& d : p) out.push_back(SegBox{d.class_id, d.box});
  return out;
}

enum class Provenance : std::uint8_t { inference, predicted };

inline std::string_view to_string(Provenance p) { return p == Provenance::inference ? "inference" : "predicted"; }

struct CacheEntry {
  std::int64_t frame_seq = 0;
  double timestamp_ms = 0.0;
  Payload payload;
};

/// Bounded history of critical-frame results for one task, oldest first.
class DetectionCache {
 public:
  static constexpr std::size_t kDefaultCapacity = 10;

  explicit DetectionCache(std::size_t capacity = kDefaultCapacity) : capacity_(capacity) {
    if (capacity_ == 0) throw ValidationError("cache capacity must be positive");
  }

  void insert(CacheEntry e) {
    if (!entries_.empty() && e.frame_seq <= entries_.back().frame_seq)
      throw ValidationError("cache: entries must arrive in frame order");
    entries_.push_back(std::move(e));
    while (entries_.size() > capacity_) entries_.pop_front();
  }

  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  const CacheEntry& newest() const {
    if (entries_.empty()) throw ValidationError("no critical detection cached");
    return entries_.back();
  }
  const std::deque<CacheEntry>& entries() const { return entries_; }

 private:
  std::size_t capacity_;
  std::deque<CacheEntry> entries_;
};

/// Cache shared between one writer (inference results) and any number of
/// readers (the predictor). Readers get an immutable snapshot, so they never
/// see a half-written entry.
class SharedDetectionCache {
 public:
  explicit SharedDetectionCache(std::size_t capacity = DetectionCache::kDefaultCapacity)
      : current_(std::make_shared<const DetectionCache>(capacity)) {}

  void insert(CacheEntry e) {
    std::lock_guard lock(mu_);
    auto next = std::make_shared<DetectionCache>(*current_);
    next->insert(std::move(e));
    current_ = std::move(next);
  }

  std::shared_ptr<const DetectionCache> snapshot() const {
    std::lock_guard lock(mu_);
    return current_;
  }

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const DetectionCache> current_;
};

struct PredictorConfig {
  double predicted_score = 0.51;
  // IoU in [0.1, 0.5]: keep the cached box (false) or take the track (true).
  bool replace_in_middle_band = false;
};

/// Object boxes for a non-critical frame: cached detections refreshed by
/// the tracks observed in the current frame.
inline Payload predict_boxes(const DetectionCache& cache, const TrackerOutput& tracker_out,
                             const PredictorConfig& cfg = {}) {
  const Payload& cached = cache.newest().payload;
  Payload out = cached;
  std::vector<double> best(cached.size(), -1.0);
  Payload appended;

  for (const Track& t : tracker_out.tracked) {
    if (t.miss_count != 0) continue;
    double max_iou = 0.0;
    std::optional<std::size_t> arg;
    for (std::size_t i = 0; i < cached.size(); ++i) {
      const double v = iou(t.box, cached[i].box);
      if (v > max_iou) {
        max_iou = v;
        arg = i;
      }
    }
    const bool replace = max_iou > 0.5 || (cfg.replace_in_middle_band && max_iou >= 0.1);
    if (replace && arg && max_iou > best[*arg]) {
      best[*arg] = max_iou;
      out[*arg].box = t.box;
    } else if (max_iou < 0.1) {
      appended.push_back(Detection{t.class_id, t.box, cfg.predicted_score});
    }
  }
  out.insert(out.end(), appended.begin(), appended.end());
  return out;
}

/// Segment extents moved by the velocity of the best-overlapping track
/// (IoU > 0.5); unmatched extents are unchanged.
inline std::vector<SegBox> predict_segmentation(const DetectionCache& cache, const TrackerOutput& tracker_out,
                                                int frame_width, int frame_height) {
  std::vector<SegBox> out = to_seg_boxes(cache.newest().payload);
  for (SegBox& s : out) {
    double max_iou = 0.5;
    const Track* match = nullptr;
    for (const Track& t : tracker_out.tracked) {
      const double v = iou(t.box, s.box);
      if (v > max_iou) {
        max_iou = v;
        match = &t;
      }
    }
    if (match) s.box = advance_box(s.box, match->velocity, frame_width, frame_height);
  }
  return out;
}

/// Lanes of the newest critical frame.
inline Payload predict_lanes(const DetectionCache& cache) { return cache.newest().payload; }

}  // namespace ppdnn
