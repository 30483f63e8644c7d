#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <tuple>
#include <vector>

#include "ppdnn/core.hpp"

namespace ppdnn {

// Per-frame box change (dx, dy, dh, dw).
struct Velocity {
  double dx = 0.0;
  double dy = 0.0;
  double dh = 0.0;
  double dw = 0.0;

  friend bool operator==(const Velocity&, const Velocity&) = default;
};

/// Velocity of a box between two consecutive frames.
inline Velocity box_velocity(const BBox& previous, const BBox& current) {
  return {current.x() - previous.x(), current.y() - previous.y(), current.h() - previous.h(),
          current.w() - previous.w()};
}

struct Track {
  std::int64_t id = 0;
  BBox box;
  Velocity velocity;
  int age = 0;
  int miss_count = 0;
  ClassId class_id = ClassId::other;
  double score = 0.0;

  friend bool operator==(const Track&, const Track&) = default;
};

struct TrackerOutput {
  std::vector<Track> tracked;  // every live track after the step
  int missed_count = 0;        // tracks left unmatched by this step
  int new_count = 0;           // detections that spawned a track
  int matched_count = 0;
  double mean_tracked_iou = 1.0;

  // Tracks associated with a detection in the current frame.
  std::vector<Track> observed() const {
    std::vector<Track> out;
    for (const Track& t : tracked)
      if (t.miss_count == 0) out.push_back(t);
    return out;
  }
};

/// Applies a box change to `box`, keeps width/height >= 1 pixel and
/// clamps the result into the frame.
inline BBox advance_box(const BBox& box, const Velocity& v, int frame_width, int frame_height) {
  const double w = std::max(1.0, box.w() + v.dw);
  const double h = std::max(1.0, box.h() + v.dh);
  const double fw = frame_width, fh = frame_height;
  const double x0 = std::clamp(box.x() + v.dx, 0.0, fw - 1.0);
  const double y0 = std::clamp(box.y() + v.dy, 0.0, fh - 1.0);
  const double x1 = std::min(std::max(box.x() + v.dx + w, x0 + 1.0), fw);
  const double y1 = std::min(std::max(box.y() + v.dy + h, y0 + 1.0), fh);
  return BBox(x0, y0, x1 - x0, y1 - y0);
}

/// One constant-velocity step of a track.
inline BBox predict(const Track& track, int frame_width, int frame_height) {
  return advance_box(track.box, track.velocity, frame_width, frame_height);
}

struct Match {
  std::size_t row;
  std::size_t col;
  double score;

  friend bool operator==(const Match&, const Match&) = default;
};

/// Greedy highest-score-first assignment over a row-major rows x cols score
/// matrix. A pair is accepted iff its score >= threshold and neither side
/// is taken. Ties resolve to the lower (row, col).
inline std::vector<Match> greedy_match(std::span<const double> scores, std::size_t rows, std::size_t cols,
                                       double threshold) {
  std::vector<Match> candidates;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      const double s = scores[r * cols + c];
      if (s >= threshold && s > 0.0) candidates.push_back({r, c, s});
    }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Match& a, const Match& b) { return a.score > b.score; });
  std::vector<bool> row_used(rows), col_used(cols);
  std::vector<Match> out;
  for (const Match& m : candidates) {
    if (row_used[m.row] || col_used[m.col]) continue;
    row_used[m.row] = col_used[m.col] = true;
    out.push_back(m);
  }
  return out;
}

struct TrackerConfig {
  double match_threshold = 0.3;
  int max_misses = 3;
  // 0 disables smoothing; otherwise v = a * v_new + (1 - a) * v_old.
  double velocity_smoothing = 0.0;
  int frame_width = 1280;
  int frame_height = 720;
};

/// IoU-greedy multi-object tracker with constant-velocity prediction.
///
/// Not thread-safe; one instance per stream.
class Tracker {
 public:
  explicit Tracker(TrackerConfig cfg = {}) : cfg_(cfg) {}

  TrackerOutput step(std::span<const Detection> detections, std::int64_t frame_seq) {
    if (frame_seq <= last_seq_) throw ValidationError("tracker: frame sequence must increase");
    last_seq_ = frame_seq;

    const std::size_t nt = tracks_.size(), nd = detections.size();
    std::vector<BBox> predicted(nt);
    for (std::size_t i = 0; i < nt; ++i) predicted[i] = predict(tracks_[i], cfg_.frame_width, cfg_.frame_height);

    std::vector<double> scores(nt * nd);
    for (std::size_t i = 0; i < nt; ++i)
      for (std::size_t j = 0; j < nd; ++j) scores[i * nd + j] = iou(predicted[i], detections[j].box);

    const auto matches = greedy_match(scores, nt, nd, cfg_.match_threshold);

    TrackerOutput out;
    std::vector<bool> track_hit(nt), det_hit(nd);
    double iou_sum = 0.0;
    for (const Match& m : matches) {
      track_hit[m.row] = det_hit[m.col] = true;
      iou_sum += m.score;
      Track& t = tracks_[m.row];
      const Detection& d = detections[m.col];
      const Velocity raw = box_velocity(t.box, d.box);
      if (cfg_.velocity_smoothing > 0.0) {
        const double a = cfg_.velocity_smoothing;
        t.velocity = {a * raw.dx + (1 - a) * t.velocity.dx, a * raw.dy + (1 - a) * t.velocity.dy,
                      a * raw.dh + (1 - a) * t.velocity.dh, a * raw.dw + (1 - a) * t.velocity.dw};
      } else {
        t.velocity = raw;
      }
      t.box = d.box;
      t.class_id = d.class_id;
      t.score = d.score;
      t.miss_count = 0;
      ++t.age;
    }
    out.matched_count = static_cast<int>(matches.size());
    out.mean_tracked_iou = matches.empty() ? 1.0 : iou_sum / static_cast<double>(matches.size());

    std::vector<Track> next;
    next.reserve(nt + nd);
    for (std::size_t i = 0; i < nt; ++i) {
      Track& t = tracks_[i];
      if (!track_hit[i]) {
        ++out.missed_count;
        ++t.miss_count;
        ++t.age;
        if (t.miss_count > cfg_.max_misses) continue;
      }
      next.push_back(t);
    }
    for (std::size_t j = 0; j < nd; ++j) {
      if (det_hit[j]) continue;
      ++out.new_count;
      next.push_back(Track{next_id_++, detections[j].box, Velocity{}, 0, 0, detections[j].class_id,
                           detections[j].score});
    }
    tracks_ = std::move(next);
    out.tracked = tracks_;
    return out;
  }

  const std::vector<Track>& tracks() const { return tracks_; }
  const TrackerConfig& config() const { return cfg_; }

 private:
  TrackerConfig cfg_;
  std::vector<Track> tracks_;
  std::int64_t next_id_ = 0;
  std::int64_t last_seq_ = std::numeric_limits<std::int64_t>::min();
};

}  // namespace ppdnn
