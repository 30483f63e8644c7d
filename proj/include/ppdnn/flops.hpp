#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "ppdnn/core.hpp"
#include "ppdnn/roi.hpp"

namespace ppdnn {

/// Compute-cost model per task, in GMACs.
///
/// The object detector rescales its input into [s_min, s_max] and pads to a
/// multiple of s_d, so its cost depends on the aspect ratio only. Lane and
/// segmentation models run at native resolution and scale with pixel count.
struct FlopsModel {
  double a0 = 1e-6;  // object detection, GMACs per effective pixel
  double a1 = 5e-7;  // lane detection, GMACs per pixel
  double a2 = 8e-7;  // segmentation, GMACs per pixel
  std::int64_t s_min = 800;
  std::int64_t s_max = 1333;
  std::int64_t s_d = 32;

  void validate() const {
    if (!(a0 > 0 && a1 > 0 && a2 > 0)) throw ValidationError("flops: coefficients must be positive");
    if (s_min <= 0 || s_max < s_min) throw ValidationError("flops: need 0 < s_min <= s_max");
    if (s_d <= 0) throw ValidationError("flops: s_d must be a positive integer");
  }
};

namespace detail {

inline std::int64_t ceil_div(std::int64_t num, std::int64_t den) { return (num + den - 1) / den; }

inline void require_positive(std::int64_t h, std::int64_t w) {
  if (h <= 0 || w <= 0) throw ValidationError("flops: dimensions must be positive");
}

}  // namespace detail

/// Branch index 1..4 of the object-detector cost for aspect ratio h/w.
/// Boundary ratios belong to the lower-index branch.
inline int object_branch(std::int64_t h, std::int64_t w, const FlopsModel& m) {
  detail::require_positive(h, w);
  if (h * m.s_max <= w * m.s_min) return 1;
  if (h <= w) return 2;
  if (h * m.s_min <= w * m.s_max) return 3;
  return 4;
}

/// Effective-pixel count of one branch formula, evaluated regardless of
/// whether (h, w) falls inside that branch. Integer ceilings are exact.
inline std::int64_t object_branch_pixels(std::int64_t h, std::int64_t w, int branch, const FlopsModel& m) {
  detail::require_positive(h, w);
  using detail::ceil_div;
  const std::int64_t sd = m.s_d;
  switch (branch) {
    case 1: return ceil_div(m.s_max * h, w * sd) * ceil_div(m.s_max, sd) * sd * sd;
    case 2: return ceil_div(m.s_min, sd) * ceil_div(m.s_min * w, h * sd) * sd * sd;
    case 3: return ceil_div(m.s_min * h, w * sd) * ceil_div(m.s_min, sd) * sd * sd;
    case 4: return ceil_div(m.s_max, sd) * ceil_div(m.s_max * w, h * sd) * sd * sd;
    default: throw ValidationError("flops: branch must be 1..4");
  }
}

inline double flops_object(std::int64_t h, std::int64_t w, const FlopsModel& m) {
  return m.a0 * static_cast<double>(object_branch_pixels(h, w, object_branch(h, w, m), m));
}

inline double flops_linear(std::int64_t h, std::int64_t w, double coeff) {
  detail::require_positive(h, w);
  return coeff * static_cast<double>(h) * static_cast<double>(w);
}

inline double flops_task(TaskId task, std::int64_t h, std::int64_t w, const FlopsModel& m) {
  switch (task) {
    case TaskId::object_detection: return flops_object(h, w, m);
    case TaskId::lane_detection: return flops_linear(h, w, m.a1);
    case TaskId::segmentation: return flops_linear(h, w, m.a2);
  }
  return 0.0;
}

// Whole pixels spanned by a fractional extent.
inline std::int64_t pixel_extent(double v) { return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(v - 1e-9))); }

/// Predicted GMACs of running `task` on a crop set. Multi-ROI batches are
/// padded to the largest height and width in the batch.
inline double predict_roiset(const RoiSet& rois, TaskId task, const FlopsModel& m) {
  if (rois.boxes.empty()) throw ValidationError("flops: empty roi set");
  if (rois.mode != RoiMode::multi_roi) {
    const BBox& b = rois.boxes.front();
    return flops_task(task, pixel_extent(b.h()), pixel_extent(b.w()), m);
  }
  double max_h = 0, max_w = 0;
  for (const BBox& b : rois.boxes) {
    max_h = std::max(max_h, b.h());
    max_w = std::max(max_w, b.w());
  }
  return static_cast<double>(rois.boxes.size()) * flops_task(task, pixel_extent(max_h), pixel_extent(max_w), m);
}

/// Picks the cheaper of a (single, batch) candidate pair; ties go to the
/// single crop.
inline const RoiSet& choose_roi(const RoiSet& single, const RoiSet& batch, TaskId task, const FlopsModel& m) {
  return predict_roiset(batch, task, m) < predict_roiset(single, task, m) ? batch : single;
}

}  // namespace ppdnn
