#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ppdnn {

// Error hierarchy. ValidationError covers bad inputs (files, configs,
// arguments); InvariantError signals that an internal contract was broken.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class InvariantError : public Error {
 public:
  using Error::Error;
};

/// Axis-aligned pixel rectangle, top-left origin.
///
/// Construction enforces x, y >= 0 and w, h > 0. Intermediate geometry that
/// may leave the frame (velocity steps, padding) goes through `Corners`.
class BBox {
 public:
  BBox() = default;
  BBox(double x, double y, double w, double h) : x_(x), y_(y), w_(w), h_(h) {
    if (!(w > 0.0) || !(h > 0.0)) throw ValidationError("bbox: width and height must be positive");
    if (!(x >= 0.0) || !(y >= 0.0)) throw ValidationError("bbox: origin must be non-negative");
    if (!std::isfinite(x + y + w + h)) throw ValidationError("bbox: non-finite coordinate");
  }

  double x() const { return x_; }
  double y() const { return y_; }
  double w() const { return w_; }
  double h() const { return h_; }
  double right() const { return x_ + w_; }
  double bottom() const { return y_ + h_; }
  double area() const { return w_ * h_; }

  // Tolerates the rounding of x + (x1 - x) when boxes are rebuilt from corners.
  bool contains(const BBox& o) const {
    constexpr double eps = 1e-9;
    return o.x_ >= x_ - eps && o.y_ >= y_ - eps && o.right() <= right() + eps && o.bottom() <= bottom() + eps;
  }

  friend bool operator==(const BBox&, const BBox&) = default;

 private:
  double x_ = 0.0;
  double y_ = 0.0;
  double w_ = 1.0;
  double h_ = 1.0;
};

// Unconstrained corner-form rectangle.
struct Corners {
  double x0, y0, x1, y1;

  static Corners of(const BBox& b) { return {b.x(), b.y(), b.right(), b.bottom()}; }
};

enum class ClassId : std::uint8_t { vehicle, pedestrian, bicycle, traffic_sign, traffic_light, other };

inline constexpr std::array<ClassId, 6> kAllClasses = {ClassId::vehicle,      ClassId::pedestrian,
                                                       ClassId::bicycle,      ClassId::traffic_sign,
                                                       ClassId::traffic_light, ClassId::other};

inline std::string_view to_string(ClassId c) {
  switch (c) {
    case ClassId::vehicle: return "vehicle";
    case ClassId::pedestrian: return "pedestrian";
    case ClassId::bicycle: return "bicycle";
    case ClassId::traffic_sign: return "traffic_sign";
    case ClassId::traffic_light: return "traffic_light";
    case ClassId::other: return "other";
  }
  return "other";
}

inline ClassId class_from_string(std::string_view s) {
  for (ClassId c : kAllClasses)
    if (to_string(c) == s) return c;
  throw ValidationError("unknown class label '" + std::string(s) + "'");
}

inline bool is_moving_class(ClassId c) {
  return c == ClassId::vehicle || c == ClassId::pedestrian || c == ClassId::bicycle;
}

inline bool is_stationary_class(ClassId c) {
  return c == ClassId::traffic_sign || c == ClassId::traffic_light;
}

struct Detection {
  ClassId class_id = ClassId::other;
  BBox box;
  double score = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

inline Detection make_detection(ClassId c, const BBox& box, double score) {
  if (!(score >= 0.0 && score <= 1.0)) throw ValidationError("detection: score outside [0,1]");
  return Detection{c, box, score};
}

// Stand-in for a segmentation mask: the extent of one class region.
struct SegBox {
  ClassId class_id = ClassId::other;
  BBox box;

  friend bool operator==(const SegBox&, const SegBox&) = default;
};

inline constexpr int kThumbSide = 25;
inline constexpr int kThumbPixels = kThumbSide * kThumbSide;

struct FrameRecord {
  std::int64_t seq = 0;
  std::int64_t timestamp_us = 0;
  int width = 0;
  int height = 0;
  std::array<std::uint8_t, kThumbPixels> thumbnail{};
  std::vector<Detection> truths;
  std::vector<SegBox> seg_boxes;

  double timestamp_ms() const { return static_cast<double>(timestamp_us) / 1000.0; }

  friend bool operator==(const FrameRecord&, const FrameRecord&) = default;
};

enum class TaskId : std::uint8_t { object_detection = 0, lane_detection = 1, segmentation = 2 };

inline constexpr std::size_t kTaskCount = 3;
inline constexpr std::array<TaskId, kTaskCount> kAllTasks = {TaskId::object_detection, TaskId::lane_detection,
                                                             TaskId::segmentation};

inline constexpr std::size_t index_of(TaskId t) { return static_cast<std::size_t>(t); }

inline std::string_view to_string(TaskId t) {
  switch (t) {
    case TaskId::object_detection: return "object_detection";
    case TaskId::lane_detection: return "lane_detection";
    case TaskId::segmentation: return "segmentation";
  }
  return "object_detection";
}

inline TaskId task_from_string(std::string_view s) {
  for (TaskId t : kAllTasks)
    if (to_string(t) == s) return t;
  throw ValidationError("unknown task '" + std::string(s) + "'");
}

// Fixed-size table indexed by task.
template <typename T>
using PerTask = std::array<T, kTaskCount>;

inline double intersection_area(const BBox& a, const BBox& b) {
  const double iw = std::min(a.right(), b.right()) - std::max(a.x(), b.x());
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y(), b.y());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  return iw * ih;
}

/// Intersection over union. Boxes that only share an edge have IoU 0.
inline double iou(const BBox& a, const BBox& b) {
  const double inter = intersection_area(a, b);
  if (inter == 0.0) return 0.0;
  if (a == b) return 1.0;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

/// Smallest axis-aligned box containing every input box.
inline BBox union_cover(std::span<const BBox> boxes) {
  if (boxes.empty()) throw ValidationError("no boxes to cover");
  double x0 = boxes.front().x(), y0 = boxes.front().y();
  double x1 = boxes.front().right(), y1 = boxes.front().bottom();
  for (const BBox& b : boxes.subspan(1)) {
    x0 = std::min(x0, b.x());
    y0 = std::min(y0, b.y());
    x1 = std::max(x1, b.right());
    y1 = std::max(y1, b.bottom());
  }
  return BBox(x0, y0, x1 - x0, y1 - y0);
}

inline BBox union_cover(std::initializer_list<BBox> boxes) {
  return union_cover(std::span<const BBox>(boxes.begin(), boxes.size()));
}

inline std::optional<BBox> try_clip(const Corners& c, double width, double height) {
  const double x0 = std::max(c.x0, 0.0);
  const double y0 = std::max(c.y0, 0.0);
  const double x1 = std::min(c.x1, width);
  const double y1 = std::min(c.y1, height);
  if (!(x1 > x0) || !(y1 > y0)) return std::nullopt;
  return BBox(x0, y0, x1 - x0, y1 - y0);
}

/// Intersects `box` with the frame [0,width]x[0,height].
inline BBox clip(const BBox& box, double width, double height) {
  auto r = try_clip(Corners::of(box), width, height);
  if (!r) throw ValidationError("box outside frame");
  return *r;
}

inline BBox full_frame(int width, int height) {
  return BBox(0.0, 0.0, static_cast<double>(width), static_cast<double>(height));
}

}  // namespace ppdnn
