#pragma once

#include <string_view>
#include <vector>

#include "ppdnn/core.hpp"

namespace ppdnn {

enum class RoiMode : std::uint8_t { one_roi, multi_roi, full_frame };

inline std::string_view to_string(RoiMode m) {
  switch (m) {
    case RoiMode::one_roi: return "one_roi";
    case RoiMode::multi_roi: return "multi_roi";
    case RoiMode::full_frame: return "full_frame";
  }
  return "full_frame";
}

/// Crop decision for one task: a single box (one_roi, full_frame) or a
/// batch of boxes (multi_roi).
struct RoiSet {
  RoiMode mode = RoiMode::full_frame;
  std::vector<BBox> boxes;

  static RoiSet full(int width, int height) { return {RoiMode::full_frame, {full_frame(width, height)}}; }
  static RoiSet one(const BBox& b) { return {RoiMode::one_roi, {b}}; }
  static RoiSet multi(std::vector<BBox> bs) { return {RoiMode::multi_roi, std::move(bs)}; }

  bool within(int width, int height) const {
    const BBox frame = full_frame(width, height);
    for (const BBox& b : boxes)
      if (!frame.contains(b)) return false;
    return !boxes.empty();
  }

  friend bool operator==(const RoiSet&, const RoiSet&) = default;
};

}  // namespace ppdnn
