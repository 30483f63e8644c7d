#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ppdnn/sim.hpp"

namespace ppdnn {

// Ordered (key, value) pairs from a `section.key = value` file.
using Settings = std::vector<std::pair<std::string, std::string>>;

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace detail

inline Settings parse_settings(std::istream& is, const std::string& source) {
  Settings out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ValidationError(source + ":" + std::to_string(n) + ": expected key = value");
    std::string key = detail::trim(std::string_view(t).substr(0, eq));
    if (key.empty()) throw ValidationError(source + ":" + std::to_string(n) + ": empty key");
    out.emplace_back(std::move(key), detail::trim(std::string_view(t).substr(eq + 1)));
  }
  return out;
}

inline Settings parse_settings_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open config '" + path + "'");
  return parse_settings(is, path);
}

/// Parses "key=value" as given on the command line.
inline std::pair<std::string, std::string> parse_assignment(std::string_view s) {
  const auto eq = s.find('=');
  if (eq == std::string_view::npos) throw ValidationError("expected key=value, got '" + std::string(s) + "'");
  std::string key = detail::trim(s.substr(0, eq));
  if (key.empty()) throw ValidationError("empty key in '" + std::string(s) + "'");
  return {std::move(key), detail::trim(s.substr(eq + 1))};
}

namespace detail {

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ValidationError(key + ": expected a number, got '" + v + "'");
}

inline std::int64_t parse_int(const std::string& key, const std::string& v) {
  std::int64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ValidationError(key + ": expected an integer, got '" + v + "'");
  return out;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ValidationError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ValidationError(key + ": expected true or false, got '" + v + "'");
}

}  // namespace detail

/// Applies one setting; unknown keys and bad values throw naming the key.
inline void apply_setting(SimConfig& c, const std::string& key, const std::string& v) {
  using namespace detail;
  auto num = [&] { return parse_double(key, v); };
  auto integer = [&] { return parse_int(key, v); };
  auto flag = [&] { return parse_bool(key, v); };
  auto size = [&] {
    const auto i = parse_int(key, v);
    if (i < 0) throw ValidationError(key + ": must be >= 0");
    return static_cast<std::size_t>(i);
  };

  // Keys with a task suffix, e.g. latency.base_ms.segmentation.
  if (const auto dot = key.rfind('.'); dot != std::string::npos) {
    const std::string head = key.substr(0, dot), tail = key.substr(dot + 1);
    const bool per_task = head == "latency.target_ms" || head == "latency.base_ms" || head == "latency.ms_per_gmac" ||
                          head == "executors.assign";
    if (per_task) {
      TaskId t;
      try {
        t = task_from_string(tail);
      } catch (const ValidationError&) {
        throw ValidationError(key + ": unknown task '" + tail + "'");
      }
      const auto i = index_of(t);
      if (head == "latency.target_ms") c.latency_targets_ms[i] = num();
      else if (head == "latency.base_ms") c.latency.base_ms[i] = num();
      else if (head == "latency.ms_per_gmac") c.latency.ms_per_gmac[i] = num();
      else c.executors.assignment[i] = static_cast<int>(integer());
      return;
    }
  }

  auto narrow = [&] { return static_cast<int>(integer()); };

  if (key == "mode") c.mode = mode_from_string(v);
  else if (key == "seed") c.seed = parse_uint(key, v);
  else if (key == "keyframe.ssim_threshold") c.keyframe.ssim_threshold = num();
  else if (key == "keyframe.miss_threshold") c.keyframe.miss_threshold = narrow();
  else if (key == "keyframe.tracked_iou_threshold") c.keyframe.tracked_iou_threshold = num();
  else if (key == "keyframe.interval_deadline_ms") c.keyframe.interval_deadline_ms = num();
  else if (key == "keyframe.pedestrian_ratio_threshold") c.keyframe.pedestrian_ratio_threshold = num();
  else if (key == "keyframe.stationary_ratio_epsilon") c.keyframe.stationary_ratio_epsilon = num();
  else if (key == "keyframe.use_mean_iou") c.keyframe.use_mean_iou = flag();
  else if (key == "keyframe.roi_margin_px") c.keyframe.roi_margin_px = num();
  else if (key == "keyframe.literal_one_roi") c.keyframe.literal_one_roi = flag();
  else if (key == "ssim.window") c.keyframe.ssim.window = narrow();
  else if (key == "ssim.stride") c.keyframe.ssim.stride = narrow();
  else if (key == "ssim.sigma") c.keyframe.ssim.gaussian_sigma = num();
  else if (key == "ssim.k1") c.keyframe.ssim.k1 = num();
  else if (key == "ssim.k2") c.keyframe.ssim.k2 = num();
  else if (key == "tracker.match_threshold") c.tracker.match_threshold = num();
  else if (key == "tracker.max_misses") c.tracker.max_misses = narrow();
  else if (key == "tracker.velocity_smoothing") c.tracker.velocity_smoothing = num();
  else if (key == "flops.a0") c.flops.a0 = num();
  else if (key == "flops.a1") c.flops.a1 = num();
  else if (key == "flops.a2") c.flops.a2 = num();
  else if (key == "flops.s_min") c.flops.s_min = integer();
  else if (key == "flops.s_max") c.flops.s_max = integer();
  else if (key == "flops.s_d") c.flops.s_d = integer();
  else if (key == "dispatch.deadline_ms") c.deadline_ms = num();
  else if (key == "dispatch.route_all_missed") c.dispatch.route_all_missed = flag();
  else if (key == "predictor.predicted_score") c.predictor.predicted_score = num();
  else if (key == "predictor.replace_in_middle_band") c.predictor.replace_in_middle_band = flag();
  else if (key == "predictor.cache_capacity") c.cache_capacity = size();
  else if (key == "fusion.queue_size") c.fusion.queue_size = size();
  else if (key == "fusion.slop_ms") c.fusion.slop_us = std::llround(num() * 1000.0);
  else if (key == "latency.calibrate") c.calibrate_latency = flag();
  else if (key == "latency.base_fraction") c.latency_base_fraction = num();
  else if (key == "latency.noise_stddev_ms") c.latency.noise_stddev_ms = num();
  else if (key == "latency.seed") c.latency.seed = parse_uint(key, v);
  else if (key == "executors.count") c.executors.executor_count = narrow();
  else if (key == "executors.preset") {
    if (v == "per_task") c.executors = ExecutorConfig::per_task();
    else if (v == "shared") c.executors = ExecutorConfig::shared();
    else throw ValidationError(key + ": expected per_task or shared, got '" + v + "'");
  }
  else if (key == "queue.baseline_depth") c.baseline_queue_depth = size();
  else if (key == "queue.dispatch_depth") c.dispatch_queue_depth = size();
  else if (key == "detector.dropout_rate") c.inference_detector.dropout_rate = num();
  else if (key == "detector.jitter_px") c.inference_detector.jitter_px = num();
  else if (key == "light_detector.dropout_rate") c.light_detector.dropout_rate = num();
  else if (key == "light_detector.jitter_px") c.light_detector.jitter_px = num();
  else if (key == "sim.drain_ms") c.drain_ms = num();
  else if (key == "control.tracker_ms") c.control.tracker_ms = num();
  else if (key == "control.roi_generator_ms") c.control.roi_generator_ms = num();
  else throw ValidationError("unknown config key '" + key + "'");
}

inline void apply_settings(SimConfig& c, const Settings& s) {
  for (const auto& [k, v] : s) apply_setting(c, k, v);
}

}  // namespace ppdnn
