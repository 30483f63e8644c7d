#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ppdnn/core.hpp"

namespace ppdnn {

inline constexpr int kTraceFormatVersion = 1;

struct TraceHeader {
  int format_version = kTraceFormatVersion;
  double fps = 30.0;
  int width = 1280;
  int height = 720;
  std::int64_t frame_count = 0;
  std::string scenario_tag;

  friend bool operator==(const TraceHeader&, const TraceHeader&) = default;
};

struct Trace {
  TraceHeader header;
  std::vector<FrameRecord> frames;
};

/// Capture time of frame `seq` on the integer-microsecond grid.
inline std::int64_t frame_time_us(std::int64_t seq, double fps) {
  return std::llround(static_cast<double>(seq) * 1e6 / fps);
}

namespace detail {

inline constexpr std::string_view kB64 = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

inline std::string base64_encode(std::span<const std::uint8_t> in) {
  std::string out;
  out.reserve((in.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < in.size(); i += 3) {
    const std::uint32_t v = (in[i] << 16) | (in[i + 1] << 8) | in[i + 2];
    out += kB64[(v >> 18) & 63];
    out += kB64[(v >> 12) & 63];
    out += kB64[(v >> 6) & 63];
    out += kB64[v & 63];
  }
  if (i < in.size()) {
    std::uint32_t v = in[i] << 16;
    if (i + 1 < in.size()) v |= in[i + 1] << 8;
    out += kB64[(v >> 18) & 63];
    out += kB64[(v >> 12) & 63];
    out += i + 1 < in.size() ? kB64[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

inline std::vector<std::uint8_t> base64_decode(std::string_view in) {
  if (in.size() % 4 != 0) throw ValidationError("base64: length not a multiple of 4");
  auto val = [](char c) -> int {
    const auto p = kB64.find(c);
    if (p == std::string_view::npos) throw ValidationError("base64: invalid character");
    return static_cast<int>(p);
  };
  std::vector<std::uint8_t> out;
  out.reserve(in.size() / 4 * 3);
  for (std::size_t i = 0; i < in.size(); i += 4) {
    const int a = val(in[i]), b = val(in[i + 1]);
    const bool pad2 = in[i + 2] == '=', pad3 = in[i + 3] == '=';
    if ((pad2 || pad3) && i + 4 != in.size()) throw ValidationError("base64: padding inside data");
    const int c = pad2 ? 0 : val(in[i + 2]);
    const int d = pad3 ? 0 : val(in[i + 3]);
    const std::uint32_t v = (a << 18) | (b << 12) | (c << 6) | d;
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    if (!pad2) out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
    if (!pad3) out.push_back(static_cast<std::uint8_t>(v & 0xff));
  }
  return out;
}

}  // namespace detail

// JSON encodings shared by the trace and report formats.
inline nlohmann::ordered_json box_to_json(const BBox& b) { return nlohmann::ordered_json::array({b.x(), b.y(), b.w(), b.h()}); }

inline BBox box_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 4) throw ValidationError("box must be [x, y, w, h]");
  return BBox(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>());
}

inline nlohmann::ordered_json detection_to_json(const Detection& d) {
  return {{"cls", to_string(d.class_id)}, {"score", d.score}, {"box", box_to_json(d.box)}};
}

inline Detection detection_from_json(const nlohmann::json& j) {
  return make_detection(class_from_string(j.at("cls").get<std::string>()), box_from_json(j.at("box")),
                        j.at("score").get<double>());
}

inline std::string header_line(const TraceHeader& h) {
  nlohmann::ordered_json j = {{"format", "pptrace"},
                              {"format_version", h.format_version},
                              {"fps", h.fps},
                              {"width", h.width},
                              {"height", h.height},
                              {"frame_count", h.frame_count},
                              {"scenario_tag", h.scenario_tag}};
  return j.dump();
}

inline std::string frame_line(const FrameRecord& f) {
  nlohmann::ordered_json truths = nlohmann::ordered_json::array();
  for (const Detection& d : f.truths) truths.push_back(detection_to_json(d));
  nlohmann::ordered_json segs = nlohmann::ordered_json::array();
  for (const SegBox& s : f.seg_boxes) segs.push_back({{"cls", to_string(s.class_id)}, {"box", box_to_json(s.box)}});
  nlohmann::ordered_json j = {{"seq", f.seq},
                              {"t_us", f.timestamp_us},
                              {"thumb", detail::base64_encode(f.thumbnail)},
                              {"truths", std::move(truths)},
                              {"seg", std::move(segs)}};
  return j.dump();
}

inline void write_trace(std::ostream& os, const Trace& t) {
  TraceHeader h = t.header;
  h.frame_count = static_cast<std::int64_t>(t.frames.size());
  os << header_line(h) << '\n';
  for (const FrameRecord& f : t.frames) os << frame_line(f) << '\n';
}

inline std::string trace_to_string(const Trace& t) {
  std::ostringstream os;
  write_trace(os, t);
  return os.str();
}

inline void write_trace_file(const std::string& path, const Trace& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot open '" + path + "' for writing");
  write_trace(os, t);
  if (!os) throw ValidationError("failed writing '" + path + "'");
}

/// Single-pass reader for the line-delimited trace format. Records are
/// validated as they are read; errors carry the 1-based line number.
class TraceReader {
 public:
  explicit TraceReader(std::istream& is) : is_(is) {
    std::string line;
    if (!std::getline(is_, line)) throw ValidationError("trace:1: missing header");
    line_no_ = 1;
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.value("format", std::string()) != "pptrace") fail("not a pptrace header");
      header_.format_version = j.at("format_version").get<int>();
      if (header_.format_version != kTraceFormatVersion)
        fail("unsupported format_version " + std::to_string(header_.format_version));
      header_.fps = j.at("fps").get<double>();
      header_.width = j.at("width").get<int>();
      header_.height = j.at("height").get<int>();
      header_.frame_count = j.at("frame_count").get<std::int64_t>();
      header_.scenario_tag = j.value("scenario_tag", std::string());
    } catch (const nlohmann::json::exception& e) {
      fail(std::string("malformed header: ") + e.what());
    }
    if (!(header_.fps > 0.0)) fail("fps must be positive");
    if (header_.width < 1 || header_.height < 1) fail("frame size must be positive");
    if (header_.frame_count < 0) fail("negative frame_count");
  }

  const TraceHeader& header() const { return header_; }

  std::optional<FrameRecord> next() {
    std::string line;
    if (!std::getline(is_, line)) {
      if (read_ != header_.frame_count)
        throw ValidationError("trace:" + std::to_string(line_no_ + 1) + ": truncated, expected " +
                              std::to_string(header_.frame_count) + " frames, got " + std::to_string(read_));
      return std::nullopt;
    }
    ++line_no_;
    if (is_.eof()) fail("truncated record (missing newline)");
    if (read_ >= header_.frame_count) fail("more frames than frame_count");
    FrameRecord f;
    try {
      const auto j = nlohmann::json::parse(line);
      f.seq = j.at("seq").get<std::int64_t>();
      f.timestamp_us = j.at("t_us").get<std::int64_t>();
      f.width = header_.width;
      f.height = header_.height;
      const auto bytes = detail::base64_decode(j.at("thumb").get<std::string>());
      if (bytes.size() != static_cast<std::size_t>(kThumbPixels)) fail("thumbnail must be 625 bytes");
      std::copy(bytes.begin(), bytes.end(), f.thumbnail.begin());
      for (const auto& d : j.at("truths")) f.truths.push_back(detection_from_json(d));
      for (const auto& s : j.at("seg"))
        f.seg_boxes.push_back(SegBox{class_from_string(s.at("cls").get<std::string>()), box_from_json(s.at("box"))});
    } catch (const nlohmann::json::exception& e) {
      fail(std::string("malformed record: ") + e.what());
    } catch (const ValidationError& e) {
      if (std::string_view(e.what()).starts_with("trace:")) throw;
      fail(e.what());
    }
    if (f.seq < 0) fail("negative seq");
    if (prev_ && f.seq <= prev_->first) fail("seq not strictly increasing");
    if (prev_ && f.timestamp_us <= prev_->second) fail("timestamp not strictly increasing");
    prev_ = {f.seq, f.timestamp_us};
    ++read_;
    return f;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ValidationError("trace:" + std::to_string(line_no_) + ": " + msg);
  }

  std::istream& is_;
  TraceHeader header_;
  std::size_t line_no_ = 0;
  std::int64_t read_ = 0;
  std::optional<std::pair<std::int64_t, std::int64_t>> prev_;
};

inline Trace read_trace(std::istream& is) {
  TraceReader r(is);
  Trace t;
  t.header = r.header();
  while (auto f = r.next()) t.frames.push_back(std::move(*f));
  return t;
}

inline Trace read_trace_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open trace '" + path + "'");
  return read_trace(is);
}

inline Trace read_trace_string(const std::string& text) {
  std::istringstream is(text);
  return read_trace(is);
}

/// FNV-1a 64-bit over a byte string.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 15];
  return s;
}

// ---------------------------------------------------------------------------
// Synthetic scenarios

struct ObjectScript {
  ClassId class_id = ClassId::vehicle;
  double spawn_s = 0.0;
  double despawn_s = 1e9;
  double x = 0, y = 0, w = 10, h = 10;       // box at spawn time, pixels
  double vx = 0, vy = 0, vw = 0, vh = 0;     // pixels per second
  double jitter_px = 0.0;
  double score = 0.9;
};

// Horizontal camera pan (steering) over a time window, pixels per second.
struct PanSegment {
  double start_s = 0.0;
  double end_s = 0.0;
  double px_per_s = 0.0;
};

enum class EventKind : std::uint8_t { pedestrian_crossing, cut_in };

struct ScenarioEvent {
  EventKind kind = EventKind::pedestrian_crossing;
  double at_s = 0.0;
  int count = 1;
};

struct ScenarioScript {
  std::string name = "custom";
  double duration_s = 10.0;
  double fps = 30.0;
  int width = 1280;
  int height = 720;
  std::vector<ObjectScript> objects;
  std::vector<PanSegment> pans;
  std::vector<ScenarioEvent> events;

  void validate() const {
    if (!(duration_s >= 0.0)) throw ValidationError("scenario: duration must be >= 0");
    if (!(fps > 0.0)) throw ValidationError("scenario: fps must be positive");
    if (width < 25 || height < 25) throw ValidationError("scenario: frame must be at least 25x25");
    for (const ObjectScript& o : objects)
      if (!(o.w > 0 && o.h > 0)) throw ValidationError("scenario: object size must be positive");
  }
};

inline std::string_view to_string(EventKind k) {
  return k == EventKind::pedestrian_crossing ? "pedestrian_crossing" : "cut_in";
}

inline ScenarioScript scenario_from_json(const nlohmann::json& j) {
  ScenarioScript s;
  s.name = j.value("name", s.name);
  s.duration_s = j.value("duration_s", s.duration_s);
  s.fps = j.value("fps", s.fps);
  s.width = j.value("width", s.width);
  s.height = j.value("height", s.height);
  for (const auto& o : j.value("objects", nlohmann::json::array())) {
    ObjectScript os;
    os.class_id = class_from_string(o.at("cls").get<std::string>());
    os.spawn_s = o.value("spawn_s", 0.0);
    os.despawn_s = o.value("despawn_s", 1e9);
    const auto box = o.at("box");
    os.x = box.at(0).get<double>();
    os.y = box.at(1).get<double>();
    os.w = box.at(2).get<double>();
    os.h = box.at(3).get<double>();
    const auto vel = o.value("velocity", nlohmann::json::array({0, 0, 0, 0}));
    os.vx = vel.at(0).get<double>();
    os.vy = vel.at(1).get<double>();
    os.vw = vel.at(2).get<double>();
    os.vh = vel.at(3).get<double>();
    os.jitter_px = o.value("jitter_px", 0.0);
    os.score = o.value("score", 0.9);
    s.objects.push_back(os);
  }
  for (const auto& p : j.value("pans", nlohmann::json::array()))
    s.pans.push_back(PanSegment{p.at("start_s").get<double>(), p.at("end_s").get<double>(),
                                p.at("px_per_s").get<double>()});
  for (const auto& e : j.value("events", nlohmann::json::array())) {
    const auto kind = e.at("kind").get<std::string>();
    ScenarioEvent ev;
    if (kind == "pedestrian_crossing") ev.kind = EventKind::pedestrian_crossing;
    else if (kind == "cut_in") ev.kind = EventKind::cut_in;
    else throw ValidationError("scenario: unknown event kind '" + kind + "'");
    ev.at_s = e.at("at_s").get<double>();
    ev.count = e.value("count", 1);
    s.events.push_back(ev);
  }
  s.validate();
  return s;
}

namespace detail {

// Fixed lattice value noise used as the thumbnail background texture.
class ValueNoise {
 public:
  explicit ValueNoise(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double& v : lattice_) v = u(rng);
  }

  // u, v in lattice units; wraps every kSize cells.
  double at(double u, double v) const {
    const double fu = std::floor(u), fv = std::floor(v);
    const int iu = static_cast<int>(fu), iv = static_cast<int>(fv);
    const double su = smooth(u - fu), sv = smooth(v - fv);
    const double a = cell(iu, iv), b = cell(iu + 1, iv), c = cell(iu, iv + 1), d = cell(iu + 1, iv + 1);
    return (a * (1 - su) + b * su) * (1 - sv) + (c * (1 - su) + d * su) * sv;
  }

 private:
  static constexpr int kSize = 64;
  static double smooth(double t) { return t * t * (3 - 2 * t); }
  double cell(int u, int v) const {
    const int uu = ((u % kSize) + kSize) % kSize, vv = ((v % kSize) + kSize) % kSize;
    return lattice_[static_cast<std::size_t>(vv * kSize + uu)];
  }
  std::array<double, kSize * kSize> lattice_{};
};

inline double class_intensity(ClassId c) {
  switch (c) {
    case ClassId::vehicle: return 225.0;
    case ClassId::pedestrian: return 20.0;
    case ClassId::bicycle: return 190.0;
    case ClassId::traffic_sign: return 250.0;
    case ClassId::traffic_light: return 5.0;
    case ClassId::other: return 128.0;
  }
  return 128.0;
}

inline double pan_offset(const ScenarioScript& s, double t) {
  double off = 0.0;
  for (const PanSegment& p : s.pans) {
    const double a = std::min(t, p.end_s) - p.start_s;
    if (a > 0) off += a * p.px_per_s;
  }
  return off;
}

inline std::vector<ObjectScript> expand_events(const ScenarioScript& s) {
  std::vector<ObjectScript> out = s.objects;
  const double W = s.width, H = s.height;
  for (const ScenarioEvent& e : s.events) {
    for (int k = 0; k < e.count; ++k) {
      ObjectScript o;
      if (e.kind == EventKind::pedestrian_crossing) {
        o.class_id = ClassId::pedestrian;
        o.spawn_s = e.at_s;
        o.despawn_s = e.at_s + 8.0;
        o.w = 28;
        o.h = 70;
        o.x = 0.62 * W + 34.0 * k;
        o.y = 0.50 * H + 6.0 * (k % 2);
        o.vx = -55.0 - 4.0 * k;
        o.jitter_px = 0.5;
        o.score = 0.88;
      } else {
        o.class_id = ClassId::vehicle;
        o.spawn_s = e.at_s;
        o.despawn_s = e.at_s + 6.0;
        o.w = 160;
        o.h = 110;
        o.x = 0.05 * W + 10.0 * k;
        o.y = 0.52 * H;
        o.vx = 90.0;
        o.vw = 12.0;
        o.vh = 8.0;
        o.jitter_px = 0.5;
        o.score = 0.93;
      }
      out.push_back(o);
    }
  }
  return out;
}

// Fraction of thumbnail cell (cx, cy) covered by box b (frame pixels).
inline double cell_coverage(const BBox& b, int cx, int cy, double cell_w, double cell_h) {
  const double x0 = cx * cell_w, y0 = cy * cell_h;
  const double iw = std::min(b.right(), x0 + cell_w) - std::max(b.x(), x0);
  const double ih = std::min(b.bottom(), y0 + cell_h) - std::max(b.y(), y0);
  if (iw <= 0 || ih <= 0) return 0.0;
  return (iw * ih) / (cell_w * cell_h);
}

}  // namespace detail

/// Renders a scenario into a deterministic trace. Object positions follow
/// their constant-velocity scripts plus seeded jitter and are rounded to
/// whole pixels; thumbnails rasterize object silhouettes over a panning
/// value-noise background.
inline Trace generate(const ScenarioScript& script, std::uint64_t seed) {
  script.validate();
  const double W = script.width, H = script.height;
  const auto objects = detail::expand_events(script);
  const detail::ValueNoise noise(seed ^ 0x5eedf00dULL);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  Trace t;
  t.header.fps = script.fps;
  t.header.width = script.width;
  t.header.height = script.height;
  t.header.scenario_tag = script.name;
  const auto n = static_cast<std::int64_t>(std::floor(script.duration_s * script.fps + 1e-9));
  t.frames.reserve(static_cast<std::size_t>(n));

  const double cell_w = W / kThumbSide, cell_h = H / kThumbSide;
  for (std::int64_t seq = 0; seq < n; ++seq) {
    FrameRecord f;
    f.seq = seq;
    f.timestamp_us = frame_time_us(seq, script.fps);
    f.width = script.width;
    f.height = script.height;
    const double ts = static_cast<double>(f.timestamp_us) / 1e6;
    const double pan = detail::pan_offset(script, ts);

    for (const ObjectScript& o : objects) {
      if (ts < o.spawn_s || ts >= o.despawn_s) continue;
      const double dt = ts - o.spawn_s;
      double jx = 0, jy = 0;
      if (o.jitter_px > 0) {
        jx = o.jitter_px * unit(rng);
        jy = o.jitter_px * unit(rng);
      }
      const double parallax = is_stationary_class(o.class_id) ? 1.0 : 0.35;
      const double x = std::round(o.x + o.vx * dt + jx - pan * parallax);
      const double y = std::round(o.y + o.vy * dt + jy);
      const double w = std::max(2.0, std::round(o.w + o.vw * dt));
      const double h = std::max(2.0, std::round(o.h + o.vh * dt));
      const auto box = try_clip(Corners{x, y, x + w, y + h}, W, H);
      if (!box || box->w() < 2 || box->h() < 2) continue;
      f.truths.push_back(Detection{o.class_id, *box, o.score});
      if (is_moving_class(o.class_id)) f.seg_boxes.push_back(SegBox{o.class_id, *box});
    }

    // Drivable area and two lane bands, shifted by steering.
    const double lane_shift = std::round(-0.25 * pan);
    const Corners regions[] = {
        {0.18 * W + lane_shift, 0.62 * H, 0.82 * W + lane_shift, H},
        {0.34 * W + lane_shift, 0.58 * H, 0.40 * W + lane_shift, H},
        {0.60 * W + lane_shift, 0.58 * H, 0.66 * W + lane_shift, H},
    };
    for (const Corners& c : regions) {
      Corners r{std::round(c.x0), std::round(c.y0), std::round(c.x1), std::round(c.y1)};
      if (auto b = try_clip(r, W, H)) f.seg_boxes.push_back(SegBox{ClassId::other, *b});
    }

    for (int cy = 0; cy < kThumbSide; ++cy) {
      for (int cx = 0; cx < kThumbSide; ++cx) {
        const double u = (cx + 0.5) * cell_w + pan;
        const double v = (cy + 0.5) * cell_h;
        double value = 55.0 + 110.0 * (0.65 * noise.at(u / 96.0, v / 96.0) + 0.35 * noise.at(u / 31.0 + 17.0, v / 31.0));
        for (const Detection& d : f.truths) {
          const double cov = detail::cell_coverage(d.box, cx, cy, cell_w, cell_h);
          value = value * (1.0 - cov) + detail::class_intensity(d.class_id) * cov;
        }
        f.thumbnail[static_cast<std::size_t>(cy * kThumbSide + cx)] =
            static_cast<std::uint8_t>(std::clamp(std::lround(value), 0L, 255L));
      }
    }
    t.frames.push_back(std::move(f));
  }
  t.header.frame_count = static_cast<std::int64_t>(t.frames.size());
  return t;
}

// Built-in scenarios -------------------------------------------------------

inline constexpr std::array<std::string_view, 4> kBuiltinScenarios = {"highway", "downtown", "crossing", "signal_stop"};

namespace detail {

inline ObjectScript random_vehicle(std::mt19937_64& rng, double W, double H, double t0, double t1, double speed) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ObjectScript o;
  o.class_id = ClassId::vehicle;
  o.w = 90 + 120 * u(rng);
  o.h = o.w * (0.6 + 0.2 * u(rng));
  o.x = (0.1 + 0.7 * u(rng)) * W;
  o.y = (0.45 + 0.15 * u(rng)) * H;
  o.vx = speed * (u(rng) - 0.5);
  o.vy = 4.0 * (u(rng) - 0.5);
  o.vw = 6.0 * (u(rng) - 0.5);
  o.vh = o.vw * 0.7;
  o.spawn_s = t0;
  o.despawn_s = t1;
  o.jitter_px = 0.6;
  o.score = 0.7 + 0.28 * u(rng);
  return o;
}

inline ObjectScript fixed_object(ClassId c, double x, double y, double w, double h, double score) {
  ObjectScript o;
  o.class_id = c;
  o.x = x;
  o.y = y;
  o.w = w;
  o.h = h;
  o.score = score;
  return o;
}

}  // namespace detail

/// Built-in scenario scripts; the seed varies object placement.
inline ScenarioScript builtin_scenario(std::string_view name, std::uint64_t seed, double fps = 30.0) {
  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + 17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ScenarioScript s;
  s.name = std::string(name);
  s.fps = fps;
  const double W = s.width, H = s.height;
  using detail::fixed_object;
  using detail::random_vehicle;

  if (name == "highway") {
    s.duration_s = 30.0;
    for (int i = 0; i < 5; ++i) s.objects.push_back(random_vehicle(rng, W, H, 0.0, 1e9, 40.0));
    s.objects.push_back(fixed_object(ClassId::traffic_sign, 0.9 * W, 0.2 * H, 40, 40, 0.8));
    s.objects.back().vx = -25.0;
    s.events.push_back({EventKind::cut_in, 12.0, 1});
    s.pans.push_back({20.0, 22.0, 60.0});
  } else if (name == "downtown") {
    s.duration_s = 75.0;
    for (int i = 0; i < 14; ++i) {
      const double t0 = 70.0 * u(rng);
      s.objects.push_back(random_vehicle(rng, W, H, i < 5 ? 0.0 : t0, i < 5 ? 1e9 : t0 + 10.0 + 20.0 * u(rng), 120.0));
    }
    for (int i = 0; i < 6; ++i) {
      ObjectScript p;
      p.class_id = i % 3 == 2 ? ClassId::bicycle : ClassId::pedestrian;
      p.spawn_s = 70.0 * u(rng);
      p.despawn_s = p.spawn_s + 6.0 + 8.0 * u(rng);
      p.w = 26 + 10 * u(rng);
      p.h = 2.4 * p.w;
      p.x = (0.05 + 0.9 * u(rng)) * W;
      p.y = (0.48 + 0.1 * u(rng)) * H;
      p.vx = 60.0 * (u(rng) - 0.5);
      p.jitter_px = 0.8;
      p.score = 0.65 + 0.3 * u(rng);
      s.objects.push_back(p);
    }
    s.objects.push_back(fixed_object(ClassId::traffic_light, 0.55 * W, 0.08 * H, 24, 60, 0.85));
    s.objects.push_back(fixed_object(ClassId::traffic_sign, 0.85 * W, 0.25 * H, 44, 44, 0.8));
    s.objects.push_back(fixed_object(ClassId::other, 0.02 * W, 0.7 * H, 60, 40, 0.3));
    s.events.push_back({EventKind::pedestrian_crossing, 20.0, 5});
    s.events.push_back({EventKind::cut_in, 41.0, 1});
    s.events.push_back({EventKind::pedestrian_crossing, 58.0, 6});
    s.pans.push_back({8.0, 10.5, 140.0});
    s.pans.push_back({33.0, 36.0, -120.0});
    s.pans.push_back({50.0, 51.5, 200.0});
  } else if (name == "crossing") {
    s.duration_s = 20.0;
    for (int i = 0; i < 3; ++i) s.objects.push_back(random_vehicle(rng, W, H, 0.0, 1e9, 20.0));
    s.objects.push_back(fixed_object(ClassId::traffic_light, 0.5 * W, 0.1 * H, 24, 60, 0.85));
    s.events.push_back({EventKind::pedestrian_crossing, 5.0, 5});
  } else if (name == "signal_stop") {
    s.duration_s = 25.0;
    for (int i = 0; i < 4; ++i) {
      auto v = random_vehicle(rng, W, H, 0.0, 1e9, 10.0);
      v.vw = v.vh = 0.0;
      s.objects.push_back(v);
    }
    s.objects.push_back(fixed_object(ClassId::traffic_light, 0.45 * W, 0.08 * H, 24, 60, 0.9));
    s.objects.push_back(fixed_object(ClassId::traffic_light, 0.62 * W, 0.08 * H, 24, 60, 0.9));
    s.objects.push_back(fixed_object(ClassId::traffic_sign, 0.8 * W, 0.22 * H, 44, 44, 0.8));
  } else {
    std::string names;
    for (auto n : kBuiltinScenarios) names += (names.empty() ? "" : ", ") + std::string(n);
    throw ValidationError("unknown scenario '" + std::string(name) + "' (valid: " + names + ")");
  }
  s.validate();
  return s;
}

}  // namespace ppdnn
