#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "ppdnn/core.hpp"

namespace ppdnn {

using Thumbnail = std::array<double, kThumbPixels>;

inline Thumbnail to_thumbnail(const std::array<std::uint8_t, kThumbPixels>& bytes) {
  Thumbnail t{};
  for (int i = 0; i < kThumbPixels; ++i) t[i] = bytes[i];
  return t;
}

struct SsimParams {
  int window = 11;
  int stride = 1;
  double gaussian_sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 255.0;

  double c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
  double c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }

  void validate() const {
    if (window < 1 || window % 2 == 0 || window > kThumbSide)
      throw ValidationError("ssim: window must be odd and at most 25");
    if (stride < 1) throw ValidationError("ssim: stride must be positive");
    if (!(gaussian_sigma > 0.0)) throw ValidationError("ssim: sigma must be positive");
    if (!(c1() > 0.0) || !(c2() > 0.0)) throw ValidationError("ssim: c1 and c2 must be positive");
  }
};

namespace detail {

// Separable Gaussian window, normalised so the 2-D weights sum to 1.
inline std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> g(size);
  const double mid = (size - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    const double d = i - mid;
    g[i] = std::exp(-(d * d) / (2.0 * sigma * sigma));
    sum += g[i];
  }
  for (double& v : g) v /= sum;
  return g;
}

}  // namespace detail

/// Mean structural similarity over every window position of two 25x25
/// thumbnails. Window statistics are Gaussian-weighted.
inline double ssim(std::span<const double> a, std::span<const double> b, const SsimParams& p = {}) {
  if (a.size() != b.size() || a.size() != static_cast<std::size_t>(kThumbPixels))
    throw ValidationError("ssim: thumbnails must both be 25x25");
  p.validate();

  const auto g = detail::gaussian_window(p.window, p.gaussian_sigma);
  const double c1 = p.c1();
  const double c2 = p.c2();
  const int positions = kThumbSide - p.window + 1;

  double total = 0.0;
  int count = 0;
  for (int r0 = 0; r0 < positions; r0 += p.stride) {
    for (int q0 = 0; q0 < positions; q0 += p.stride) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (int i = 0; i < p.window; ++i) {
        for (int j = 0; j < p.window; ++j) {
          const double w = g[i] * g[j];
          const std::size_t k = static_cast<std::size_t>((r0 + i) * kThumbSide + (q0 + j));
          const double x = a[k], y = b[k];
          mx += w * x;
          my += w * y;
          sxx += w * x * x;
          syy += w * y * y;
          sxy += w * x * y;
        }
      }
      const double vx = sxx - mx * mx;
      const double vy = syy - my * my;
      const double cov = sxy - mx * my;
      total += ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  }
  return total / count;
}

inline double ssim(const Thumbnail& a, const Thumbnail& b, const SsimParams& p = {}) {
  return ssim(std::span<const double>(a), std::span<const double>(b), p);
}

/// Row-major grayscale raster of arbitrary size.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;

  double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

namespace detail {

inline double sinc(double x) {
  if (x == 0.0) return 1.0;
  // Exact zeros at the integers keep same-size resampling an identity.
  if (x == std::round(x)) return 0.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

inline double lanczos3(double x) {
  if (x <= -3.0 || x >= 3.0) return 0.0;
  return sinc(x) * sinc(x / 3.0);
}

// 1-D Lanczos-3 resampling of `in_size` samples onto `out_size` samples.
// Returns, per output sample, the (source index, weight) taps with source
// indices clamped to the valid range.
inline std::vector<std::vector<std::pair<int, double>>> lanczos_taps(int in_size, int out_size) {
  const double scale = static_cast<double>(in_size) / out_size;
  const double filter_scale = std::max(scale, 1.0);
  const double support = 3.0 * filter_scale;
  std::vector<std::vector<std::pair<int, double>>> taps(out_size);
  for (int o = 0; o < out_size; ++o) {
    const double center = (o + 0.5) * scale;
    const int lo = static_cast<int>(std::floor(center - support));
    const int hi = static_cast<int>(std::ceil(center + support));
    double sum = 0.0;
    for (int s = lo; s <= hi; ++s) {
      const double w = lanczos3((s + 0.5 - center) / filter_scale);
      if (w == 0.0) continue;
      taps[o].emplace_back(std::clamp(s, 0, in_size - 1), w);
      sum += w;
    }
    for (auto& [_, w] : taps[o]) w /= sum;
  }
  return taps;
}

}  // namespace detail

/// Downsamples a grayscale image to 25x25 with separable Lanczos-3
/// filtering; values are clamped to [0, 255].
inline Thumbnail make_thumbnail(const GrayImage& img) {
  if (img.width < 1 || img.height < 1 || img.pixels.size() != static_cast<std::size_t>(img.width) * img.height)
    throw ValidationError("make_thumbnail: empty or malformed image");

  const auto xt = detail::lanczos_taps(img.width, kThumbSide);
  const auto yt = detail::lanczos_taps(img.height, kThumbSide);

  // Horizontal pass: height x 25.
  std::vector<double> tmp(static_cast<std::size_t>(img.height) * kThumbSide);
  for (int y = 0; y < img.height; ++y)
    for (int ox = 0; ox < kThumbSide; ++ox) {
      double v = 0.0;
      for (auto [sx, w] : xt[ox]) v += w * img.at(sx, y);
      tmp[static_cast<std::size_t>(y) * kThumbSide + ox] = v;
    }

  Thumbnail out{};
  for (int oy = 0; oy < kThumbSide; ++oy)
    for (int ox = 0; ox < kThumbSide; ++ox) {
      double v = 0.0;
      for (auto [sy, w] : yt[oy]) v += w * tmp[static_cast<std::size_t>(sy) * kThumbSide + ox];
      out[oy * kThumbSide + ox] = std::clamp(v, 0.0, 255.0);
    }
  return out;
}

}  // namespace ppdnn
