// Copyright 2026 the mmjepa authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "mmjepa/core/random.hpp"
#include "mmjepa/data/image.hpp"
#include "mmjepa/data/scene.hpp"

namespace mmjepa {

struct CropSpec {
  double scale_lo = 0.4;
  double scale_hi = 1.0;
  int64_t out_size = 64;

  void validate() const {
    require(scale_lo > 0.0 && scale_lo < scale_hi && scale_hi <= 1.0,
            "crop scale range must satisfy 0 < lo < hi <= 1");
    require(out_size >= 1, "crop output size must be >= 1");
  }
};

enum class ResizeMode { bilinear, nearest };

struct ViewConfig {
  int64_t v_global = 2;
  int64_t v_local = 4;
  CropSpec global{0.4, 1.0, 64};
  CropSpec local{0.05, 0.4, 32};
  bool photometric = true;
  ResizeMode resize = ResizeMode::bilinear;
  CompanionKind companion = CompanionKind::depth;

  // DINO-style strengths; declared defaults, applied to RGB only.
  double jitter_prob = 0.8;
  double brightness = 0.4;
  double contrast = 0.4;
  double saturation = 0.2;
  double hue = 0.1;
  double grayscale_prob = 0.2;
  double solarize_prob = 0.2;
  double solarize_threshold = 0.5;
  double blur_sigma_lo = 0.1;
  double blur_sigma_hi = 2.0;

  void validate() const {
    require(v_global >= 1, "need at least one global view");
    require(v_local >= 0, "local view count must be >= 0");
    global.validate();
    local.validate();
  }
};

// Spatial parameters sampled once per paired view and applied to both
// streams: a square crop rectangle and a horizontal-flip bit.
struct ViewSpec {
  int64_t x = 0;
  int64_t y = 0;
  int64_t side = 0;
  bool flip = false;
};

struct PairedView {
  Image rgb;  // out x out x 3
  Image mod;  // out x out x 1
  ViewSpec spec;
  bool global = true;
};

struct ViewSet {
  std::vector<PairedView> views;
  int64_t v_global = 0;
  int64_t v_local = 0;
};

namespace detail {

// Nearest source index for output j of o samples over s source pixels.
// Ties at exact pixel boundaries resolve toward the image center, which
// makes nearest resize commute exactly with horizontal flips for even o.
inline int64_t nearest_src(int64_t j, int64_t o, int64_t s) {
  const double pos = (static_cast<double>(j) + 0.5) * static_cast<double>(s) /
                     static_cast<double>(o);
  const double floor_pos = std::floor(pos);
  int64_t src;
  if (pos == floor_pos) {
    src = (j * 2 < o) ? static_cast<int64_t>(pos) : static_cast<int64_t>(pos) - 1;
  } else {
    src = static_cast<int64_t>(floor_pos);
  }
  return std::min(std::max<int64_t>(0, src), s - 1);
}

inline Image resize_nearest(const Image& src, int64_t out) {
  Image dst(out, out, src.channels);
  for (int64_t y = 0; y < out; ++y) {
    const int64_t sy = nearest_src(y, out, src.height);
    for (int64_t x = 0; x < out; ++x) {
      const int64_t sx = nearest_src(x, out, src.width);
      for (int64_t c = 0; c < src.channels; ++c) dst.at(y, x, c) = src.at(sy, sx, c);
    }
  }
  return dst;
}

inline Image resize_bilinear(const Image& src, int64_t out) {
  Image dst(out, out, src.channels);
  const double sy_scale = static_cast<double>(src.height) / static_cast<double>(out);
  const double sx_scale = static_cast<double>(src.width) / static_cast<double>(out);
  for (int64_t y = 0; y < out; ++y) {
    const double fy = (static_cast<double>(y) + 0.5) * sy_scale - 0.5;
    const int64_t y0 = std::min(std::max<int64_t>(0, static_cast<int64_t>(std::floor(fy))),
                                src.height - 1);
    const int64_t y1 = std::min(y0 + 1, src.height - 1);
    const double wy = std::min(1.0, std::max(0.0, fy - static_cast<double>(y0)));
    for (int64_t x = 0; x < out; ++x) {
      const double fx = (static_cast<double>(x) + 0.5) * sx_scale - 0.5;
      const int64_t x0 = std::min(std::max<int64_t>(0, static_cast<int64_t>(std::floor(fx))),
                                  src.width - 1);
      const int64_t x1 = std::min(x0 + 1, src.width - 1);
      const double wx = std::min(1.0, std::max(0.0, fx - static_cast<double>(x0)));
      for (int64_t c = 0; c < src.channels; ++c) {
        const double top = (1.0 - wx) * src.at(y0, x0, c) + wx * src.at(y0, x1, c);
        const double bot = (1.0 - wx) * src.at(y1, x0, c) + wx * src.at(y1, x1, c);
        dst.at(y, x, c) = static_cast<float>((1.0 - wy) * top + wy * bot);
      }
    }
  }
  return dst;
}

inline Image crop_image(const Image& src, int64_t x0, int64_t y0, int64_t side) {
  Image dst(side, side, src.channels);
  for (int64_t y = 0; y < side; ++y)
    for (int64_t x = 0; x < side; ++x)
      for (int64_t c = 0; c < src.channels; ++c) dst.at(y, x, c) = src.at(y0 + y, x0 + x, c);
  return dst;
}

inline void hflip_inplace(Image& img) {
  for (int64_t y = 0; y < img.height; ++y)
    for (int64_t x = 0; x < img.width / 2; ++x)
      for (int64_t c = 0; c < img.channels; ++c)
        std::swap(img.at(y, x, c), img.at(y, img.width - 1 - x, c));
}

}  // namespace detail

inline Image hflip(const Image& img) {
  Image out = img;
  detail::hflip_inplace(out);
  return out;
}

// Area pooling of a single-channel depth window that ignores zero
// (no-return) pixels; an all-zero cell stays zero. Upsampling cells cover at
// least one source pixel.
inline Image pool_depth(const Image& window, int64_t out_size) {
  require(window.channels == 1, "pool_depth expects a single-channel window");
  require(out_size >= 1, "pool_depth needs out_size >= 1");
  Image dst(out_size, out_size, 1);
  const int64_t s = window.height;
  for (int64_t y = 0; y < out_size; ++y) {
    int64_t y_lo = y * s / out_size;
    int64_t y_hi = std::max(y_lo + 1, (y + 1) * s / out_size);
    for (int64_t x = 0; x < out_size; ++x) {
      int64_t x_lo = x * s / out_size;
      int64_t x_hi = std::max(x_lo + 1, (x + 1) * s / out_size);
      double acc = 0.0;
      int64_t hits = 0;
      for (int64_t yy = y_lo; yy < y_hi; ++yy)
        for (int64_t xx = x_lo; xx < x_hi; ++xx) {
          const float v = window.at(yy, xx, 0);
          if (v != 0.0f) {
            acc += v;
            ++hits;
          }
        }
      dst.at(y, x, 0) = hits ? static_cast<float>(acc / static_cast<double>(hits)) : 0.0f;
    }
  }
  return dst;
}

// Geometric part of a paired view: one crop rectangle and one flip bit
// applied to both streams. RGB is resized per the configured mode; the
// companion stream is pooled (zero-ignoring) or nearest-resized, never
// photometrically transformed.
inline PairedView render_view(const SceneSample& sample, const Image& companion,
                              const ViewSpec& spec, int64_t out_size, ResizeMode mode) {
  require(spec.side >= 1 && spec.x >= 0 && spec.y >= 0 && spec.x + spec.side <= sample.size &&
              spec.y + spec.side <= sample.size,
          "view crop rectangle out of bounds");
  PairedView view;
  view.spec = spec;
  Image rgb_crop = detail::crop_image(sample.rgb, spec.x, spec.y, spec.side);
  Image mod_crop = detail::crop_image(companion, spec.x, spec.y, spec.side);
  view.rgb = mode == ResizeMode::bilinear ? detail::resize_bilinear(rgb_crop, out_size)
                                          : detail::resize_nearest(rgb_crop, out_size);
  view.mod = mode == ResizeMode::bilinear ? pool_depth(mod_crop, out_size)
                                          : detail::resize_nearest(mod_crop, out_size);
  if (spec.flip) {
    detail::hflip_inplace(view.rgb);
    detail::hflip_inplace(view.mod);
  }
  return view;
}

namespace detail {

inline float clamp01(double v) { return static_cast<float>(std::min(1.0, std::max(0.0, v))); }

inline void rgb_to_hsv(float r, float g, float b, float& h, float& s, float& v) {
  const float mx = std::max({r, g, b});
  const float mn = std::min({r, g, b});
  v = mx;
  const float d = mx - mn;
  s = mx == 0.0f ? 0.0f : d / mx;
  if (d == 0.0f) {
    h = 0.0f;
    return;
  }
  if (mx == r)
    h = (g - b) / d + (g < b ? 6.0f : 0.0f);
  else if (mx == g)
    h = (b - r) / d + 2.0f;
  else
    h = (r - g) / d + 4.0f;
  h /= 6.0f;
}

inline void hsv_to_rgb(float h, float s, float v, float& r, float& g, float& b) {
  if (s == 0.0f) {
    r = g = b = v;
    return;
  }
  h = h - std::floor(h);
  const float hh = h * 6.0f;
  const int i = static_cast<int>(hh) % 6;
  const float f = hh - std::floor(hh);
  const float p = v * (1.0f - s);
  const float q = v * (1.0f - s * f);
  const float t = v * (1.0f - s * (1.0f - f));
  switch (i) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

inline float luma(float r, float g, float b) {
  return 0.299f * r + 0.587f * g + 0.114f * b;
}

inline void color_jitter(Image& img, std::mt19937_64& rng, const ViewConfig& cfg) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double fb = 1.0 + cfg.brightness * (2.0 * unit(rng) - 1.0);
  const double fc = 1.0 + cfg.contrast * (2.0 * unit(rng) - 1.0);
  const double fs = 1.0 + cfg.saturation * (2.0 * unit(rng) - 1.0);
  const double fh = cfg.hue * (2.0 * unit(rng) - 1.0);

  double mean_luma = 0.0;
  for (int64_t y = 0; y < img.height; ++y)
    for (int64_t x = 0; x < img.width; ++x)
      mean_luma += luma(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2));
  mean_luma /= static_cast<double>(img.height * img.width);

  for (int64_t y = 0; y < img.height; ++y) {
    for (int64_t x = 0; x < img.width; ++x) {
      float r = img.at(y, x, 0), g = img.at(y, x, 1), b = img.at(y, x, 2);
      r = clamp01(r * fb);
      g = clamp01(g * fb);
      b = clamp01(b * fb);
      r = clamp01((r - mean_luma) * fc + mean_luma);
      g = clamp01((g - mean_luma) * fc + mean_luma);
      b = clamp01((b - mean_luma) * fc + mean_luma);
      const float gray = luma(r, g, b);
      r = clamp01(gray + (r - gray) * fs);
      g = clamp01(gray + (g - gray) * fs);
      b = clamp01(gray + (b - gray) * fs);
      float h, s, v;
      rgb_to_hsv(r, g, b, h, s, v);
      hsv_to_rgb(h + static_cast<float>(fh), s, v, r, g, b);
      img.at(y, x, 0) = clamp01(r);
      img.at(y, x, 1) = clamp01(g);
      img.at(y, x, 2) = clamp01(b);
    }
  }
}

inline void grayscale(Image& img) {
  for (int64_t y = 0; y < img.height; ++y)
    for (int64_t x = 0; x < img.width; ++x) {
      const float v = luma(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2));
      img.at(y, x, 0) = img.at(y, x, 1) = img.at(y, x, 2) = v;
    }
}

inline void gaussian_blur(Image& img, double sigma) {
  const int64_t radius = std::max<int64_t>(1, static_cast<int64_t>(std::ceil(2.0 * sigma)));
  std::vector<double> kernel(static_cast<size_t>(2 * radius + 1));
  double ksum = 0.0;
  for (int64_t i = -radius; i <= radius; ++i) {
    kernel[static_cast<size_t>(i + radius)] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    ksum += kernel[static_cast<size_t>(i + radius)];
  }
  for (auto& k : kernel) k /= ksum;

  Image tmp = img;
  auto reflect = [](int64_t i, int64_t n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
    return i;
  };
  for (int64_t y = 0; y < img.height; ++y)
    for (int64_t x = 0; x < img.width; ++x)
      for (int64_t c = 0; c < img.channels; ++c) {
        double acc = 0.0;
        for (int64_t i = -radius; i <= radius; ++i)
          acc += kernel[static_cast<size_t>(i + radius)] *
                 img.at(y, reflect(x + i, img.width), c);
        tmp.at(y, x, c) = static_cast<float>(acc);
      }
  for (int64_t y = 0; y < img.height; ++y)
    for (int64_t x = 0; x < img.width; ++x)
      for (int64_t c = 0; c < img.channels; ++c) {
        double acc = 0.0;
        for (int64_t i = -radius; i <= radius; ++i)
          acc += kernel[static_cast<size_t>(i + radius)] *
                 tmp.at(reflect(y + i, img.height), x, c);
        img.at(y, x, c) = static_cast<float>(acc);
      }
}

inline void solarize(Image& img, double threshold) {
  for (auto& v : img.data)
    if (v > static_cast<float>(threshold)) v = 1.0f - v;
}

// RGB-only photometric stack; the blur/solarize schedule follows the
// two-global-view convention (view 0 always blurred, view 1 lightly blurred
// plus solarize, locals blurred half the time).
inline void apply_photometrics(Image& rgb, int64_t view_index, bool global,
                               std::mt19937_64& rng, const ViewConfig& cfg) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (unit(rng) < cfg.jitter_prob) color_jitter(rgb, rng, cfg);
  if (unit(rng) < cfg.grayscale_prob) grayscale(rgb);
  double blur_prob = global ? (view_index == 0 ? 1.0 : 0.1) : 0.5;
  if (unit(rng) < blur_prob) {
    const double sigma = cfg.blur_sigma_lo + unit(rng) * (cfg.blur_sigma_hi - cfg.blur_sigma_lo);
    gaussian_blur(rgb, sigma);
  }
  if (global && view_index == 1 && unit(rng) < cfg.solarize_prob)
    solarize(rgb, cfg.solarize_threshold);
}

}  // namespace detail

inline ViewSpec sample_view_spec(int64_t source_size, const CropSpec& crop,
                                 std::mt19937_64& rng) {
  crop.validate();
  std::uniform_real_distribution<double> scale_dist(crop.scale_lo, crop.scale_hi);
  for (int attempt = 0; attempt < 100; ++attempt) {
    const double scale = scale_dist(rng);
    const int64_t side = static_cast<int64_t>(
        std::floor(std::sqrt(scale) * static_cast<double>(source_size) + 0.5));
    if (side < 1 || side > source_size) continue;
    std::uniform_int_distribution<int64_t> xd(0, source_size - side);
    std::uniform_int_distribution<int64_t> yd(0, source_size - side);
    std::uniform_int_distribution<int> coin(0, 1);
    ViewSpec spec;
    spec.x = xd(rng);
    spec.y = yd(rng);
    spec.side = side;
    spec.flip = coin(rng) != 0;
    return spec;
  }
  fail("could not sample a non-degenerate crop after 100 attempts");
}

// Multi-crop views: V_g globals then V_l locals; the crop rectangle and flip
// bit are sampled once per view and shared by both streams, photometrics
// touch the RGB stream only.
inline ViewSet make_views(const SceneSample& sample, const ViewConfig& cfg, uint64_t seed) {
  cfg.validate();
  Image companion = companion_image(sample, cfg.companion);
  ViewSet out;
  out.v_global = cfg.v_global;
  out.v_local = cfg.v_local;
  const int64_t total = cfg.v_global + cfg.v_local;
  for (int64_t v = 0; v < total; ++v) {
    const bool global = v < cfg.v_global;
    std::mt19937_64 rng(mix_seed(seed, 0xC209, static_cast<uint64_t>(v)));
    const CropSpec& crop = global ? cfg.global : cfg.local;
    ViewSpec spec = sample_view_spec(sample.size, crop, rng);
    PairedView view = render_view(sample, companion, spec, crop.out_size, cfg.resize);
    view.global = global;
    if (cfg.photometric)
      detail::apply_photometrics(view.rgb, global ? v : v - cfg.v_global, global, rng, cfg);
    out.views.push_back(std::move(view));
  }
  return out;
}

// Deterministic clean probe view: the full frame, no crop, no flip, no
// photometrics; the companion stream is the raw companion image.
inline PairedView make_probe_view(const SceneSample& sample, CompanionKind kind,
                                  int64_t out_size) {
  Image companion = companion_image(sample, kind);
  ViewSpec spec;
  spec.x = 0;
  spec.y = 0;
  spec.side = sample.size;
  spec.flip = false;
  PairedView view = render_view(sample, companion, spec, out_size, ResizeMode::bilinear);
  view.global = true;
  return view;
}

}  // namespace mmjepa
