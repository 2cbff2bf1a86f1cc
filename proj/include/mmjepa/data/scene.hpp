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
#include <cstring>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "mmjepa/core/common.hpp"
#include "mmjepa/core/random.hpp"
#include "mmjepa/data/image.hpp"

namespace mmjepa {

enum class SegClass : uint8_t { background = 0, ground = 1, box = 2, disk = 3 };
constexpr int kSegClasses = 4;

enum class CompanionKind { depth, thermal };

inline CompanionKind parse_companion_kind(const std::string& s) {
  if (s == "depth") return CompanionKind::depth;
  if (s == "thermal") return CompanionKind::thermal;
  fail("unknown companion kind '" + s + "' (expected depth|thermal)");
}

struct DepthRenderConfig {
  double r_max = 80.0;
  double return_probability = 0.3;
  uint64_t seed = 0;

  void validate() const {
    require(r_max > 0.0, "r_max must be positive");
    require(return_probability > 0.0 && return_probability <= 1.0,
            "return probability must lie in (0, 1]");
  }
};

struct SceneObject {
  SegClass cls;
  double cx, cy;    // center, pixels
  double ex, ey;    // semi-extents, pixels
  double depth;     // meters
  float r, g, b;

  bool covers(int64_t x, int64_t y) const {
    const double dx = (static_cast<double>(x) - cx);
    const double dy = (static_cast<double>(y) - cy);
    if (cls == SegClass::box) return std::abs(dx) <= ex && std::abs(dy) <= ey;
    const double nx = dx / ex, ny = dy / ey;
    return nx * nx + ny * ny <= 1.0;
  }
};

// One synthetic paired sample: RGB, dense metric depth, sparse normalized
// depth (0 = no return), segmentation ids, and the object list for checks.
struct SceneSample {
  int64_t size = 0;
  uint64_t seed = 0;
  Image rgb;                        // size x size x 3 in [0,1]
  std::vector<float> depth_dense;   // meters
  std::vector<float> depth_sparse;  // depth / r_max in [0,1], 0 = no return
  std::vector<uint8_t> seg;
  std::vector<SceneObject> objects;

  float dense_at(int64_t y, int64_t x) const {
    return depth_dense[static_cast<size_t>(y * size + x)];
  }
  uint8_t seg_at(int64_t y, int64_t x) const {
    return seg[static_cast<size_t>(y * size + x)];
  }
};

struct DepthPoint {
  int64_t pixel;
  double depth;  // meters, > 0
};

// Painter's-order rendering: points written farthest first so the nearest
// depth wins per pixel. Values are depth / r_max clamped to [0, 1]; pixels
// without a return stay 0.
inline std::vector<float> render_sparse_depth(std::vector<DepthPoint> points,
                                              const DepthRenderConfig& cfg, int64_t height,
                                              int64_t width) {
  cfg.validate();
  for (const auto& p : points) {
    require(p.depth > 0.0, "sparse depth points must have positive depth, got " +
                               std::to_string(p.depth));
    require(p.pixel >= 0 && p.pixel < height * width,
            "sparse depth point pixel " + std::to_string(p.pixel) + " outside the image");
  }
  std::sort(points.begin(), points.end(), [](const DepthPoint& a, const DepthPoint& b) {
    if (a.depth != b.depth) return a.depth > b.depth;
    return a.pixel < b.pixel;
  });
  std::vector<float> out(static_cast<size_t>(height * width), 0.0f);
  for (const auto& p : points) {
    const double v = std::min(1.0, std::max(0.0, p.depth / cfg.r_max));
    out[static_cast<size_t>(p.pixel)] = static_cast<float>(v);
  }
  return out;
}

// Bernoulli(return_probability) per pixel in row-major order, deterministic
// from cfg.seed; depths come from the dense ground truth.
inline std::vector<DepthPoint> sample_points(const SceneSample& scene,
                                             const DepthRenderConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<DepthPoint> points;
  const int64_t total = scene.size * scene.size;
  points.reserve(static_cast<size_t>(static_cast<double>(total) * cfg.return_probability * 1.2) + 16);
  for (int64_t p = 0; p < total; ++p) {
    const bool hit = coin(rng) < cfg.return_probability;
    if (hit) points.push_back({p, static_cast<double>(scene.depth_dense[static_cast<size_t>(p)])});
  }
  return points;
}

// Deterministic scene: ground plane with depth increasing toward the
// horizon, sky at far range, and 3-8 colored boxes/disks at depths in
// [2, 70] m, z-buffered so seg, rgb and dense depth agree on the nearest
// surface at every pixel.
inline SceneSample gen_scene(uint64_t seed, int64_t size,
                             const DepthRenderConfig& depth_cfg = DepthRenderConfig{}) {
  require(size >= 8, "scene size must be at least 8 pixels");
  SceneSample s;
  s.size = size;
  s.seed = seed;
  s.rgb = Image(size, size, 3);
  s.depth_dense.assign(static_cast<size_t>(size * size), 0.0f);
  s.seg.assign(static_cast<size_t>(size * size), static_cast<uint8_t>(SegClass::background));

  std::mt19937_64 rng(mix_seed(seed, 0x5CE11E));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const int64_t horizon = static_cast<int64_t>(0.4 * static_cast<double>(size));
  const double d_near = 2.0, d_far = 70.0;
  for (int64_t y = 0; y < size; ++y) {
    for (int64_t x = 0; x < size; ++x) {
      const size_t idx = static_cast<size_t>(y * size + x);
      if (y < horizon) {
        s.depth_dense[idx] = static_cast<float>(depth_cfg.r_max);
        s.seg[idx] = static_cast<uint8_t>(SegClass::background);
        const float t = static_cast<float>(y) / static_cast<float>(std::max<int64_t>(1, horizon));
        s.rgb.at(y, x, 0) = 0.45f + 0.15f * t;
        s.rgb.at(y, x, 1) = 0.65f + 0.10f * t;
        s.rgb.at(y, x, 2) = 0.90f;
      } else {
        const double t = static_cast<double>(y - horizon) /
                         static_cast<double>(std::max<int64_t>(1, size - 1 - horizon));
        s.depth_dense[idx] = static_cast<float>(d_far + (d_near - d_far) * t);
        s.seg[idx] = static_cast<uint8_t>(SegClass::ground);
        const float shade = 0.35f + 0.25f * static_cast<float>(t);
        s.rgb.at(y, x, 0) = shade;
        s.rgb.at(y, x, 1) = shade * 0.9f;
        s.rgb.at(y, x, 2) = shade * 0.7f;
      }
    }
  }

  std::uniform_int_distribution<int> count_dist(3, 8);
  const int object_count = count_dist(rng);
  for (int i = 0; i < object_count; ++i) {
    SceneObject obj;
    obj.cls = unit(rng) < 0.5 ? SegClass::box : SegClass::disk;
    obj.depth = 2.0 + unit(rng) * 68.0;
    obj.cx = unit(rng) * static_cast<double>(size - 1);
    obj.cy = unit(rng) * static_cast<double>(size - 1);
    const double lo = static_cast<double>(size) / 16.0, hi = static_cast<double>(size) / 5.0;
    obj.ex = lo + unit(rng) * (hi - lo);
    obj.ey = lo + unit(rng) * (hi - lo);
    obj.r = static_cast<float>(0.2 + 0.8 * unit(rng));
    obj.g = static_cast<float>(0.2 + 0.8 * unit(rng));
    obj.b = static_cast<float>(0.2 + 0.8 * unit(rng));
    s.objects.push_back(obj);

    const int64_t x0 = std::max<int64_t>(0, static_cast<int64_t>(obj.cx - obj.ex));
    const int64_t x1 = std::min<int64_t>(size - 1, static_cast<int64_t>(obj.cx + obj.ex) + 1);
    const int64_t y0 = std::max<int64_t>(0, static_cast<int64_t>(obj.cy - obj.ey));
    const int64_t y1 = std::min<int64_t>(size - 1, static_cast<int64_t>(obj.cy + obj.ey) + 1);
    for (int64_t y = y0; y <= y1; ++y) {
      for (int64_t x = x0; x <= x1; ++x) {
        if (!obj.covers(x, y)) continue;
        const size_t idx = static_cast<size_t>(y * size + x);
        if (obj.depth >= static_cast<double>(s.depth_dense[idx])) continue;  // z-buffer
        s.depth_dense[idx] = static_cast<float>(obj.depth);
        s.seg[idx] = static_cast<uint8_t>(obj.cls);
        s.rgb.at(y, x, 0) = obj.r;
        s.rgb.at(y, x, 1) = obj.g;
        s.rgb.at(y, x, 2) = obj.b;
      }
    }
  }

  DepthRenderConfig point_cfg = depth_cfg;
  point_cfg.seed = mix_seed(seed, 0x5CA77E2);
  s.depth_sparse = render_sparse_depth(sample_points(s, point_cfg), point_cfg, size, size);
  return s;
}

// Companion stream as a 1-channel image: the rendered sparse depth, or a
// thermal-like intensity (class emissivity plus noise) behind the flag.
inline Image companion_image(const SceneSample& scene, CompanionKind kind) {
  Image out(scene.size, scene.size, 1);
  if (kind == CompanionKind::depth) {
    for (size_t i = 0; i < scene.depth_sparse.size(); ++i) out.data[i] = scene.depth_sparse[i];
    return out;
  }
  constexpr float kEmissivity[kSegClasses] = {0.20f, 0.35f, 0.70f, 0.55f};
  std::mt19937_64 rng(mix_seed(scene.seed, 0x7EB2A1));
  std::normal_distribution<double> noise(0.0, 0.02);
  for (size_t i = 0; i < scene.seg.size(); ++i) {
    const float v = kEmissivity[scene.seg[i]] + static_cast<float>(noise(rng));
    out.data[i] = std::min(1.0f, std::max(0.0f, v));
  }
  return out;
}

// Seed of sample `index` within `epoch`; iteration order is a pure function
// of (epoch, seed).
inline uint64_t scene_stream_seed(uint64_t base_seed, uint64_t epoch, uint64_t index) {
  return mix_seed(base_seed, 0xDA7A0000ULL + epoch, index);
}

namespace detail {

inline void write_f32_le(std::ostream& os, const float* data, size_t count) {
  for (size_t i = 0; i < count; ++i) {
    uint32_t bits;
    std::memcpy(&bits, &data[i], 4);
    const unsigned char bytes[4] = {
        static_cast<unsigned char>(bits & 0xff), static_cast<unsigned char>((bits >> 8) & 0xff),
        static_cast<unsigned char>((bits >> 16) & 0xff),
        static_cast<unsigned char>((bits >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(bytes), 4);
  }
}

inline void read_f32_le(std::istream& is, float* data, size_t count) {
  for (size_t i = 0; i < count; ++i) {
    unsigned char bytes[4];
    is.read(reinterpret_cast<char*>(bytes), 4);
    const uint32_t bits = static_cast<uint32_t>(bytes[0]) | (static_cast<uint32_t>(bytes[1]) << 8) |
                          (static_cast<uint32_t>(bytes[2]) << 16) |
                          (static_cast<uint32_t>(bytes[3]) << 24);
    std::memcpy(&data[i], &bits, 4);
  }
}

}  // namespace detail

constexpr const char* kSceneCacheVersion = "1";

// One cache file per sample: a plain-text manifest (array name, shape, dtype,
// byte offset, plus seed and generator version) followed by the raw arrays as
// little-endian 32-bit floats. Segmentation ids are stored as floats.
inline void save_sample(const std::string& path, const SceneSample& s) {
  std::ofstream os(path, std::ios::binary);
  require(os.good(), "cannot open '" + path + "' for writing");
  const int64_t hw = s.size * s.size;
  std::ostringstream manifest;
  manifest << "mmjepa-scene-cache version " << kSceneCacheVersion << "\n";
  manifest << "seed " << s.seed << "\n";
  manifest << "size " << s.size << "\n";
  int64_t offset = 0;
  auto entry = [&](const char* name, int64_t channels) {
    manifest << "array " << name << " f32 " << s.size << " " << s.size << " " << channels
             << " offset " << offset << "\n";
    offset += hw * channels * 4;
  };
  entry("rgb", 3);
  entry("depth_dense", 1);
  entry("depth_sparse", 1);
  entry("seg", 1);
  manifest << "data\n";
  os << manifest.str();
  detail::write_f32_le(os, s.rgb.data.data(), s.rgb.data.size());
  detail::write_f32_le(os, s.depth_dense.data(), s.depth_dense.size());
  detail::write_f32_le(os, s.depth_sparse.data(), s.depth_sparse.size());
  std::vector<float> seg_f(s.seg.begin(), s.seg.end());
  detail::write_f32_le(os, seg_f.data(), seg_f.size());
  require(os.good(), "failed writing '" + path + "'");
}

inline SceneSample load_sample(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), "cannot open '" + path + "' for reading");
  std::string line;
  std::getline(is, line);
  require(line == std::string("mmjepa-scene-cache version ") + kSceneCacheVersion,
          "unsupported scene cache header in '" + path + "'");
  SceneSample s;
  while (std::getline(is, line) && line != "data") {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "seed") ls >> s.seed;
    if (key == "size") ls >> s.size;
  }
  require(s.size >= 1, "scene cache '" + path + "' is missing its size entry");
  const size_t hw = static_cast<size_t>(s.size * s.size);
  s.rgb = Image(s.size, s.size, 3);
  detail::read_f32_le(is, s.rgb.data.data(), s.rgb.data.size());
  s.depth_dense.resize(hw);
  detail::read_f32_le(is, s.depth_dense.data(), hw);
  s.depth_sparse.resize(hw);
  detail::read_f32_le(is, s.depth_sparse.data(), hw);
  std::vector<float> seg_f(hw);
  detail::read_f32_le(is, seg_f.data(), hw);
  s.seg.resize(hw);
  for (size_t i = 0; i < hw; ++i) s.seg[i] = static_cast<uint8_t>(seg_f[i]);
  require(is.good(), "failed reading '" + path + "'");
  return s;
}

}  // namespace mmjepa
