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

#include <catch2/catch_amalgamated.hpp>
#include <cstdio>

#include "mmjepa/data/scene.hpp"

using namespace mmjepa;

TEST_CASE("the same seed reproduces a scene bit for bit") {
  auto a = gen_scene(42, 32);
  auto b = gen_scene(42, 32);
  CHECK(a.rgb.data == b.rgb.data);
  CHECK(a.depth_dense == b.depth_dense);
  CHECK(a.depth_sparse == b.depth_sparse);
  CHECK(a.seg == b.seg);
  CHECK(a.objects.size() == b.objects.size());

  auto c = gen_scene(43, 32);
  CHECK(a.rgb.data != c.rgb.data);
}

TEST_CASE("scenes place 3 to 8 objects with depths in range") {
  for (uint64_t seed = 0; seed < 24; ++seed) {
    auto s = gen_scene(seed, 32);
    CHECK(s.objects.size() >= 3);
    CHECK(s.objects.size() <= 8);
    for (const auto& o : s.objects) {
      CHECK(o.depth >= 2.0);
      CHECK(o.depth <= 70.0);
    }
    for (float v : s.rgb.data) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  }
}

TEST_CASE("seg and dense depth agree on the nearest covering object") {
  for (uint64_t seed = 100; seed < 112; ++seed) {
    auto s = gen_scene(seed, 48);
    for (int64_t y = 0; y < s.size; ++y) {
      for (int64_t x = 0; x < s.size; ++x) {
        double min_depth = std::numeric_limits<double>::infinity();
        SegClass min_cls = SegClass::background;
        for (const auto& o : s.objects) {
          if (o.covers(x, y) && o.depth < min_depth) {
            min_depth = o.depth;
            min_cls = o.cls;
          }
        }
        const uint8_t cls = s.seg_at(y, x);
        if (cls == static_cast<uint8_t>(SegClass::box) ||
            cls == static_cast<uint8_t>(SegClass::disk)) {
          // the visible object is the nearest covering one and wrote its depth
          REQUIRE(std::isfinite(min_depth));
          CHECK(static_cast<uint8_t>(min_cls) == cls);
          CHECK(s.dense_at(y, x) == static_cast<float>(min_depth));
        } else if (std::isfinite(min_depth)) {
          // a covering object lost to a nearer ground/sky surface
          CHECK(static_cast<double>(s.dense_at(y, x)) <= min_depth);
        }
      }
    }
  }
}

TEST_CASE("ground depth increases toward the horizon") {
  auto s = gen_scene(7, 64);
  const int64_t horizon = static_cast<int64_t>(0.4 * 64);
  float prev = std::numeric_limits<float>::infinity();
  for (int64_t y = horizon; y < 64; ++y) {
    float row_depth = -1.0f;
    for (int64_t x = 0; x < 64; ++x) {
      if (s.seg_at(y, x) == static_cast<uint8_t>(SegClass::ground)) {
        row_depth = s.dense_at(y, x);
        break;
      }
    }
    if (row_depth < 0.0f) continue;
    CHECK(row_depth < prev);
    prev = row_depth;
  }
}

TEST_CASE("painter's order keeps the nearest point at a pixel") {
  DepthRenderConfig cfg;
  cfg.r_max = 80.0;
  auto map = render_sparse_depth({{5, 10.0}, {5, 30.0}}, cfg, 4, 4);
  CHECK(map[5] == 0.125f);

  auto map2 = render_sparse_depth({{5, 30.0}, {5, 10.0}}, cfg, 4, 4);
  CHECK(map == map2);  // order independence given the explicit sort
}

TEST_CASE("depth 40 m at r_max 80 encodes as one half") {
  DepthRenderConfig cfg;
  auto map = render_sparse_depth({{0, 40.0}}, cfg, 2, 2);
  CHECK(map[0] == 0.5f);
  CHECK(map[1] == 0.0f);
  CHECK(map[2] == 0.0f);
  CHECK(map[3] == 0.0f);
}

TEST_CASE("depths beyond r_max clamp to one") {
  DepthRenderConfig cfg;
  auto map = render_sparse_depth({{1, 200.0}}, cfg, 2, 2);
  CHECK(map[1] == 1.0f);
}

TEST_CASE("an empty point list renders an all-zero map") {
  DepthRenderConfig cfg;
  auto map = render_sparse_depth({}, cfg, 3, 3);
  for (float v : map) CHECK(v == 0.0f);
}

TEST_CASE("nonpositive depths are rejected") {
  DepthRenderConfig cfg;
  CHECK_THROWS_AS(render_sparse_depth({{0, 0.0}}, cfg, 2, 2), std::invalid_argument);
  CHECK_THROWS_AS(render_sparse_depth({{0, -1.0}}, cfg, 2, 2), std::invalid_argument);
}

TEST_CASE("return probability one covers every pixel") {
  auto s = gen_scene(9, 16);
  DepthRenderConfig cfg;
  cfg.return_probability = 1.0;
  cfg.seed = 5;
  CHECK(sample_points(s, cfg).size() == 16 * 16);
}

TEST_CASE("point counts follow the binomial expectation over 100 seeds") {
  auto s = gen_scene(11, 16);
  DepthRenderConfig cfg;
  cfg.return_probability = 0.3;
  const double n = 16.0 * 16.0;
  double total = 0.0;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    cfg.seed = seed;
    total += static_cast<double>(sample_points(s, cfg).size());
  }
  const double mean = total / 100.0;
  const double sigma_mean = std::sqrt(n * 0.3 * 0.7 / 100.0);
  CHECK(std::abs(mean - n * 0.3) <= 3.0 * sigma_mean);
}

TEST_CASE("sparse depth never exceeds normalized dense depth where a return exists") {
  for (uint64_t seed = 30; seed < 40; ++seed) {
    auto s = gen_scene(seed, 32);
    for (size_t i = 0; i < s.depth_sparse.size(); ++i) {
      if (s.depth_sparse[i] == 0.0f) continue;
      CHECK(static_cast<double>(s.depth_sparse[i]) <=
            static_cast<double>(s.depth_dense[i]) / 80.0 + 1e-6);
    }
  }
}

TEST_CASE("scene cache round-trips bit-exactly") {
  auto s = gen_scene(77, 24);
  const std::string path = "scene_cache_test.bin";
  save_sample(path, s);
  auto loaded = load_sample(path);
  std::remove(path.c_str());
  CHECK(loaded.seed == s.seed);
  CHECK(loaded.size == s.size);
  CHECK(loaded.rgb.data == s.rgb.data);
  CHECK(loaded.depth_dense == s.depth_dense);
  CHECK(loaded.depth_sparse == s.depth_sparse);
  CHECK(loaded.seg == s.seg);
}

TEST_CASE("stream seeds are a pure function of epoch and index") {
  CHECK(scene_stream_seed(1, 0, 0) == scene_stream_seed(1, 0, 0));
  CHECK(scene_stream_seed(1, 0, 0) != scene_stream_seed(1, 0, 1));
  CHECK(scene_stream_seed(1, 0, 0) != scene_stream_seed(1, 1, 0));
  CHECK(scene_stream_seed(1, 0, 0) != scene_stream_seed(2, 0, 0));
}

TEST_CASE("thermal companion is deterministic with class-dependent intensity") {
  auto s = gen_scene(55, 32);
  auto t1 = companion_image(s, CompanionKind::thermal);
  auto t2 = companion_image(s, CompanionKind::thermal);
  CHECK(t1.data == t2.data);
  for (float v : t1.data) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  double box_sum = 0.0, ground_sum = 0.0;
  int64_t box_n = 0, ground_n = 0;
  for (int64_t y = 0; y < 32; ++y)
    for (int64_t x = 0; x < 32; ++x) {
      if (s.seg_at(y, x) == static_cast<uint8_t>(SegClass::box)) {
        box_sum += t1.at(y, x, 0);
        ++box_n;
      } else if (s.seg_at(y, x) == static_cast<uint8_t>(SegClass::ground)) {
        ground_sum += t1.at(y, x, 0);
        ++ground_n;
      }
    }
  if (box_n > 0 && ground_n > 0) CHECK(box_sum / box_n > ground_sum / ground_n);

  auto d = companion_image(s, CompanionKind::depth);
  CHECK(std::vector<float>(d.data.begin(), d.data.end()) == s.depth_sparse);
}
