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

#include "mmjepa/data/views.hpp"

using namespace mmjepa;

namespace {

ViewConfig desk_config(bool photometric, ResizeMode mode = ResizeMode::bilinear) {
  ViewConfig cfg;
  cfg.v_global = 2;
  cfg.v_local = 4;
  cfg.global = {0.4, 1.0, 64};
  cfg.local = {0.05, 0.4, 32};
  cfg.photometric = photometric;
  cfg.resize = mode;
  return cfg;
}

SceneSample hflip_sample(const SceneSample& s) {
  SceneSample out = s;
  out.rgb = hflip(s.rgb);
  for (int64_t y = 0; y < s.size; ++y)
    for (int64_t x = 0; x < s.size; ++x) {
      out.depth_dense[static_cast<size_t>(y * s.size + x)] =
          s.depth_dense[static_cast<size_t>(y * s.size + (s.size - 1 - x))];
      out.depth_sparse[static_cast<size_t>(y * s.size + x)] =
          s.depth_sparse[static_cast<size_t>(y * s.size + (s.size - 1 - x))];
      out.seg[static_cast<size_t>(y * s.size + x)] =
          s.seg[static_cast<size_t>(y * s.size + (s.size - 1 - x))];
    }
  return out;
}

}  // namespace

TEST_CASE("both streams of a paired view share the crop rectangle and flip bit") {
  auto cfg = desk_config(true);
  for (uint64_t seed = 0; seed < 20; ++seed) {
    auto sample = gen_scene(seed, 64);
    auto companion = companion_image(sample, cfg.companion);
    auto views = make_views(sample, cfg, seed * 17 + 3);
    REQUIRE(views.views.size() == 6);
    for (const auto& view : views.views) {
      const int64_t out = view.global ? cfg.global.out_size : cfg.local.out_size;
      // re-render both streams from the single recorded spec; the companion
      // must match exactly since photometrics never touch it
      auto ref = render_view(sample, companion, view.spec, out, cfg.resize);
      CHECK(view.mod.data == ref.mod.data);
      CHECK(view.rgb.height == out);
      CHECK(view.mod.height == out);
    }
  }
}

TEST_CASE("with photometrics disabled the rgb view is the plain crop") {
  auto cfg = desk_config(false);
  auto sample = gen_scene(5, 64);
  auto companion = companion_image(sample, cfg.companion);
  auto views = make_views(sample, cfg, 11);
  for (const auto& view : views.views) {
    const int64_t out = view.global ? cfg.global.out_size : cfg.local.out_size;
    auto ref = render_view(sample, companion, view.spec, out, cfg.resize);
    CHECK(view.rgb.data == ref.rgb.data);
    CHECK(view.mod.data == ref.mod.data);
  }
}

TEST_CASE("companion values never exceed the input range, with photometrics on") {
  auto cfg = desk_config(true);
  for (uint64_t seed = 40; seed < 50; ++seed) {
    auto sample = gen_scene(seed, 64);
    const float input_max = companion_image(sample, cfg.companion).max_value();
    auto views = make_views(sample, cfg, seed);
    for (const auto& view : views.views) CHECK(view.mod.max_value() <= input_max);
  }
}

TEST_CASE("zero-ignoring pooling averages only live returns") {
  Image window(2, 2, 1);
  window.at(0, 0, 0) = 0.0f;
  window.at(0, 1, 0) = 0.0f;
  window.at(1, 0, 0) = 0.5f;
  window.at(1, 1, 0) = 0.5f;
  auto pooled = pool_depth(window, 1);
  CHECK(pooled.at(0, 0, 0) == 0.5f);

  Image zeroes(2, 2, 1);
  CHECK(pool_depth(zeroes, 1).at(0, 0, 0) == 0.0f);
}

TEST_CASE("dense windows pool to the ordinary area mean") {
  Image window(4, 4, 1);
  float v = 0.05f;
  for (auto& x : window.data) {
    x = v;
    v += 0.05f;
  }
  auto pooled = pool_depth(window, 2);
  for (int64_t y = 0; y < 2; ++y)
    for (int64_t x = 0; x < 2; ++x) {
      double mean = 0.0;
      for (int64_t yy = 0; yy < 2; ++yy)
        for (int64_t xx = 0; xx < 2; ++xx) mean += window.at(2 * y + yy, 2 * x + xx, 0);
      mean /= 4.0;
      CHECK(pooled.at(y, x, 0) == Catch::Approx(mean).epsilon(1e-6));
    }
}

TEST_CASE("flipping the source and negating flip bits reproduces views pixel-exactly") {
  auto cfg = desk_config(false, ResizeMode::nearest);
  auto sample = gen_scene(21, 64);
  auto flipped = hflip_sample(sample);
  auto companion = companion_image(sample, cfg.companion);
  auto companion_flipped = hflip(companion);
  auto views = make_views(sample, cfg, 77);
  for (const auto& view : views.views) {
    const int64_t out = view.global ? cfg.global.out_size : cfg.local.out_size;
    ViewSpec mirrored = view.spec;
    mirrored.x = sample.size - view.spec.x - view.spec.side;
    mirrored.flip = !view.spec.flip;
    auto redone = render_view(flipped, companion_flipped, mirrored, out, ResizeMode::nearest);
    CHECK(redone.rgb.data == view.rgb.data);
    CHECK(redone.mod.data == view.mod.data);
  }
}

TEST_CASE("view sets are deterministic in (sample, seed)") {
  auto cfg = desk_config(true);
  auto sample = gen_scene(33, 64);
  auto a = make_views(sample, cfg, 5);
  auto b = make_views(sample, cfg, 5);
  REQUIRE(a.views.size() == b.views.size());
  for (size_t i = 0; i < a.views.size(); ++i) {
    CHECK(a.views[i].rgb.data == b.views[i].rgb.data);
    CHECK(a.views[i].mod.data == b.views[i].mod.data);
    CHECK(a.views[i].spec.x == b.views[i].spec.x);
    CHECK(a.views[i].spec.flip == b.views[i].spec.flip);
  }
  auto c = make_views(sample, cfg, 6);
  bool any_diff = false;
  for (size_t i = 0; i < a.views.size(); ++i)
    any_diff = any_diff || a.views[i].rgb.data != c.views[i].rgb.data;
  CHECK(any_diff);
}

TEST_CASE("invalid crop specs and degenerate crops are rejected") {
  CropSpec bad;
  bad.scale_lo = 0.5;
  bad.scale_hi = 0.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  CropSpec degenerate;
  degenerate.scale_lo = 1e-9;
  degenerate.scale_hi = 2e-9;
  degenerate.out_size = 8;
  std::mt19937_64 rng(1);
  CHECK_THROWS_AS(sample_view_spec(64, degenerate, rng), std::invalid_argument);
}

TEST_CASE("probe views are clean full-frame passes") {
  auto sample = gen_scene(63, 64);
  auto view = make_probe_view(sample, CompanionKind::depth, 64);
  CHECK(view.spec.side == 64);
  CHECK(view.spec.flip == false);
  CHECK(view.rgb.data == sample.rgb.data);  // same-size bilinear resize is the identity
  CHECK(std::vector<float>(view.mod.data.begin(), view.mod.data.end()) == sample.depth_sparse);
}
