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

#include "mmjepa/core/grad_check.hpp"
#include "mmjepa/encoder/encoder.hpp"

using namespace mmjepa;
using D = Tensor<double>;

namespace {

EncoderConfig tiny_config(RoutingMode mode = RoutingMode::pruned) {
  EncoderConfig cfg;
  cfg.image_size = 16;
  cfg.patch_size = 8;  // N = 4
  cfg.embed_dim = 16;
  cfg.depth = 2;
  cfg.heads = 2;
  cfg.projector_dim = 8;
  cfg.routing = mode;
  return cfg;
}

Image random_image(int64_t size, int64_t channels, uint64_t seed) {
  Image img(size, size, channels);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> dist(0.0f, 1.0f);
  for (auto& v : img.data) v = dist(rng);
  return img;
}

}  // namespace

TEST_CASE("token layout counts: N=196 gives 589 tokens, N=4 gives 13") {
  EncoderConfig big;
  big.image_size = 224;
  big.patch_size = 16;
  big.embed_dim = 16;
  big.depth = 1;
  big.heads = 2;
  FusionEncoder<double> enc(big, 1);
  auto rgb = enc.patchify(Image(224, 224, 3), Modality::cam);
  auto mod = enc.patchify(Image(224, 224, 1), Modality::mod);
  auto seq = enc.build_sequence(rgb, mod);
  CHECK(seq.tokens.rows() == 589);
  CHECK(seq.roles.size() == 589);
  auto pruned = enc.prune(seq);
  CHECK(pruned.tokens.rows() == 197);

  FusionEncoder<double> tiny(tiny_config(), 1);
  auto seq4 = tiny.build_sequence(tiny.patchify(Image(16, 16, 3), Modality::cam),
                                  tiny.patchify(Image(16, 16, 1), Modality::mod));
  CHECK(seq4.tokens.rows() == 13);
  REQUIRE(seq4.roles.size() == 13);
  CHECK(seq4.roles[0] == TokenRole{TokenKind::cls, 0});
  for (int64_t i = 1; i <= 4; ++i) {
    CHECK(seq4.roles[static_cast<size_t>(i)] == TokenRole{TokenKind::fusion, i});
    CHECK(seq4.roles[static_cast<size_t>(1 + 4 + i - 1)] == TokenRole{TokenKind::cam, i});
    CHECK(seq4.roles[static_cast<size_t>(1 + 8 + i - 1)] == TokenRole{TokenKind::mod, i});
  }
}

TEST_CASE("prune keeps CLS + fusion only and cannot run twice") {
  FusionEncoder<double> enc(tiny_config(), 2);
  auto seq = enc.build_sequence(enc.patchify(Image(16, 16, 3), Modality::cam),
                                enc.patchify(Image(16, 16, 1), Modality::mod));
  auto pruned = enc.prune(seq);
  CHECK(pruned.tokens.rows() == 5);
  for (const auto& role : pruned.roles) {
    CHECK(role.kind != TokenKind::cam);
    CHECK(role.kind != TokenKind::mod);
  }
  CHECK_THROWS_AS(enc.prune(pruned), std::invalid_argument);

  FusionEncoder<double> persistent(tiny_config(RoutingMode::persistent), 2);
  auto pseq = persistent.build_sequence(persistent.patchify(Image(16, 16, 3), Modality::cam),
                                        persistent.patchify(Image(16, 16, 1), Modality::mod));
  CHECK_THROWS_AS(persistent.prune(pseq), std::invalid_argument);
}

TEST_CASE("pruned layer-0 mask pairs fusion tokens with their own patches") {
  const int64_t n = 5;
  auto mask = make_mask(RoutingMode::pruned, 0, n);
  CHECK_FALSE(mask.at(fusion_slot(2), cam_slot(3, n)));
  for (int64_t i = 1; i <= n; ++i) {
    for (int64_t j = 1; j <= n; ++j) {
      CHECK(mask.at(fusion_slot(i), cam_slot(j, n)) == (i == j));
      CHECK(mask.at(fusion_slot(i), mod_slot(j, n)) == (i == j));
      CHECK(mask.at(fusion_slot(i), fusion_slot(j)) == (i == j));
    }
    CHECK(mask.at(fusion_slot(i), cls_slot()));
    // one round of intra-modality mixing plus the CLS column
    for (int64_t j = 1; j <= n; ++j) {
      CHECK(mask.at(cam_slot(i, n), cam_slot(j, n)));
      CHECK(mask.at(mod_slot(i, n), mod_slot(j, n)));
      CHECK_FALSE(mask.at(cam_slot(i, n), mod_slot(j, n)));
      CHECK_FALSE(mask.at(cam_slot(i, n), fusion_slot(j)));
    }
  }
  for (int64_t k = 0; k < mask.cols; ++k) CHECK(mask.at(cls_slot(), k));
  for (int64_t r = 0; r < mask.rows; ++r) CHECK(mask.allowed_in_row(r) >= 1);
}

TEST_CASE("pruned masks for layers past zero are full over 1+N tokens") {
  const int64_t n = 5;
  auto mask = make_mask(RoutingMode::pruned, 1, n);
  CHECK(mask.rows == 1 + n);
  CHECK(mask.cols == 1 + n);
  for (int64_t r = 0; r < mask.rows; ++r)
    for (int64_t c = 0; c < mask.cols; ++c) CHECK(mask.at(r, c));
}

TEST_CASE("persistent masks keep paired attention at every layer") {
  const int64_t n = 4;
  for (int64_t layer : {0, 3}) {
    auto mask = make_mask(RoutingMode::persistent, layer, n);
    CHECK(mask.rows == 1 + 3 * n);
    for (int64_t i = 1; i <= n; ++i) {
      CHECK(mask.at(fusion_slot(i), cam_slot(i, n)));
      CHECK(mask.at(fusion_slot(i), mod_slot(i, n)));
      for (int64_t j = 1; j <= n; ++j) {
        CHECK(mask.at(fusion_slot(i), fusion_slot(j)));  // fusion tokens mix spatially
        CHECK(mask.at(fusion_slot(i), cam_slot(j, n)) == (i == j));
      }
    }
  }
}

TEST_CASE("patchify of an all-zero image is bias + modality + positional rows") {
  auto cfg = tiny_config();
  FusionEncoder<double> enc(cfg, 3);
  auto out = enc.patchify(Image(16, 16, 1), Modality::mod);
  REQUIRE(out.rows() == 4);
  const auto bias = enc.params().get("stem.mod.bias");
  const auto emb = enc.params().get("emb.modality.mod");
  const auto pos = enc.params().get("emb.pos");
  const int64_t n = cfg.patches();
  for (int64_t r = 0; r < 4; ++r)
    for (int64_t c = 0; c < cfg.embed_dim; ++c)
      CHECK(out.at(r, c) ==
            Catch::Approx(bias.at(0, c) + emb.at(0, c) + pos.at(mod_slot(r + 1, n), c))
                .margin(1e-12));
}

TEST_CASE("patchify is local: changing one patch moves exactly one row") {
  FusionEncoder<double> enc(tiny_config(), 4);
  Image a = random_image(16, 3, 10);
  Image b = a;
  b.at(9, 2, 1) += 0.25f;  // inside patch row 1, col 0 -> patch index 2
  auto pa = enc.patchify(a, Modality::cam);
  auto pb = enc.patchify(b, Modality::cam);
  for (int64_t r = 0; r < 4; ++r) {
    double diff = 0.0;
    for (int64_t c = 0; c < 16; ++c) diff += std::abs(pa.at(r, c) - pb.at(r, c));
    if (r == 2) {
      CHECK(diff > 0.0);
    } else {
      CHECK(diff == 0.0);
    }
  }
}

TEST_CASE("a 32x32 image with patch size 8 yields 16 patch rows") {
  EncoderConfig cfg = tiny_config();
  cfg.image_size = 32;
  FusionEncoder<double> enc(cfg, 5);
  CHECK(enc.patchify(Image(32, 32, 3), Modality::cam).rows() == 16);
}

TEST_CASE("patchify rejects mismatched inputs") {
  FusionEncoder<double> enc(tiny_config(), 6);
  CHECK_THROWS_AS(enc.patchify(Image(16, 16, 3), Modality::mod), std::invalid_argument);
  CHECK_THROWS_AS(enc.patchify(Image(12, 12, 3), Modality::cam), std::invalid_argument);
  CHECK_THROWS_AS(enc.patchify(Image(16, 8, 3), Modality::cam), std::invalid_argument);
}

TEST_CASE("encode is deterministic and pruning shrinks the layer widths") {
  FusionEncoder<double> enc(tiny_config(), 7);
  Image rgb = random_image(16, 3, 20);
  Image mod = random_image(16, 1, 21);
  EncodeTrace<double> trace;
  auto out1 = enc.encode(rgb, mod, &trace);
  auto out2 = enc.encode(rgb, mod);
  CHECK(out1.cls.value() == out2.cls.value());
  CHECK(out1.fusion_grid.value() == out2.fusion_grid.value());
  CHECK(trace.layer_tokens == std::vector<int64_t>{13, 5});
  CHECK(out1.fusion_grid.rows() == 4);

  FusionEncoder<double> persistent(tiny_config(RoutingMode::persistent), 7);
  EncodeTrace<double> ptrace;
  persistent.encode(rgb, mod, &ptrace);
  CHECK(ptrace.layer_tokens == std::vector<int64_t>{13, 13});
}

TEST_CASE("zeroing the companion stream changes the fused CLS embedding") {
  FusionEncoder<double> enc(tiny_config(), 8);
  Image rgb = random_image(16, 3, 30);
  Image mod = random_image(16, 1, 31);
  auto joint = enc.encode(rgb, mod);

  FusionEncoder<double> rgb_only(tiny_config(RoutingMode::rgb_only), 8);
  auto dropped = rgb_only.encode(rgb, mod);
  double delta = 0.0;
  for (int64_t c = 0; c < 16; ++c) delta += std::abs(joint.cls.at(0, c) - dropped.cls.at(0, c));
  CHECK(delta > 1e-8);
}

TEST_CASE("layer-0 attention weight from fusion i to patch j is exactly zero off the diagonal") {
  FusionEncoder<double> enc(tiny_config(), 9);
  Image rgb = random_image(16, 3, 40);
  Image mod = random_image(16, 1, 41);
  EncodeTrace<double> trace;
  trace.capture_attention = true;
  enc.encode(rgb, mod, &trace);
  const int64_t n = 4;
  bool saw_layer0 = false;
  for (const auto& rec : trace.attention) {
    if (rec.layer != 0) continue;
    saw_layer0 = true;
    for (int64_t i = 1; i <= n; ++i)
      for (int64_t j = 1; j <= n; ++j) {
        if (i == j) continue;
        CHECK(rec.weights.at(fusion_slot(i), cam_slot(j, n)) == 0.0);
        CHECK(rec.weights.at(fusion_slot(i), mod_slot(j, n)) == 0.0);
      }
  }
  CHECK(saw_layer0);
}

TEST_CASE("both patch stems receive gradient through the pruned bottleneck") {
  FusionEncoder<double> enc(tiny_config(), 10);
  Image rgb = random_image(16, 3, 50);
  Image mod = random_image(16, 1, 51);
  auto out = enc.encode(rgb, mod);
  auto z = enc.project(out.cls);
  backward(sum(square(z)));
  double cam_stem = 0.0, mod_stem = 0.0;
  for (double g : enc.params().get("stem.cam.weight").grad()) cam_stem += std::abs(g);
  for (double g : enc.params().get("stem.mod.weight").grad()) mod_stem += std::abs(g);
  CHECK(cam_stem > 0.0);
  CHECK(mod_stem > 0.0);
}

TEST_CASE("parameter count and initial values are independent of routing mode") {
  FusionEncoder<double> pruned(tiny_config(RoutingMode::pruned), 11);
  FusionEncoder<double> persistent(tiny_config(RoutingMode::persistent), 11);
  CHECK(pruned.params().total_params() == persistent.params().total_params());
  for (size_t i = 0; i < pruned.params().items().size(); ++i) {
    CHECK(pruned.params().items()[i].first == persistent.params().items()[i].first);
    CHECK(pruned.params().items()[i].second.value() ==
          persistent.params().items()[i].second.value());
  }
}

TEST_CASE("fusion bank is truncated-normal initialized within two sigma") {
  FusionEncoder<double> enc(tiny_config(), 12);
  for (double v : enc.params().get("emb.fusion").value()) CHECK(std::abs(v) <= 0.04);
}

TEST_CASE("projector maps to dimension 16 under shipped defaults") {
  EncoderConfig cfg;  // defaults: D=64, projector_dim=16
  cfg.depth = 1;
  FusionEncoder<double> enc(cfg, 13);
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> rows(3 * 64);
  for (auto& v : rows) v = dist(rng);
  auto z = enc.project(D::from({3, 64}, rows));
  CHECK(z.cols() == 16);
  auto z2 = enc.project(D::from({3, 64}, std::move(rows)));
  CHECK(z.value() == z2.value());
}

TEST_CASE("projector gradient passes the finite-difference check") {
  auto cfg = tiny_config();
  FusionEncoder<double> enc(cfg, 14);
  std::mt19937_64 rng(123);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> vals(2 * cfg.embed_dim);
  for (auto& v : vals) v = dist(rng);
  D x = D::param({2, cfg.embed_dim}, vals);
  auto report = grad_check<double>(
      [&](const D& v) { return sum(square(enc.project(v))); }, x, 1e-5, 1e-3);
  INFO(report.detail);
  CHECK(report.pass);
}

TEST_CASE("local crops share the stems and the fusion grid follows the crop") {
  auto cfg = tiny_config();
  cfg.image_size = 32;  // training grid 4x4
  FusionEncoder<double> enc(cfg, 15);
  Image rgb = random_image(16, 3, 60);  // local crop, grid 2x2
  Image mod = random_image(16, 1, 61);
  EncodeTrace<double> trace;
  auto out = enc.encode(rgb, mod, &trace);
  CHECK(out.fusion_grid.rows() == 4);  // 2x2 local grid
  CHECK(trace.layer_tokens == std::vector<int64_t>{13, 5});
}
