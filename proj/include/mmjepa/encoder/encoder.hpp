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

#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mmjepa/core/meter.hpp"
#include "mmjepa/core/ops.hpp"
#include "mmjepa/core/random.hpp"
#include "mmjepa/data/image.hpp"
#include "mmjepa/encoder/config.hpp"
#include "mmjepa/encoder/mask.hpp"

namespace mmjepa {

// Named learnable tensors in registration order; the order fixes optimizer
// update order and checkpoint layout.
template <typename T>
class ParamStore {
 public:
  Tensor<T> add(const std::string& name, Shape shape, std::vector<T> init) {
    for (const auto& it : items_)
      require(it.first != name, "duplicate parameter name '" + name + "'");
    Tensor<T> t = Tensor<T>::param(std::move(shape), std::move(init));
    items_.emplace_back(name, t);
    return t;
  }

  Tensor<T> get(const std::string& name) const {
    for (const auto& it : items_)
      if (it.first == name) return it.second;
    fail("unknown parameter '" + name + "'");
  }

  bool has(const std::string& name) const {
    for (const auto& it : items_)
      if (it.first == name) return true;
    return false;
  }

  const std::vector<std::pair<std::string, Tensor<T>>>& items() const { return items_; }

  int64_t total_params() const {
    int64_t n = 0;
    for (const auto& it : items_) n += it.second.size();
    return n;
  }

  void zero_grads() {
    for (auto& it : items_) it.second.zero_grad();
  }

  double grad_abs_sum() const {
    double s = 0.0;
    for (const auto& it : items_)
      for (T g : it.second.grad()) s += std::abs(static_cast<double>(g));
    return s;
  }

 private:
  std::vector<std::pair<std::string, Tensor<T>>> items_;
};

enum class TokenKind { cls, fusion, cam, mod };
enum class Modality { cam, mod };

struct TokenRole {
  TokenKind kind = TokenKind::cls;
  int64_t index = 0;  // 1..N for fusion/cam/mod, 0 for cls

  bool operator==(const TokenRole& o) const { return kind == o.kind && index == o.index; }
};

// Ordered multimodal token layout with per-token role tags.
template <typename T>
struct TokenSequence {
  Tensor<T> tokens;             // (1+3N) x D before pruning, (1+N) x D after
  std::vector<TokenRole> roles;
  int64_t n_patches = 0;
  bool pruned = false;
};

// Optional capture of per-layer shapes and attention weights for tests.
template <typename T>
struct EncodeTrace {
  bool capture_attention = false;
  std::vector<int64_t> layer_tokens;
  struct AttnRecord {
    int64_t layer;
    int64_t head;
    Tensor<T> weights;  // queries x keys, post-softmax
  };
  std::vector<AttnRecord> attention;
};

// The multimodal transformer: per-modality patch stems, modality embeddings,
// CLS + fusion tokens, positional embeddings over every slot, masked
// attention with pruned or persistent routing, and the projector head.
// Weights are shared across routing modes.
template <typename T>
class FusionEncoder {
 public:
  struct Output {
    Tensor<T> cls;          // 1 x D
    Tensor<T> fusion_grid;  // N_view x D
  };

  FusionEncoder(EncoderConfig cfg, uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    rng_.seed(mix_seed(seed, /*stream=*/0xE9C0DE));
    const int64_t d = cfg_.embed_dim;
    const int64_t n = cfg_.patches();
    const int64_t patch_in_rgb = cfg_.patch_size * cfg_.patch_size * cfg_.rgb_channels;
    const int64_t patch_in_mod = cfg_.patch_size * cfg_.patch_size * cfg_.mod_channels;

    stem_cam_w_ = weight("stem.cam.weight", {patch_in_rgb, d});
    stem_cam_b_ = zeros_param("stem.cam.bias", {1, d});
    stem_mod_w_ = weight("stem.mod.weight", {patch_in_mod, d});
    stem_mod_b_ = zeros_param("stem.mod.bias", {1, d});
    emb_cam_ = weight("emb.modality.cam", {1, d});
    emb_mod_ = weight("emb.modality.mod", {1, d});
    cls_ = weight("emb.cls", {1, d});
    fusion_bank_ = weight("emb.fusion", {n, d});
    pos_ = weight("emb.pos", {1 + 3 * n, d});

    layers_.resize(static_cast<size_t>(cfg_.depth));
    for (int64_t i = 0; i < cfg_.depth; ++i) {
      const std::string p = "layers." + std::to_string(i) + ".";
      auto& L = layers_[static_cast<size_t>(i)];
      L.norm1_gamma = ones_param(p + "norm1.gamma", {1, d});
      L.norm1_beta = zeros_param(p + "norm1.beta", {1, d});
      L.wq = weight(p + "attn.wq", {d, d});
      L.bq = zeros_param(p + "attn.bq", {1, d});
      L.wk = weight(p + "attn.wk", {d, d});
      L.bk = zeros_param(p + "attn.bk", {1, d});
      L.wv = weight(p + "attn.wv", {d, d});
      L.bv = zeros_param(p + "attn.bv", {1, d});
      L.wo = weight(p + "attn.wo", {d, d});
      L.bo = zeros_param(p + "attn.bo", {1, d});
      L.norm2_gamma = ones_param(p + "norm2.gamma", {1, d});
      L.norm2_beta = zeros_param(p + "norm2.beta", {1, d});
      L.fc1_w = weight(p + "mlp.fc1.weight", {d, d * cfg_.mlp_ratio});
      L.fc1_b = zeros_param(p + "mlp.fc1.bias", {1, d * cfg_.mlp_ratio});
      L.fc2_w = weight(p + "mlp.fc2.weight", {d * cfg_.mlp_ratio, d});
      L.fc2_b = zeros_param(p + "mlp.fc2.bias", {1, d});
    }
    final_gamma_ = ones_param("final_norm.gamma", {1, d});
    final_beta_ = zeros_param("final_norm.beta", {1, d});
    proj_fc1_w_ = weight("projector.fc1.weight", {d, d});
    proj_fc1_b_ = zeros_param("projector.fc1.bias", {1, d});
    proj_fc2_w_ = weight("projector.fc2.weight", {d, cfg_.projector_dim});
    proj_fc2_b_ = zeros_param("projector.fc2.bias", {1, cfg_.projector_dim});
  }

  const EncoderConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }

  // Patch embeddings for one modality: linear projection of raw patches plus
  // the stem's modality embedding and the positional rows of its slot block.
  Tensor<T> patchify(const Image& img, Modality m) {
    require(img.height == img.width, "patchify expects a square image, got " +
                                         std::to_string(img.height) + "x" + std::to_string(img.width));
    const int64_t channels = m == Modality::cam ? cfg_.rgb_channels : cfg_.mod_channels;
    require(img.channels == channels,
            "patchify channel mismatch: image has " + std::to_string(img.channels) +
                ", stem expects " + std::to_string(channels));
    require(img.height % cfg_.patch_size == 0,
            "image size " + std::to_string(img.height) + " is not a multiple of patch size " +
                std::to_string(cfg_.patch_size));

    const int64_t p = cfg_.patch_size;
    const int64_t grid = img.height / p;
    const int64_t n = grid * grid;
    const int64_t patch_len = p * p * channels;
    std::vector<T> patches(static_cast<size_t>(n * patch_len));
    for (int64_t i = 0; i < n; ++i) {
      const int64_t pr = i / grid, pc = i % grid;
      T* row = patches.data() + i * patch_len;
      int64_t w = 0;
      for (int64_t py = 0; py < p; ++py)
        for (int64_t px = 0; px < p; ++px)
          for (int64_t c = 0; c < channels; ++c)
            row[w++] = static_cast<T>(img.at(pr * p + py, pc * p + px, c));
    }
    SectionGuard scope(-1, Meter::Section::stem);
    Tensor<T> raw = Tensor<T>::from({n, patch_len}, std::move(patches));
    Tensor<T> w_ = m == Modality::cam ? stem_cam_w_ : stem_mod_w_;
    Tensor<T> b_ = m == Modality::cam ? stem_cam_b_ : stem_mod_b_;
    Tensor<T> e_ = m == Modality::cam ? emb_cam_ : emb_mod_;
    Tensor<T> out = add(matmul(raw, w_), broadcast_rows(b_, n));
    out = add(out, broadcast_rows(e_, n));
    const int64_t block = m == Modality::cam ? cam_slot(1, cfg_.patches()) : mod_slot(1, cfg_.patches());
    out = add(out, pos_block(block, grid));
    return out;
  }

  // [CLS(1), F(N), C(N), M(N)] with role tags; CLS and fusion slots receive
  // their positional rows here, the patch blocks got theirs in patchify.
  TokenSequence<T> build_sequence(const Tensor<T>& rgb_patches, const Tensor<T>& mod_patches) {
    require(rgb_patches.rows() == mod_patches.rows(),
            "build_sequence patch row mismatch: " + std::to_string(rgb_patches.rows()) + " vs " +
                std::to_string(mod_patches.rows()));
    const int64_t n = rgb_patches.rows();
    const int64_t grid = grid_of(n);
    Tensor<T> cls_tok = add(cls_, slice_rows(pos_, 0, 1));
    Tensor<T> fusion = add(resample_grid(fusion_bank_, grid), pos_block(fusion_slot(1), grid));
    TokenSequence<T> seq;
    seq.tokens = concat<T>({cls_tok, fusion, rgb_patches, mod_patches}, 0);
    seq.n_patches = n;
    seq.roles.reserve(static_cast<size_t>(1 + 3 * n));
    seq.roles.push_back({TokenKind::cls, 0});
    for (int64_t i = 1; i <= n; ++i) seq.roles.push_back({TokenKind::fusion, i});
    for (int64_t i = 1; i <= n; ++i) seq.roles.push_back({TokenKind::cam, i});
    for (int64_t i = 1; i <= n; ++i) seq.roles.push_back({TokenKind::mod, i});
    return seq;
  }

  // Drops the 2N modality tokens, keeping CLS + fusion. Gradients still reach
  // the patch stems through the layer-0 attention keys and values.
  TokenSequence<T> prune(const TokenSequence<T>& seq) const {
    require(cfg_.routing != RoutingMode::persistent, "prune is not part of persistent routing");
    require(!seq.pruned, "prune called twice on one sequence");
    require(static_cast<int64_t>(seq.roles.size()) == 1 + 3 * seq.n_patches,
            "prune expects the full 1+3N sequence");
    TokenSequence<T> out;
    out.tokens = slice_rows(seq.tokens, 0, 1 + seq.n_patches);
    out.roles.assign(seq.roles.begin(), seq.roles.begin() + 1 + seq.n_patches);
    out.n_patches = seq.n_patches;
    out.pruned = true;
    return out;
  }

  Output encode(const Image& rgb, const Image& mod, EncodeTrace<T>* trace = nullptr) {
    if (cfg_.routing == RoutingMode::rgb_only)
      return encode_single_modality(rgb, mod, Modality::cam, trace);
    if (cfg_.routing == RoutingMode::mod_only)
      return encode_single_modality(rgb, mod, Modality::mod, trace);
    return encode_impl(rgb, mod, trace);
  }

  // Single-modality pass: the other stream's pixels are zeroed before the
  // stem; token layout and routing are unchanged.
  Output encode_single_modality(const Image& rgb, const Image& mod, Modality keep,
                                EncodeTrace<T>* trace = nullptr) {
    if (keep == Modality::cam) {
      Image zeroed(mod.height, mod.width, mod.channels);
      return encode_impl(rgb, zeroed, trace);
    }
    Image zeroed(rgb.height, rgb.width, rgb.channels);
    return encode_impl(zeroed, mod, trace);
  }

  Output encode_impl(const Image& rgb, const Image& mod, EncodeTrace<T>* trace) {
    require(rgb.height == mod.height && rgb.width == mod.width,
            "paired views must share the pixel grid");
    Tensor<T> rgb_p = patchify(rgb, Modality::cam);
    Tensor<T> mod_p = patchify(mod, Modality::mod);
    TokenSequence<T> seq = build_sequence(rgb_p, mod_p);
    const int64_t n = seq.n_patches;

    for (int64_t layer = 0; layer < cfg_.depth; ++layer) {
      if (trace) trace->layer_tokens.push_back(seq.tokens.rows());
      seq.tokens = transformer_layer(seq.tokens, layer, layer_mask(layer, n), trace);
      if (cfg_.routing != RoutingMode::persistent && layer == 0) seq = prune(seq);
    }

    Tensor<T> x = affine_norm(seq.tokens, final_gamma_, final_beta_);
    Output out;
    out.cls = slice_rows(x, 0, 1);
    out.fusion_grid = slice_rows(x, 1, n);
    return out;
  }

  // Two-layer perceptron D -> D (GELU) -> d, applied row-wise to CLS
  // embeddings only; fusion tokens are never projected.
  Tensor<T> project(const Tensor<T>& cls_rows) {
    SectionGuard scope(-1, Meter::Section::other);
    const int64_t rows = cls_rows.rows();
    Tensor<T> h = gelu(add(matmul(cls_rows, proj_fc1_w_), broadcast_rows(proj_fc1_b_, rows)));
    return add(matmul(h, proj_fc2_w_), broadcast_rows(proj_fc2_b_, rows));
  }

  std::shared_ptr<const AttentionMask> layer_mask(int64_t layer, int64_t n_patches) {
    require(layer >= 0 && layer < cfg_.depth, "layer " + std::to_string(layer) +
                                                  " out of range for depth " +
                                                  std::to_string(cfg_.depth));
    const bool first = layer == 0;
    const auto key = std::make_pair(first, n_patches);
    auto it = mask_cache_.find(key);
    if (it != mask_cache_.end()) return it->second;
    auto mask = std::make_shared<const AttentionMask>(make_mask(cfg_.routing, layer, n_patches));
    mask_cache_.emplace(key, mask);
    return mask;
  }

 private:
  struct Layer {
    Tensor<T> norm1_gamma, norm1_beta;
    Tensor<T> wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor<T> norm2_gamma, norm2_beta;
    Tensor<T> fc1_w, fc1_b, fc2_w, fc2_b;
  };

  Tensor<T> weight(const std::string& name, Shape shape) {
    const size_t n = static_cast<size_t>(numel(shape));
    return params_.add(name, std::move(shape), trunc_normal_vec<T>(n, 0.02, 2.0, rng_));
  }
  Tensor<T> zeros_param(const std::string& name, Shape shape) {
    const size_t n = static_cast<size_t>(numel(shape));
    return params_.add(name, std::move(shape), std::vector<T>(n, T(0)));
  }
  Tensor<T> ones_param(const std::string& name, Shape shape) {
    const size_t n = static_cast<size_t>(numel(shape));
    return params_.add(name, std::move(shape), std::vector<T>(n, T(1)));
  }

  static int64_t grid_of(int64_t n) {
    int64_t g = 1;
    while (g * g < n) ++g;
    require(g * g == n, "patch count " + std::to_string(n) + " is not a square");
    return g;
  }

  // Positional rows for the slot block starting at `first_slot`, resampled
  // from the training grid to `grid` when a local crop uses a smaller one.
  Tensor<T> pos_block(int64_t first_slot, int64_t grid) {
    Tensor<T> block = slice_rows(pos_, first_slot, cfg_.patches());
    return resample_grid(block, grid);
  }

  // Bilinear grid resampling as one constant matrix multiply, identity when
  // the grids match. Corner-aligned so equal sizes reproduce rows exactly.
  Tensor<T> resample_grid(const Tensor<T>& rows, int64_t out_grid) {
    const int64_t in_grid = cfg_.grid();
    if (out_grid == in_grid) return rows;
    auto key = out_grid;
    auto it = resample_cache_.find(key);
    if (it == resample_cache_.end()) {
      const int64_t n_out = out_grid * out_grid;
      const int64_t n_in = in_grid * in_grid;
      std::vector<T> m(static_cast<size_t>(n_out * n_in), T(0));
      for (int64_t r = 0; r < out_grid; ++r) {
        for (int64_t c = 0; c < out_grid; ++c) {
          const double y = out_grid == 1 ? 0.5 * static_cast<double>(in_grid - 1)
                                         : static_cast<double>(r) * (in_grid - 1) / (out_grid - 1);
          const double x = out_grid == 1 ? 0.5 * static_cast<double>(in_grid - 1)
                                         : static_cast<double>(c) * (in_grid - 1) / (out_grid - 1);
          const int64_t y0 = static_cast<int64_t>(y), x0 = static_cast<int64_t>(x);
          const int64_t y1 = std::min(y0 + 1, in_grid - 1), x1 = std::min(x0 + 1, in_grid - 1);
          const double fy = y - static_cast<double>(y0), fx = x - static_cast<double>(x0);
          const int64_t row = r * out_grid + c;
          auto put = [&](int64_t yy, int64_t xx, double wgt) {
            if (wgt != 0.0)
              m[static_cast<size_t>(row * n_in + yy * in_grid + xx)] += static_cast<T>(wgt);
          };
          put(y0, x0, (1 - fy) * (1 - fx));
          put(y0, x1, (1 - fy) * fx);
          put(y1, x0, fy * (1 - fx));
          put(y1, x1, fy * fx);
        }
      }
      it = resample_cache_.emplace(key, Tensor<T>::from({n_out, n_in}, std::move(m))).first;
    }
    return matmul(it->second, rows);
  }

  Tensor<T> affine_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta) {
    const int64_t rows = x.rows();
    Tensor<T> h = layer_norm(x);
    return add(mul(h, broadcast_rows(gamma, rows)), broadcast_rows(beta, rows));
  }

  Tensor<T> transformer_layer(const Tensor<T>& x, int64_t layer,
                              std::shared_ptr<const AttentionMask> mask, EncodeTrace<T>* trace) {
    const auto& L = layers_[static_cast<size_t>(layer)];
    const int64_t s = x.rows();
    const int64_t d = cfg_.embed_dim;
    const int64_t dh = d / cfg_.heads;
    const T scale = T(1) / static_cast<T>(std::sqrt(static_cast<double>(dh)));

    Tensor<T> h = affine_norm(x, L.norm1_gamma, L.norm1_beta);
    Tensor<T> attn_out;
    {
      SectionGuard scope(static_cast<int>(layer), Meter::Section::attention);
      Tensor<T> q = add(matmul(h, L.wq), broadcast_rows(L.bq, s));
      Tensor<T> k = add(matmul(h, L.wk), broadcast_rows(L.bk, s));
      Tensor<T> v = add(matmul(h, L.wv), broadcast_rows(L.bv, s));
      std::vector<Tensor<T>> heads;
      heads.reserve(static_cast<size_t>(cfg_.heads));
      for (int64_t hd = 0; hd < cfg_.heads; ++hd) {
        Tensor<T> qh = slice_cols(q, hd * dh, dh);
        Tensor<T> kh = slice_cols(k, hd * dh, dh);
        Tensor<T> vh = slice_cols(v, hd * dh, dh);
        Tensor<T> scores = scalar_mul(matmul(qh, transpose(kh)), scale);
        Tensor<T> weights = masked_softmax(scores, mask);
        if (trace && trace->capture_attention)
          trace->attention.push_back({layer, hd, weights});
        heads.push_back(matmul(weights, vh));
      }
      Tensor<T> ctx = concat(heads, 1);
      attn_out = add(matmul(ctx, L.wo), broadcast_rows(L.bo, s));
    }
    Tensor<T> mid = add(x, attn_out);

    Tensor<T> m = affine_norm(mid, L.norm2_gamma, L.norm2_beta);
    Tensor<T> mlp_out;
    {
      SectionGuard scope(static_cast<int>(layer), Meter::Section::mlp);
      Tensor<T> inner = gelu(add(matmul(m, L.fc1_w), broadcast_rows(L.fc1_b, s)));
      mlp_out = add(matmul(inner, L.fc2_w), broadcast_rows(L.fc2_b, s));
    }
    return add(mid, mlp_out);
  }

  EncoderConfig cfg_;
  std::mt19937_64 rng_;
  ParamStore<T> params_;
  Tensor<T> stem_cam_w_, stem_cam_b_, stem_mod_w_, stem_mod_b_;
  Tensor<T> emb_cam_, emb_mod_, cls_, fusion_bank_, pos_;
  std::vector<Layer> layers_;
  Tensor<T> final_gamma_, final_beta_;
  Tensor<T> proj_fc1_w_, proj_fc1_b_, proj_fc2_w_, proj_fc2_b_;
  std::map<std::pair<bool, int64_t>, std::shared_ptr<const AttentionMask>> mask_cache_;
  std::map<int64_t, Tensor<T>> resample_cache_;
};

}  // namespace mmjepa
