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

#include <cmath>
#include <vector>

#include "mmjepa/core/ops.hpp"
#include "mmjepa/core/random.hpp"
#include "mmjepa/encoder/encoder.hpp"

namespace mmjepa {

// Depth-to-space rearrangement: (g*g) x (C*r*r) -> (g*r)*(g*r) x C with the
// channel block of each cell read as an r x r tile.
template <typename T>
Tensor<T> depth_to_space(const Tensor<T>& x, int64_t grid, int64_t channels, int64_t upscale) {
  require(x.rows() == grid * grid, "depth_to_space expects " + std::to_string(grid * grid) +
                                       " rows, got " + std::to_string(x.rows()));
  require(x.cols() == channels * upscale * upscale,
          "depth_to_space expects " + std::to_string(channels * upscale * upscale) +
              " columns, got " + std::to_string(x.cols()));
  const int64_t out_grid = grid * upscale;
  std::vector<int64_t> idx(static_cast<size_t>(out_grid * out_grid * channels));
  size_t w = 0;
  for (int64_t yy = 0; yy < out_grid; ++yy) {
    const int64_t y = yy / upscale, dy = yy % upscale;
    for (int64_t xx = 0; xx < out_grid; ++xx) {
      const int64_t x0 = xx / upscale, dx = xx % upscale;
      const int64_t cell = y * grid + x0;
      for (int64_t c = 0; c < channels; ++c)
        idx[w++] = cell * (channels * upscale * upscale) + c * upscale * upscale + dy * upscale + dx;
    }
  }
  return gather_flat(x, std::move(idx), {out_grid * out_grid, channels});
}

// Differentiable bilinear resize of a (s*s) x C grid to (out*out) x C,
// composed from four gathers and constant tap weights.
template <typename T>
Tensor<T> bilinear_resize_grid(const Tensor<T>& x, int64_t side, int64_t out) {
  require(x.rows() == side * side, "bilinear_resize_grid expects " + std::to_string(side * side) +
                                       " rows, got " + std::to_string(x.rows()));
  const int64_t channels = x.cols();
  const int64_t total = out * out;
  std::vector<int64_t> i00(static_cast<size_t>(total * channels));
  std::vector<int64_t> i01(i00.size()), i10(i00.size()), i11(i00.size());
  std::vector<T> w00(static_cast<size_t>(total)), w01(w00.size()), w10(w00.size()), w11(w00.size());
  const double scale = static_cast<double>(side) / static_cast<double>(out);
  size_t w = 0;
  for (int64_t y = 0; y < out; ++y) {
    const double fy = (static_cast<double>(y) + 0.5) * scale - 0.5;
    const int64_t y0 = std::min(std::max<int64_t>(0, static_cast<int64_t>(std::floor(fy))), side - 1);
    const int64_t y1 = std::min(y0 + 1, side - 1);
    const double wy = std::min(1.0, std::max(0.0, fy - static_cast<double>(y0)));
    for (int64_t x_ = 0; x_ < out; ++x_) {
      const double fx = (static_cast<double>(x_) + 0.5) * scale - 0.5;
      const int64_t x0 = std::min(std::max<int64_t>(0, static_cast<int64_t>(std::floor(fx))), side - 1);
      const int64_t x1 = std::min(x0 + 1, side - 1);
      const double wx = std::min(1.0, std::max(0.0, fx - static_cast<double>(x0)));
      const int64_t row = y * out + x_;
      w00[static_cast<size_t>(row)] = static_cast<T>((1 - wy) * (1 - wx));
      w01[static_cast<size_t>(row)] = static_cast<T>((1 - wy) * wx);
      w10[static_cast<size_t>(row)] = static_cast<T>(wy * (1 - wx));
      w11[static_cast<size_t>(row)] = static_cast<T>(wy * wx);
      for (int64_t c = 0; c < channels; ++c) {
        i00[w] = (y0 * side + x0) * channels + c;
        i01[w] = (y0 * side + x1) * channels + c;
        i10[w] = (y1 * side + x0) * channels + c;
        i11[w] = (y1 * side + x1) * channels + c;
        ++w;
      }
    }
  }
  auto tap = [&](std::vector<int64_t>& idx, std::vector<T>& wt) {
    Tensor<T> g = gather_flat(x, std::move(idx), {total, channels});
    Tensor<T> wv = Tensor<T>::from({total, 1}, std::move(wt));
    return mul(g, broadcast_cols(wv, channels));
  };
  Tensor<T> acc = tap(i00, w00);
  acc = add(acc, tap(i01, w01));
  acc = add(acc, tap(i10, w10));
  acc = add(acc, tap(i11, w11));
  return acc;
}

// 3x3 same-padding convolution over a (s*s) x Cin grid via zero-padded
// im2col gather followed by one matmul with the (9*Cin) x Cout kernel.
template <typename T>
Tensor<T> conv3x3_grid(const Tensor<T>& x, int64_t side, const Tensor<T>& kernel,
                       const Tensor<T>& bias) {
  const int64_t cin = x.cols();
  require(kernel.rows() == 9 * cin, "conv3x3 kernel expects " + std::to_string(9 * cin) +
                                        " rows, got " + std::to_string(kernel.rows()));
  const int64_t total = side * side;
  std::vector<int64_t> idx(static_cast<size_t>(total * 9 * cin));
  size_t w = 0;
  for (int64_t y = 0; y < side; ++y)
    for (int64_t x_ = 0; x_ < side; ++x_)
      for (int64_t dy = -1; dy <= 1; ++dy)
        for (int64_t dx = -1; dx <= 1; ++dx) {
          const int64_t yy = y + dy, xx = x_ + dx;
          const bool in_bounds = yy >= 0 && yy < side && xx >= 0 && xx < side;
          for (int64_t c = 0; c < cin; ++c)
            idx[w++] = in_bounds ? (yy * side + xx) * cin + c : -1;
        }
  Tensor<T> cols = gather_flat(x, std::move(idx), {total, 9 * cin});
  return add(matmul(cols, kernel), broadcast_rows(bias, total));
}

// Strictly linear segmentation head: 1x1 projection to classes*r^2 channels,
// depth-to-space by r = 4, bilinear resize to the target resolution. No
// nonlinearity anywhere.
template <typename T>
class SegProbe {
 public:
  SegProbe(int64_t feature_dim, int64_t classes, uint64_t seed, int64_t upscale = 4)
      : feature_dim_(feature_dim), classes_(classes), upscale_(upscale) {
    std::mt19937_64 rng(mix_seed(seed, 0x5E6));
    w_ = params_.add("seg.weight", {feature_dim, classes * upscale * upscale},
                     trunc_normal_vec<T>(static_cast<size_t>(feature_dim * classes * upscale * upscale),
                                         0.02, 2.0, rng));
    b_ = params_.add("seg.bias", {1, classes * upscale * upscale},
                     std::vector<T>(static_cast<size_t>(classes * upscale * upscale), T(0)));
  }

  // grid: (g*g) x D frozen features; returns (out*out) x classes logits.
  Tensor<T> logits(const Tensor<T>& grid, int64_t out_size) const {
    const int64_t g = grid_side(grid);
    Tensor<T> x = add(matmul(grid, w_), broadcast_rows(b_, g * g));
    Tensor<T> up = depth_to_space(x, g, classes_, upscale_);
    return bilinear_resize_grid(up, g * upscale_, out_size);
  }

  // Pre-resize head output, spatial side 4 * sqrt(N).
  Tensor<T> raw_logits(const Tensor<T>& grid) const {
    const int64_t g = grid_side(grid);
    Tensor<T> x = add(matmul(grid, w_), broadcast_rows(b_, g * g));
    return depth_to_space(x, g, classes_, upscale_);
  }

  int64_t classes() const { return classes_; }
  ParamStore<T>& params() { return params_; }

 private:
  int64_t grid_side(const Tensor<T>& grid) const {
    require(grid.cols() == feature_dim_, "seg probe feature dim mismatch: grid has " +
                                             std::to_string(grid.cols()) + ", probe expects " +
                                             std::to_string(feature_dim_));
    int64_t g = 1;
    while (g * g < grid.rows()) ++g;
    require(g * g == grid.rows(), "seg probe needs a square grid");
    return g;
  }

  int64_t feature_dim_, classes_, upscale_;
  ParamStore<T> params_;
  Tensor<T> w_, b_;
};

// Lightweight depth head: 1x1 projection to 16 r^2 channels, depth-to-space
// by r = 4, a 3x3 refinement convolution, a final 1x1 depth head, softplus
// to keep normalized depth nonnegative.
template <typename T>
class DepthProbe {
 public:
  static constexpr int64_t kMidChannels = 16;

  DepthProbe(int64_t feature_dim, uint64_t seed, int64_t upscale = 4)
      : feature_dim_(feature_dim), upscale_(upscale) {
    std::mt19937_64 rng(mix_seed(seed, 0xDE97));
    const int64_t proj_out = kMidChannels * upscale * upscale;
    proj_w_ = params_.add("depth.proj.weight", {feature_dim, proj_out},
                          trunc_normal_vec<T>(static_cast<size_t>(feature_dim * proj_out), 0.02,
                                              2.0, rng));
    proj_b_ = params_.add("depth.proj.bias", {1, proj_out},
                          std::vector<T>(static_cast<size_t>(proj_out), T(0)));
    conv_w_ = params_.add("depth.refine.weight", {9 * kMidChannels, kMidChannels},
                          trunc_normal_vec<T>(static_cast<size_t>(9 * kMidChannels * kMidChannels),
                                              0.02, 2.0, rng));
    conv_b_ = params_.add("depth.refine.bias", {1, kMidChannels},
                          std::vector<T>(static_cast<size_t>(kMidChannels), T(0)));
    head_w_ = params_.add("depth.head.weight", {kMidChannels, 1},
                          trunc_normal_vec<T>(static_cast<size_t>(kMidChannels), 0.02, 2.0, rng));
    head_b_ = params_.add("depth.head.bias", {1, 1}, std::vector<T>(1, T(0)));
  }

  // grid: (g*g) x D frozen features; returns (out*out) x 1 normalized depth.
  Tensor<T> predict(const Tensor<T>& grid, int64_t out_size) const {
    Tensor<T> raw = predict_raw(grid);
    const int64_t g4 = raw_side(grid);
    return bilinear_resize_grid(raw, g4, out_size);
  }

  // Pre-resize output at spatial side 4 * sqrt(N), single channel.
  Tensor<T> predict_raw(const Tensor<T>& grid) const {
    require(grid.cols() == feature_dim_, "depth probe feature dim mismatch: grid has " +
                                             std::to_string(grid.cols()) + ", probe expects " +
                                             std::to_string(feature_dim_));
    int64_t g = 1;
    while (g * g < grid.rows()) ++g;
    require(g * g == grid.rows(), "depth probe needs a square grid");
    const int64_t g4 = g * upscale_;
    Tensor<T> x = add(matmul(grid, proj_w_), broadcast_rows(proj_b_, g * g));
    Tensor<T> up = depth_to_space(x, g, kMidChannels, upscale_);
    Tensor<T> refined = conv3x3_grid(up, g4, conv_w_, conv_b_);
    Tensor<T> depth = add(matmul(refined, head_w_), broadcast_rows(head_b_, g4 * g4));
    return softplus(depth);
  }

  ParamStore<T>& params() { return params_; }

 private:
  int64_t raw_side(const Tensor<T>& grid) const {
    int64_t g = 1;
    while (g * g < grid.rows()) ++g;
    return g * upscale_;
  }

  int64_t feature_dim_, upscale_;
  ParamStore<T> params_;
  Tensor<T> proj_w_, proj_b_, conv_w_, conv_b_, head_w_, head_b_;
};

// Pixelwise softmax cross-entropy against integer class targets. The rowwise
// max shift is computed outside the graph; it cancels exactly in the softmax.
template <typename T>
Tensor<T> seg_cross_entropy(const Tensor<T>& logits, const std::vector<uint8_t>& target) {
  const int64_t pixels = logits.rows(), classes = logits.cols();
  require(static_cast<int64_t>(target.size()) == pixels,
          "cross entropy target size mismatch: " + std::to_string(target.size()) + " vs " +
              std::to_string(pixels) + " pixels");
  std::vector<T> shift(static_cast<size_t>(pixels));
  double shift_sum = 0.0;
  std::vector<int64_t> target_idx(static_cast<size_t>(pixels));
  for (int64_t p = 0; p < pixels; ++p) {
    require(target[static_cast<size_t>(p)] < classes, "cross entropy target class out of range");
    T mx = logits.at(p, 0);
    for (int64_t c = 1; c < classes; ++c) mx = std::max(mx, logits.at(p, c));
    shift[static_cast<size_t>(p)] = mx;
    shift_sum += static_cast<double>(mx);
    target_idx[static_cast<size_t>(p)] = p * classes + target[static_cast<size_t>(p)];
  }
  Tensor<T> shifted = sub(logits, broadcast_cols(Tensor<T>::from({pixels, 1}, shift), classes));
  Tensor<T> lse = mmjepa::log(matmul(mmjepa::exp(shifted), Tensor<T>::full({classes, 1}, T(1))));
  Tensor<T> picked = gather_flat(logits, std::move(target_idx), {pixels, 1});
  Tensor<T> total = add(sum(lse), sub(Tensor<T>::scalar(static_cast<T>(shift_sum)), sum(picked)));
  return scalar_mul(total, T(1) / static_cast<T>(pixels));
}

template <typename T>
Tensor<T> depth_mse(const Tensor<T>& pred, const std::vector<float>& target_norm) {
  require(static_cast<int64_t>(target_norm.size()) == pred.size(),
          "depth loss target size mismatch");
  std::vector<T> t(target_norm.begin(), target_norm.end());
  return mean(square(sub(pred, Tensor<T>::from(pred.shape(), std::move(t)))));
}

struct ProbeMetrics {
  double seg_miou = 0.0;
  double depth_mae_m = 0.0;
};

// Mean IoU over the classes present in the target; empty targets are
// rejected rather than averaged as 0/0.
inline double seg_miou(const std::vector<uint8_t>& pred, const std::vector<uint8_t>& target,
                       int classes) {
  require(!target.empty(), "mIoU of an empty target is undefined");
  require(pred.size() == target.size(), "mIoU prediction/target size mismatch");
  double iou_sum = 0.0;
  int present = 0;
  for (int c = 0; c < classes; ++c) {
    int64_t inter = 0, uni = 0, tgt = 0;
    for (size_t i = 0; i < target.size(); ++i) {
      const bool p = pred[i] == c, t = target[i] == c;
      inter += p && t;
      uni += p || t;
      tgt += t;
    }
    if (tgt == 0) continue;
    ++present;
    iou_sum += static_cast<double>(inter) / static_cast<double>(uni);
  }
  require(present > 0, "mIoU of an empty target is undefined");
  return iou_sum / static_cast<double>(present);
}

// Mean absolute error in meters, denormalized by r_max.
inline double depth_mae_meters(const std::vector<double>& pred_norm,
                               const std::vector<float>& target_norm, double r_max) {
  require(!target_norm.empty(), "depth MAE of an empty target is undefined");
  require(pred_norm.size() == target_norm.size(), "depth MAE prediction/target size mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < pred_norm.size(); ++i)
    acc += std::abs(pred_norm[i] - static_cast<double>(target_norm[i]));
  return acc / static_cast<double>(pred_norm.size()) * r_max;
}

inline std::vector<uint8_t> argmax_classes(const std::vector<double>& logits, int64_t pixels,
                                           int64_t classes) {
  std::vector<uint8_t> out(static_cast<size_t>(pixels));
  for (int64_t p = 0; p < pixels; ++p) {
    int best = 0;
    double best_v = logits[static_cast<size_t>(p * classes)];
    for (int64_t c = 1; c < classes; ++c) {
      const double v = logits[static_cast<size_t>(p * classes + c)];
      if (v > best_v) {
        best_v = v;
        best = static_cast<int>(c);
      }
    }
    out[static_cast<size_t>(p)] = static_cast<uint8_t>(best);
  }
  return out;
}

}  // namespace mmjepa
