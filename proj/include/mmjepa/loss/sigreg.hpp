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
#include <random>
#include <utility>
#include <vector>

#include "mmjepa/core/ops.hpp"
#include "mmjepa/core/random.hpp"

namespace mmjepa {

enum class DirectionPolicy { resample_per_step, fixed };

// Configuration of the characteristic-function matching loss: K random
// projection directions, T evaluation knots t_j with quadrature weights w_j,
// embedding dimension d, and the trade-off weight lambda against the
// invariance term.
struct SigRegConfig {
  double lambda = 0.1;
  int64_t num_directions = 16;   // K
  int64_t num_knots = 64;        // T
  std::vector<double> knots;     // t_j, strictly increasing, > 0
  std::vector<double> weights;   // w_j > 0
  int64_t dim = 16;              // d
  DirectionPolicy direction_policy = DirectionPolicy::resample_per_step;

  void validate() const {
    require(lambda >= 0.0 && lambda <= 1.0, "sigreg lambda must lie in [0,1]");
    require(num_directions >= 1, "sigreg needs at least one direction");
    require(dim >= 1, "sigreg dim must be >= 1");
    require(static_cast<int64_t>(knots.size()) == num_knots &&
                knots.size() == weights.size(),
            "sigreg knot/weight arrays do not match the configured count");
    require(num_knots >= 2, "sigreg needs at least two knots");
    for (size_t j = 0; j < knots.size(); ++j) {
      require(knots[j] > 0.0, "sigreg knots must be positive");
      if (j) require(knots[j] > knots[j - 1], "sigreg knots must be strictly increasing");
      require(weights[j] > 0.0, "sigreg weights must be positive");
    }
  }
};

// T uniformly spaced knots on (0, t_max] with trapezoid weights rescaled to
// sum to t_max.
inline std::pair<std::vector<double>, std::vector<double>> make_knots(int64_t count,
                                                                      double t_max) {
  require(count >= 2, "make_knots needs at least two knots");
  require(t_max > 0.0, "make_knots needs t_max > 0");
  const double h = t_max / static_cast<double>(count);
  std::vector<double> knots(static_cast<size_t>(count));
  std::vector<double> weights(static_cast<size_t>(count));
  for (int64_t j = 0; j < count; ++j) knots[static_cast<size_t>(j)] = h * static_cast<double>(j + 1);
  const double scale = static_cast<double>(count) / static_cast<double>(count - 1);
  for (int64_t j = 0; j < count; ++j) {
    const bool endpoint = (j == 0 || j == count - 1);
    weights[static_cast<size_t>(j)] = (endpoint ? 0.5 * h : h) * scale;
  }
  return {std::move(knots), std::move(weights)};
}

inline SigRegConfig default_sigreg_config(double lambda = 0.1, int64_t num_directions = 16,
                                          int64_t num_knots = 64, double t_max = 4.0,
                                          int64_t dim = 16,
                                          DirectionPolicy policy = DirectionPolicy::resample_per_step) {
  SigRegConfig cfg;
  cfg.lambda = lambda;
  cfg.num_directions = num_directions;
  cfg.num_knots = num_knots;
  cfg.dim = dim;
  cfg.direction_policy = policy;
  auto kw = make_knots(num_knots, t_max);
  cfg.knots = std::move(kw.first);
  cfg.weights = std::move(kw.second);
  cfg.validate();
  return cfg;
}

// K isotropic unit directions in R^d, deterministic in the seed. Rows are
// standard-normal draws normalized to unit Euclidean norm.
template <typename T>
Tensor<T> sample_directions(int64_t count, int64_t dim, uint64_t seed) {
  require(count >= 1 && dim >= 1, "sample_directions needs count >= 1 and dim >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<T> out(static_cast<size_t>(count * dim));
  for (int64_t k = 0; k < count; ++k) {
    double norm2 = 0.0;
    std::vector<double> row(static_cast<size_t>(dim));
    do {
      norm2 = 0.0;
      for (auto& v : row) {
        v = normal(rng);
        norm2 += v * v;
      }
    } while (norm2 < 1e-24);
    const double inv = 1.0 / std::sqrt(norm2);
    for (int64_t j = 0; j < dim; ++j)
      out[static_cast<size_t>(k * dim + j)] = static_cast<T>(row[static_cast<size_t>(j)] * inv);
  }
  return Tensor<T>::from({count, dim}, std::move(out));
}

// Characteristic-function mismatch of the rows of z against N(0, I):
//   (1/K) sum_k sum_j w_j [ (c_kj - exp(-t_j^2/2))^2 + s_kj^2 ]
// where c_kj and s_kj are the batch means of cos and sin of t_j * <w_k, z_n>.
template <typename T>
Tensor<T> sigreg_loss(const Tensor<T>& z, const Tensor<T>& dirs, const SigRegConfig& cfg) {
  cfg.validate();
  detail::check_rank2(z, "sigreg_loss");
  detail::check_rank2(dirs, "sigreg_loss");
  const int64_t batch = z.rows();
  require(batch >= 2, "sigreg_loss needs a batch of at least 2 embeddings, got " +
                          std::to_string(batch));
  require(z.cols() == cfg.dim, "sigreg_loss embedding dim " + std::to_string(z.cols()) +
                                   " does not match config dim " + std::to_string(cfg.dim));
  require(dirs.cols() == cfg.dim && dirs.rows() == cfg.num_directions,
          "sigreg_loss direction matrix " + shape_str(dirs.shape()) + " does not match config");

  Tensor<T> projections = matmul(z, transpose(dirs));  // batch x K
  Tensor<T> batch_mean = Tensor<T>::full({1, batch}, T(1) / static_cast<T>(batch));
  Tensor<T> loss = Tensor<T>::scalar(T(0));
  for (int64_t j = 0; j < cfg.num_knots; ++j) {
    const T t = static_cast<T>(cfg.knots[static_cast<size_t>(j)]);
    const T w = static_cast<T>(cfg.weights[static_cast<size_t>(j)]);
    const T target = static_cast<T>(std::exp(-0.5 * static_cast<double>(t) * static_cast<double>(t)));
    Tensor<T> scaled = scalar_mul(projections, t);
    Tensor<T> cos_mean = matmul(batch_mean, cos(scaled));  // 1 x K
    Tensor<T> sin_mean = matmul(batch_mean, sin(scaled));
    Tensor<T> cos_err = sub(cos_mean, Tensor<T>::full({1, cfg.num_directions}, target));
    Tensor<T> term = add(sum(square(cos_err)), sum(square(sin_mean)));
    loss = add(loss, scalar_mul(term, w));
  }
  return scalar_mul(loss, T(1) / static_cast<T>(cfg.num_directions));
}

// One batch of projected view embeddings: V_g global views and V_l local
// views, each a (batch x d) matrix with samples as rows.
template <typename T>
struct ViewBatch {
  std::vector<Tensor<T>> globals;
  std::vector<Tensor<T>> locals;

  int64_t view_count() const {
    return static_cast<int64_t>(globals.size() + locals.size());
  }
};

// Mean squared deviation of every view from the global-view center,
// averaged over views and over the batch axis. The center participates in
// the gradient; there is no stop-gradient anywhere.
template <typename T>
Tensor<T> invariance_loss(const ViewBatch<T>& views) {
  require(!views.globals.empty(), "invariance_loss needs at least one global view");
  const Shape shape = views.globals.front().shape();
  for (const auto& v : views.globals)
    require(v.shape() == shape, "invariance_loss views must share one shape");
  for (const auto& v : views.locals)
    require(v.shape() == shape, "invariance_loss views must share one shape");

  Tensor<T> center = views.globals.front();
  for (size_t i = 1; i < views.globals.size(); ++i) center = add(center, views.globals[i]);
  center = scalar_mul(center, T(1) / static_cast<T>(views.globals.size()));

  Tensor<T> total = Tensor<T>::scalar(T(0));
  for (const auto& v : views.globals) total = add(total, sum(square(sub(v, center))));
  for (const auto& v : views.locals) total = add(total, sum(square(sub(v, center))));
  const int64_t batch = shape.at(0);
  return scalar_mul(total, T(1) / (static_cast<T>(views.view_count()) * static_cast<T>(batch)));
}

// lambda * sigreg over all views stacked along the batch axis
// + (1 - lambda) * invariance toward the global-view center.
template <typename T>
Tensor<T> combined_loss(const ViewBatch<T>& views, const Tensor<T>& dirs,
                        const SigRegConfig& cfg) {
  std::vector<Tensor<T>> all;
  all.reserve(static_cast<size_t>(views.view_count()));
  for (const auto& v : views.globals) all.push_back(v);
  for (const auto& v : views.locals) all.push_back(v);
  Tensor<T> stacked = concat(all, 0);
  Tensor<T> sig = sigreg_loss(stacked, dirs, cfg);
  Tensor<T> inv = invariance_loss(views);
  return add(scalar_mul(sig, static_cast<T>(cfg.lambda)),
             scalar_mul(inv, static_cast<T>(1.0 - cfg.lambda)));
}

// Mean of the characteristic-function loss over the joint, image-only and
// companion-only passes, all sharing one direction matrix. Written in the
// centered form, which returns the single-pass value exactly when the three
// losses coincide.
template <typename T>
Tensor<T> three_pass_sigreg(const Tensor<T>& z_joint, const Tensor<T>& z_rgb,
                            const Tensor<T>& z_mod, const Tensor<T>& dirs,
                            const SigRegConfig& cfg) {
  require(z_joint.shape() == z_rgb.shape() && z_joint.shape() == z_mod.shape(),
          "three_pass_sigreg embedding shapes differ: " + shape_str(z_joint.shape()) + ", " +
              shape_str(z_rgb.shape()) + ", " + shape_str(z_mod.shape()));
  Tensor<T> joint = sigreg_loss(z_joint, dirs, cfg);
  Tensor<T> rgb = sigreg_loss(z_rgb, dirs, cfg);
  Tensor<T> mod = sigreg_loss(z_mod, dirs, cfg);
  Tensor<T> spread = add(sub(rgb, joint), sub(mod, joint));
  return add(joint, scalar_mul(spread, T(1) / T(3)));
}

}  // namespace mmjepa
