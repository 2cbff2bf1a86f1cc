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

// Test-only reference implementations, written as plain double loops and
// kept independent of the graph-based implementations they check.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace oracles {

// Row-major batch x dim matrix of standard-normal draws.
inline std::vector<double> normal_matrix(int64_t batch, int64_t dim, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> out(static_cast<size_t>(batch * dim));
  for (auto& v : out) v = normal(rng);
  return out;
}

// Characteristic-function mismatch against N(0, I), straight from the
// definition: projections onto each direction, batch means of cos and sin at
// each knot, quadrature-weighted squared errors, averaged over directions.
inline double naive_sigreg(const std::vector<double>& z, int64_t batch, int64_t dim,
                           const std::vector<double>& dirs, int64_t num_directions,
                           const std::vector<double>& knots,
                           const std::vector<double>& weights) {
  double loss = 0.0;
  std::vector<double> proj(static_cast<size_t>(batch));
  for (int64_t k = 0; k < num_directions; ++k) {
    for (int64_t n = 0; n < batch; ++n) {
      double p = 0.0;
      for (int64_t c = 0; c < dim; ++c)
        p += z[static_cast<size_t>(n * dim + c)] * dirs[static_cast<size_t>(k * dim + c)];
      proj[static_cast<size_t>(n)] = p;
    }
    for (size_t j = 0; j < knots.size(); ++j) {
      const double t = knots[j];
      double c_mean = 0.0, s_mean = 0.0;
      for (int64_t n = 0; n < batch; ++n) {
        c_mean += std::cos(t * proj[static_cast<size_t>(n)]);
        s_mean += std::sin(t * proj[static_cast<size_t>(n)]);
      }
      c_mean /= static_cast<double>(batch);
      s_mean /= static_cast<double>(batch);
      const double target = std::exp(-0.5 * t * t);
      loss += weights[j] * ((c_mean - target) * (c_mean - target) + s_mean * s_mean);
    }
  }
  return loss / static_cast<double>(num_directions);
}

// Mean loss of fresh standard-normal batches; the sampling floor used by the
// Gaussian-floor checks.
inline double sigreg_gaussian_floor(int64_t batch, int64_t dim,
                                    const std::vector<double>& dirs, int64_t num_directions,
                                    const std::vector<double>& knots,
                                    const std::vector<double>& weights, int draws,
                                    uint64_t seed) {
  double acc = 0.0;
  for (int i = 0; i < draws; ++i) {
    auto z = normal_matrix(batch, dim, seed + static_cast<uint64_t>(i) * 7919ULL + 1ULL);
    acc += naive_sigreg(z, batch, dim, dirs, num_directions, knots, weights);
  }
  return acc / static_cast<double>(draws);
}

// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < n; ++i) {
    num += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    den += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return num / den;
}

}  // namespace oracles
