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

#include "mmjepa/encoder/encoder.hpp"

namespace mmjepa {

// Linear warmup from 1% of the base rate over warmup_frac of the run,
// then cosine decay to the floor.
inline double lr_at(int64_t step, int64_t total_steps, double base_lr, double warmup_frac,
                    double floor) {
  const int64_t warmup = std::max<int64_t>(1, static_cast<int64_t>(
                                                  std::ceil(warmup_frac * static_cast<double>(total_steps))));
  if (step < warmup) {
    const double t = static_cast<double>(step) / static_cast<double>(warmup);
    return base_lr * (0.01 + 0.99 * t);
  }
  const double t = static_cast<double>(step - warmup) /
                   static_cast<double>(std::max<int64_t>(1, total_steps - warmup));
  return floor + (base_lr - floor) * 0.5 * (1.0 + std::cos(t * 3.14159265358979323846));
}

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.05;
};

// Decoupled weight decay Adam. Parameters update in the store's fixed
// registration order, which keeps runs reproducible.
template <typename T>
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

  void step(ParamStore<T>& params, double lr) {
    const auto& items = params.items();
    if (state_.size() != items.size()) {
      state_.clear();
      state_.resize(items.size());
      for (size_t i = 0; i < items.size(); ++i) {
        state_[i].m.assign(items[i].second.value().size(), T(0));
        state_[i].v.assign(items[i].second.value().size(), T(0));
      }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (size_t i = 0; i < items.size(); ++i) {
      Tensor<T> p = items[i].second;
      auto& value = p.value();
      const auto& grad = p.grad();
      auto& m = state_[i].m;
      auto& v = state_[i].v;
      for (size_t j = 0; j < value.size(); ++j) {
        const double g = static_cast<double>(grad[j]);
        const double mj = cfg_.beta1 * static_cast<double>(m[j]) + (1.0 - cfg_.beta1) * g;
        const double vj = cfg_.beta2 * static_cast<double>(v[j]) + (1.0 - cfg_.beta2) * g * g;
        m[j] = static_cast<T>(mj);
        v[j] = static_cast<T>(vj);
        const double update = (mj / bc1) / (std::sqrt(vj / bc2) + cfg_.eps) +
                              cfg_.weight_decay * static_cast<double>(value[j]);
        value[j] = static_cast<T>(static_cast<double>(value[j]) - lr * update);
      }
    }
  }

  int64_t steps_taken() const { return t_; }

 private:
  struct State {
    std::vector<T> m, v;
  };
  AdamWConfig cfg_;
  std::vector<State> state_;
  int64_t t_ = 0;
};

}  // namespace mmjepa
