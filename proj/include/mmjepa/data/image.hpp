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

#include <cstdint>
#include <vector>

#include "mmjepa/core/common.hpp"

namespace mmjepa {

// Dense interleaved H x W x C float image; pixels live outside the autodiff
// graph and are converted at the patch stems.
struct Image {
  int64_t height = 0;
  int64_t width = 0;
  int64_t channels = 0;
  std::vector<float> data;

  Image() = default;
  Image(int64_t h, int64_t w, int64_t c)
      : height(h), width(w), channels(c), data(static_cast<size_t>(h * w * c), 0.0f) {}

  float at(int64_t y, int64_t x, int64_t c) const {
    return data[static_cast<size_t>((y * width + x) * channels + c)];
  }
  float& at(int64_t y, int64_t x, int64_t c) {
    return data[static_cast<size_t>((y * width + x) * channels + c)];
  }

  bool same_dims(const Image& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }

  float max_value() const {
    float m = 0.0f;
    for (float v : data) m = std::max(m, v);
    return m;
  }
};

}  // namespace mmjepa
