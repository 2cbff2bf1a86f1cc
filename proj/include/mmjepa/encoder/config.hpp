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

#include <string>

#include "mmjepa/core/common.hpp"

namespace mmjepa {

// pruned:     modality tokens are dropped after layer 0.
// persistent: fusion tokens keep attending to their paired patches in every
//             layer; nothing is dropped.
// rgb_only / mod_only: pruned routing with the other modality's pixels zeroed
//             before the stem (single-modality passes share the token layout).
enum class RoutingMode { pruned, persistent, rgb_only, mod_only };

inline std::string to_string(RoutingMode m) {
  switch (m) {
    case RoutingMode::pruned: return "pruned";
    case RoutingMode::persistent: return "persistent";
    case RoutingMode::rgb_only: return "rgb-only";
    case RoutingMode::mod_only: return "mod-only";
  }
  return "?";
}

inline RoutingMode parse_routing_mode(const std::string& s) {
  if (s == "pruned") return RoutingMode::pruned;
  if (s == "persistent") return RoutingMode::persistent;
  if (s == "rgb-only") return RoutingMode::rgb_only;
  if (s == "mod-only") return RoutingMode::mod_only;
  fail("unknown routing mode '" + s + "' (expected pruned|persistent|rgb-only|mod-only)");
}

struct EncoderConfig {
  int64_t image_size = 64;
  int64_t patch_size = 8;
  int64_t embed_dim = 64;  // D
  int64_t depth = 4;
  int64_t heads = 4;
  int64_t mlp_ratio = 4;
  RoutingMode routing = RoutingMode::pruned;
  int64_t projector_dim = 16;
  int64_t rgb_channels = 3;
  int64_t mod_channels = 1;

  int64_t grid() const { return image_size / patch_size; }
  int64_t patches() const { return grid() * grid(); }  // N
  int64_t sequence_tokens() const { return 1 + 3 * patches(); }
  int64_t pruned_tokens() const { return 1 + patches(); }

  void validate() const {
    require(image_size >= 1 && patch_size >= 1 && image_size % patch_size == 0,
            "image size " + std::to_string(image_size) + " must be a positive multiple of patch size " +
                std::to_string(patch_size));
    require(embed_dim >= 1 && heads >= 1 && embed_dim % heads == 0,
            "embed dim " + std::to_string(embed_dim) + " must be divisible by heads " +
                std::to_string(heads));
    require(depth >= 1, "encoder depth must be >= 1");
    require(mlp_ratio >= 1, "mlp ratio must be >= 1");
    require(projector_dim >= 1, "projector dim must be >= 1");
    require(rgb_channels == 3 && mod_channels == 1,
            "stems expect 3 rgb channels and 1 companion channel");
  }
};

}  // namespace mmjepa
