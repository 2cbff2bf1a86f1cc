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

#include "mmjepa/core/common.hpp"
#include "mmjepa/encoder/config.hpp"

namespace mmjepa {

// Token slot layout before pruning: [CLS(1), F(N), C(N), M(N)].
inline int64_t cls_slot() { return 0; }
inline int64_t fusion_slot(int64_t i) { return i; }                       // i in 1..N
inline int64_t cam_slot(int64_t i, int64_t n) { return n + i; }           // i in 1..N
inline int64_t mod_slot(int64_t i, int64_t n) { return 2 * n + i; }       // i in 1..N

// Query-by-key admissibility for one layer.
//
// Pruned routing, layer 0 (1+3N tokens):
//   CLS       -> everything
//   FUSION(i) -> CLS, itself, CAM(i), MOD(i)
//   CAM(i)    -> CLS + all CAM   (one round of intra-modality mixing)
//   MOD(i)    -> CLS + all MOD
// Pruned routing, layers >= 1: full attention over the surviving 1+N tokens.
// Persistent routing, every layer (1+3N tokens): as layer 0 except FUSION(i)
// also attends to every fusion token.
// rgb-only / mod-only reuse the pruned masks; zeroing happens at the pixels.
inline AttentionMask make_mask(RoutingMode mode, int64_t layer, int64_t n_patches) {
  require(layer >= 0, "mask layer must be >= 0");
  require(n_patches >= 1, "mask needs at least one patch");
  const int64_t n = n_patches;

  const bool persistent = mode == RoutingMode::persistent;
  if (!persistent && layer >= 1) {
    return AttentionMask::full(1 + n, 1 + n);
  }

  const int64_t tokens = 1 + 3 * n;
  AttentionMask mask(tokens, tokens);
  for (int64_t k = 0; k < tokens; ++k) mask.set(cls_slot(), k, true);
  for (int64_t i = 1; i <= n; ++i) {
    const int64_t q = fusion_slot(i);
    mask.set(q, cls_slot(), true);
    if (persistent) {
      for (int64_t f = 1; f <= n; ++f) mask.set(q, fusion_slot(f), true);
    } else {
      mask.set(q, fusion_slot(i), true);
    }
    mask.set(q, cam_slot(i, n), true);
    mask.set(q, mod_slot(i, n), true);
  }
  for (int64_t i = 1; i <= n; ++i) {
    const int64_t q = cam_slot(i, n);
    mask.set(q, cls_slot(), true);
    for (int64_t c = 1; c <= n; ++c) mask.set(q, cam_slot(c, n), true);
  }
  for (int64_t i = 1; i <= n; ++i) {
    const int64_t q = mod_slot(i, n);
    mask.set(q, cls_slot(), true);
    for (int64_t c = 1; c <= n; ++c) mask.set(q, mod_slot(c, n), true);
  }
  return mask;
}

}  // namespace mmjepa
