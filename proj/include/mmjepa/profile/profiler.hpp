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

#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "mmjepa/core/meter.hpp"
#include "mmjepa/core/tensor.hpp"
#include "mmjepa/encoder/config.hpp"

namespace mmjepa {

// Analytic multiply-add model, same conventions as the runtime counters in
// core/meter.hpp. Costs are counts, not wall time; ratios and orderings are
// the testable content.

// Score/mix work of one attention layer: QK^T plus AV, 2 * tokens^2 * D.
inline int64_t attention_score_mix_cost(int64_t tokens, int64_t embed_dim) {
  require(tokens >= 1 && embed_dim >= 1, "attention cost needs tokens >= 1 and D >= 1");
  return 2 * tokens * tokens * embed_dim;
}

// Q/K/V/output projections: 4 * tokens * D^2.
inline int64_t attention_projection_cost(int64_t tokens, int64_t embed_dim) {
  require(tokens >= 1 && embed_dim >= 1, "attention cost needs tokens >= 1 and D >= 1");
  return 4 * tokens * embed_dim * embed_dim;
}

// Full per-layer attention forward cost. The result is independent of the
// head count (heads partition D); the parameter is kept for the interface.
inline int64_t attention_cost(int64_t tokens, int64_t embed_dim, int64_t heads) {
  require(heads >= 1, "attention cost needs heads >= 1");
  return attention_score_mix_cost(tokens, embed_dim) +
         attention_projection_cost(tokens, embed_dim);
}

// Forward cost of the characteristic-function loss:
//   c1 * B * K * d   (projections, c1 = 1)
// + c2 * B * K * T   (per-knot scale, cos, sin and two batch means, c2 = 5).
// Lower-order bookkeeping terms of order K*T are not modeled.
inline int64_t sigreg_cost(int64_t batch, int64_t directions, int64_t knots, int64_t dim) {
  require(batch >= 1 && directions >= 1 && knots >= 1 && dim >= 1,
          "sigreg cost needs all of B, K, T, d >= 1");
  return batch * directions * dim + 5 * batch * directions * knots;
}

// Peak bytes of live value arrays over the graph below `root`, from the
// graph's own liveness (creation in topological order, release after the
// last consumer), independent of OS allocation behavior.
template <typename T>
int64_t peak_live_value_bytes(const Tensor<T>& root) {
  auto order = detail::topo_order<T>(root.node().get());
  std::unordered_map<const void*, size_t> position;
  position.reserve(order.size());
  for (size_t i = 0; i < order.size(); ++i) position[order[i]] = i;
  std::vector<size_t> last_use(order.size());
  for (size_t i = 0; i < order.size(); ++i) last_use[i] = i;
  for (size_t i = 0; i < order.size(); ++i)
    for (const auto& in : order[i]->inputs) {
      const size_t p = position.at(in.get());
      last_use[p] = std::max(last_use[p], i);
    }
  std::vector<std::vector<size_t>> release(order.size());
  for (size_t i = 0; i < order.size(); ++i) release[last_use[i]].push_back(i);
  int64_t running = 0, peak = 0;
  for (size_t i = 0; i < order.size(); ++i) {
    running += static_cast<int64_t>(order[i]->value.size() * sizeof(T));
    peak = std::max(peak, running);
    for (size_t r : release[i])
      running -= static_cast<int64_t>(order[r]->value.size() * sizeof(T));
  }
  return peak;
}

struct LayerCost {
  int64_t layer = 0;
  int64_t tokens = 0;
  int64_t attn_madds = 0;       // analytic, as computed
  double ratio_vs_full = 1.0;   // no-prune score/mix cost over this layer's
};

struct CostReport {
  std::string mode;
  std::vector<LayerCost> layers;
  int64_t layer0_minimal_madds = 0;  // pruned: cost if dropped query rows were skipped
  int64_t total_madds = 0;           // counted over the profiled run (fwd + bwd)
  int64_t sigreg_madds = 0;          // counted, forward
  int64_t params = 0;
  int64_t peak_bytes = 0;
  int64_t steps = 0;
  int64_t encode_forwards = 0;
};

// Analytic per-layer attention costs of one encode at the training grid.
// Layer 0 of pruned routing computes all 1+3N query rows even though the
// modality rows feed nothing after pruning; `layer0_minimal_madds` reports
// the cost with those query rows skipped.
inline std::vector<LayerCost> analytic_layer_costs(const EncoderConfig& cfg,
                                                   int64_t* layer0_minimal = nullptr) {
  const int64_t n = cfg.patches();
  const int64_t full = 1 + 3 * n;
  const int64_t kept = 1 + n;
  const int64_t d = cfg.embed_dim;
  const bool persistent = cfg.routing == RoutingMode::persistent;
  std::vector<LayerCost> out;
  for (int64_t layer = 0; layer < cfg.depth; ++layer) {
    LayerCost lc;
    lc.layer = layer;
    lc.tokens = persistent ? full : (layer == 0 ? full : kept);
    lc.attn_madds = attention_cost(lc.tokens, d, cfg.heads);
    lc.ratio_vs_full = static_cast<double>(attention_score_mix_cost(full, d)) /
                       static_cast<double>(attention_score_mix_cost(lc.tokens, d));
    out.push_back(lc);
  }
  if (layer0_minimal) {
    // K and V are projected for every token, Q and the output projection
    // only for the surviving rows; scores shrink to kept x full.
    *layer0_minimal = persistent ? attention_cost(full, d, cfg.heads)
                                 : 2 * kept * full * d + 2 * full * d * d + 2 * kept * d * d;
  }
  return out;
}

inline void write_profile_csv(const std::string& path, const std::vector<CostReport>& reports) {
  std::ofstream os(path);
  require(os.good(), "cannot open '" + path + "' for writing");
  os << "mode,layer,tokens,attn_madds,total_madds,params,peak_bytes,ratio_vs_full\n";
  for (const auto& r : reports) {
    for (const auto& l : r.layers)
      os << r.mode << "," << l.layer << "," << l.tokens << "," << l.attn_madds << ",,,,"
         << l.ratio_vs_full << "\n";
    os << r.mode << ",total,,," << r.total_madds << "," << r.params << "," << r.peak_bytes
       << ",\n";
  }
  require(os.good(), "failed writing '" + path + "'");
}

}  // namespace mmjepa
