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
#include <vector>

#include "mmjepa/data/scene.hpp"  // little-endian float io helpers
#include "mmjepa/encoder/encoder.hpp"
#include "mmjepa/train/config.hpp"

namespace mmjepa {

constexpr const char* kCheckpointVersion = "1";

struct Checkpoint {
  int64_t step = 0;
  RunConfig config;
  std::vector<std::pair<std::string, std::pair<Shape, std::vector<float>>>> params;
};

// Plain-text manifest (format version, step, config snapshot, parameter
// name -> shape and byte offset) followed by the raw parameter blobs as
// little-endian 32-bit floats. load(save(x)) is bit-exact.
inline void save_checkpoint(const std::string& path, const ParamStore<float>& params,
                            const RunConfig& config, int64_t step) {
  std::ofstream os(path, std::ios::binary);
  require(os.good(), "cannot open checkpoint '" + path + "' for writing");
  os << "mmjepa-checkpoint version " << kCheckpointVersion << "\n";
  os << "step " << step << "\n";
  os << "config-begin\n" << serialize_run_config(config) << "config-end\n";
  int64_t offset = 0;
  for (const auto& item : params.items()) {
    os << "param " << item.first << " shape";
    for (int64_t d : item.second.shape()) os << " " << d;
    os << " offset " << offset << "\n";
    offset += item.second.size() * 4;
  }
  os << "data\n";
  for (const auto& item : params.items())
    detail::write_f32_le(os, item.second.value().data(), item.second.value().size());
  require(os.good(), "failed writing checkpoint '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), "cannot open checkpoint '" + path + "'");
  std::string line;
  std::getline(is, line);
  require(line == std::string("mmjepa-checkpoint version ") + kCheckpointVersion,
          "unsupported checkpoint header in '" + path + "'");
  Checkpoint ckpt;
  std::getline(is, line);
  {
    std::istringstream ls(line);
    std::string key;
    ls >> key >> ckpt.step;
    require(key == "step", "checkpoint '" + path + "' is missing its step line");
  }
  std::getline(is, line);
  require(line == "config-begin", "checkpoint '" + path + "' is missing its config block");
  std::string config_text;
  while (std::getline(is, line) && line != "config-end") config_text += line + "\n";
  ckpt.config = parse_run_config(config_text);

  while (std::getline(is, line) && line != "data") {
    std::istringstream ls(line);
    std::string key, name, word;
    ls >> key >> name >> word;
    require(key == "param" && word == "shape", "malformed checkpoint manifest line: " + line);
    Shape shape;
    std::vector<std::string> tokens;
    std::string tok;
    while (ls >> tok) tokens.push_back(tok);
    require(tokens.size() >= 3 && tokens[tokens.size() - 2] == "offset",
            "malformed checkpoint manifest line: " + line);
    for (size_t i = 0; i + 2 < tokens.size(); ++i) shape.push_back(std::stoll(tokens[i]));
    for (const auto& existing : ckpt.params)
      require(existing.first != name, "duplicate checkpoint parameter '" + name + "'");
    ckpt.params.emplace_back(name, std::make_pair(shape, std::vector<float>()));
  }
  for (auto& p : ckpt.params) {
    p.second.second.resize(static_cast<size_t>(numel(p.second.first)));
    detail::read_f32_le(is, p.second.second.data(), p.second.second.size());
  }
  require(is.good(), "failed reading checkpoint '" + path + "'");
  return ckpt;
}

// Copies checkpoint blobs into a live parameter store; names and shapes must
// match the registration exactly.
inline void load_into(const Checkpoint& ckpt, ParamStore<float>& params) {
  require(ckpt.params.size() == params.items().size(),
          "checkpoint has " + std::to_string(ckpt.params.size()) + " parameters, model has " +
              std::to_string(params.items().size()));
  for (size_t i = 0; i < ckpt.params.size(); ++i) {
    const auto& saved = ckpt.params[i];
    Tensor<float> live = params.items()[i].second;
    require(saved.first == params.items()[i].first,
            "checkpoint parameter order mismatch at '" + saved.first + "' vs '" +
                params.items()[i].first + "'");
    require(saved.second.first == live.shape(),
            "checkpoint shape mismatch for '" + saved.first + "'");
    live.value() = saved.second.second;
  }
}

}  // namespace mmjepa
