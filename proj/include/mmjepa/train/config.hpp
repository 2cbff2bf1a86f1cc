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
#include <iomanip>
#include <sstream>
#include <string>

#include "mmjepa/data/scene.hpp"
#include "mmjepa/data/views.hpp"
#include "mmjepa/encoder/config.hpp"
#include "mmjepa/loss/sigreg.hpp"

namespace mmjepa {

// Every tunable of the stack in one flat key=value file. Unknown keys are
// rejected; serialization round-trips exactly.
struct RunConfig {
  uint64_t seed = 0;
  std::string out_dir = "run";
  int64_t steps = 1000;
  int64_t epochs = 0;  // when > 0, overrides steps as epochs * dataset_scenes / batch_size
  int64_t dataset_scenes = 512;
  int64_t batch_size = 16;

  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double weight_decay = 0.05;
  double warmup_frac = 0.05;
  double lr_floor = 1e-7;

  int64_t image_size = 64;
  int64_t patch_size = 8;
  int64_t embed_dim = 64;
  int64_t depth = 4;
  int64_t heads = 4;
  int64_t mlp_ratio = 4;
  int64_t projector_dim = 16;
  std::string routing_mode = "pruned";
  std::string objective = "joint-cls";  // joint-cls | three-pass

  double lambda = 0.1;
  int64_t sigreg_directions = 16;
  int64_t sigreg_knots = 64;
  double sigreg_tmax = 4.0;
  std::string direction_policy = "resample-per-step";  // resample-per-step | fixed
  uint64_t direction_seed = 1234;

  int64_t v_global = 2;
  int64_t v_local = 4;
  int64_t local_size = 32;
  bool photometric = true;
  std::string companion = "depth";  // depth | thermal
  double return_prob = 0.3;
  double r_max = 80.0;

  int64_t val_every = 100;
  int64_t checkpoint_every = 200;

  int64_t probe_epochs = 5;
  double probe_lr = 1e-3;
  int64_t probe_batch = 8;
  int64_t probe_train_scenes = 128;
  int64_t probe_val_scenes = 32;

  std::string profile_modes = "pruned,persistent";
  int64_t profile_steps = 2;

  bool operator==(const RunConfig&) const = default;

  int64_t effective_steps() const {
    if (epochs > 0) return epochs * dataset_scenes / batch_size;
    return steps;
  }

  EncoderConfig encoder_config() const {
    EncoderConfig cfg;
    cfg.image_size = image_size;
    cfg.patch_size = patch_size;
    cfg.embed_dim = embed_dim;
    cfg.depth = depth;
    cfg.heads = heads;
    cfg.mlp_ratio = mlp_ratio;
    cfg.projector_dim = projector_dim;
    cfg.routing = parse_routing_mode(routing_mode);
    return cfg;
  }

  SigRegConfig sigreg_config() const {
    DirectionPolicy policy;
    if (direction_policy == "resample-per-step")
      policy = DirectionPolicy::resample_per_step;
    else if (direction_policy == "fixed")
      policy = DirectionPolicy::fixed;
    else
      fail("unknown direction policy '" + direction_policy + "'");
    return default_sigreg_config(lambda, sigreg_directions, sigreg_knots, sigreg_tmax,
                                 projector_dim, policy);
  }

  ViewConfig view_config() const {
    ViewConfig cfg;
    cfg.v_global = v_global;
    cfg.v_local = v_local;
    cfg.global = {0.4, 1.0, image_size};
    cfg.local = {0.05, 0.4, local_size};
    cfg.photometric = photometric;
    cfg.companion = parse_companion_kind(companion);
    return cfg;
  }

  DepthRenderConfig depth_config() const {
    DepthRenderConfig cfg;
    cfg.r_max = r_max;
    cfg.return_probability = return_prob;
    return cfg;
  }

  void validate() const {
    require(batch_size >= 1, "batch_size must be >= 1");
    require(effective_steps() >= 1, "run needs at least one step");
    require(dataset_scenes >= 1, "dataset_scenes must be >= 1");
    require(objective == "joint-cls" || objective == "three-pass",
            "objective must be joint-cls or three-pass");
    require(val_every >= 1 && checkpoint_every >= 1,
            "val_every and checkpoint_every must be >= 1");
    require(probe_epochs >= 1 && probe_batch >= 1 && probe_train_scenes >= 1 &&
                probe_val_scenes >= 1,
            "probe settings must be >= 1");
    require(local_size >= patch_size && local_size % patch_size == 0,
            "local_size must be a positive multiple of patch_size");
    encoder_config().validate();
    sigreg_config().validate();
    view_config().validate();
    depth_config().validate();
  }
};

namespace detail {

inline std::string fmt_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "on" || v == "1") return true;
  if (v == "false" || v == "off" || v == "0") return false;
  fail("config key '" + key + "' expects a boolean, got '" + v + "'");
}

}  // namespace detail

inline std::string serialize_run_config(const RunConfig& c) {
  std::ostringstream os;
  os << "seed=" << c.seed << "\n";
  os << "out_dir=" << c.out_dir << "\n";
  os << "steps=" << c.steps << "\n";
  os << "epochs=" << c.epochs << "\n";
  os << "dataset_scenes=" << c.dataset_scenes << "\n";
  os << "batch_size=" << c.batch_size << "\n";
  os << "lr=" << detail::fmt_double(c.lr) << "\n";
  os << "beta1=" << detail::fmt_double(c.beta1) << "\n";
  os << "beta2=" << detail::fmt_double(c.beta2) << "\n";
  os << "weight_decay=" << detail::fmt_double(c.weight_decay) << "\n";
  os << "warmup_frac=" << detail::fmt_double(c.warmup_frac) << "\n";
  os << "lr_floor=" << detail::fmt_double(c.lr_floor) << "\n";
  os << "image_size=" << c.image_size << "\n";
  os << "patch_size=" << c.patch_size << "\n";
  os << "embed_dim=" << c.embed_dim << "\n";
  os << "depth=" << c.depth << "\n";
  os << "heads=" << c.heads << "\n";
  os << "mlp_ratio=" << c.mlp_ratio << "\n";
  os << "projector_dim=" << c.projector_dim << "\n";
  os << "routing_mode=" << c.routing_mode << "\n";
  os << "objective=" << c.objective << "\n";
  os << "lambda=" << detail::fmt_double(c.lambda) << "\n";
  os << "sigreg_directions=" << c.sigreg_directions << "\n";
  os << "sigreg_knots=" << c.sigreg_knots << "\n";
  os << "sigreg_tmax=" << detail::fmt_double(c.sigreg_tmax) << "\n";
  os << "direction_policy=" << c.direction_policy << "\n";
  os << "direction_seed=" << c.direction_seed << "\n";
  os << "v_global=" << c.v_global << "\n";
  os << "v_local=" << c.v_local << "\n";
  os << "local_size=" << c.local_size << "\n";
  os << "photometric=" << (c.photometric ? "true" : "false") << "\n";
  os << "companion=" << c.companion << "\n";
  os << "return_prob=" << detail::fmt_double(c.return_prob) << "\n";
  os << "r_max=" << detail::fmt_double(c.r_max) << "\n";
  os << "val_every=" << c.val_every << "\n";
  os << "checkpoint_every=" << c.checkpoint_every << "\n";
  os << "probe_epochs=" << c.probe_epochs << "\n";
  os << "probe_lr=" << detail::fmt_double(c.probe_lr) << "\n";
  os << "probe_batch=" << c.probe_batch << "\n";
  os << "probe_train_scenes=" << c.probe_train_scenes << "\n";
  os << "probe_val_scenes=" << c.probe_val_scenes << "\n";
  os << "profile_modes=" << c.profile_modes << "\n";
  os << "profile_steps=" << c.profile_steps << "\n";
  return os.str();
}

inline RunConfig parse_run_config(std::istream& is) {
  RunConfig c;
  std::string line;
  std::string unknown;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const size_t eq = t.find('=');
    require(eq != std::string::npos,
            "config line " + std::to_string(line_no) + " is not key=value: '" + t + "'");
    const std::string key = detail::trim(t.substr(0, eq));
    const std::string value = detail::trim(t.substr(eq + 1));
    auto as_i64 = [&]() { return static_cast<int64_t>(std::stoll(value)); };
    auto as_u64 = [&]() { return static_cast<uint64_t>(std::stoull(value)); };
    auto as_f64 = [&]() { return std::stod(value); };
    try {
      if (key == "seed") c.seed = as_u64();
      else if (key == "out_dir") c.out_dir = value;
      else if (key == "steps") c.steps = as_i64();
      else if (key == "epochs") c.epochs = as_i64();
      else if (key == "dataset_scenes") c.dataset_scenes = as_i64();
      else if (key == "batch_size") c.batch_size = as_i64();
      else if (key == "lr") c.lr = as_f64();
      else if (key == "beta1") c.beta1 = as_f64();
      else if (key == "beta2") c.beta2 = as_f64();
      else if (key == "weight_decay") c.weight_decay = as_f64();
      else if (key == "warmup_frac") c.warmup_frac = as_f64();
      else if (key == "lr_floor") c.lr_floor = as_f64();
      else if (key == "image_size") c.image_size = as_i64();
      else if (key == "patch_size") c.patch_size = as_i64();
      else if (key == "embed_dim") c.embed_dim = as_i64();
      else if (key == "depth") c.depth = as_i64();
      else if (key == "heads") c.heads = as_i64();
      else if (key == "mlp_ratio") c.mlp_ratio = as_i64();
      else if (key == "projector_dim") c.projector_dim = as_i64();
      else if (key == "routing_mode") c.routing_mode = value;
      else if (key == "objective") c.objective = value;
      else if (key == "lambda") c.lambda = as_f64();
      else if (key == "sigreg_directions") c.sigreg_directions = as_i64();
      else if (key == "sigreg_knots") c.sigreg_knots = as_i64();
      else if (key == "sigreg_tmax") c.sigreg_tmax = as_f64();
      else if (key == "direction_policy") c.direction_policy = value;
      else if (key == "direction_seed") c.direction_seed = as_u64();
      else if (key == "v_global") c.v_global = as_i64();
      else if (key == "v_local") c.v_local = as_i64();
      else if (key == "local_size") c.local_size = as_i64();
      else if (key == "photometric") c.photometric = detail::parse_bool(key, value);
      else if (key == "companion") c.companion = value;
      else if (key == "return_prob") c.return_prob = as_f64();
      else if (key == "r_max") c.r_max = as_f64();
      else if (key == "val_every") c.val_every = as_i64();
      else if (key == "checkpoint_every") c.checkpoint_every = as_i64();
      else if (key == "probe_epochs") c.probe_epochs = as_i64();
      else if (key == "probe_lr") c.probe_lr = as_f64();
      else if (key == "probe_batch") c.probe_batch = as_i64();
      else if (key == "probe_train_scenes") c.probe_train_scenes = as_i64();
      else if (key == "probe_val_scenes") c.probe_val_scenes = as_i64();
      else if (key == "profile_modes") c.profile_modes = value;
      else if (key == "profile_steps") c.profile_steps = as_i64();
      else unknown += (unknown.empty() ? "" : ", ") + key;
    } catch (const std::invalid_argument&) {
      throw;
    } catch (const std::exception&) {
      fail("config key '" + key + "' has an unparsable value '" + value + "'");
    }
  }
  require(unknown.empty(), "unknown config keys: " + unknown);
  return c;
}

inline RunConfig parse_run_config(const std::string& text) {
  std::istringstream is(text);
  return parse_run_config(is);
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  require(is.good(), "cannot open config file '" + path + "'");
  return parse_run_config(is);
}

}  // namespace mmjepa
