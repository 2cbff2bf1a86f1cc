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

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "mmjepa/train/trainer.hpp"

namespace {

struct Overrides {
  int64_t seed = -1;
  std::string out_dir;
  int64_t steps = -1;
};

mmjepa::RunConfig load_with_overrides(const std::string& path, const Overrides& o,
                                      bool steps_are_profile = false) {
  mmjepa::RunConfig cfg = mmjepa::load_run_config(path);
  if (o.seed >= 0) cfg.seed = static_cast<uint64_t>(o.seed);
  if (!o.out_dir.empty()) cfg.out_dir = o.out_dir;
  if (o.steps >= 0) {
    if (steps_are_profile)
      cfg.profile_steps = o.steps;
    else
      cfg.steps = o.steps;
  }
  return cfg;
}

void add_common_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "override the config seed");
  cmd->add_option("--out-dir", o.out_dir, "override the output directory");
  cmd->add_option("--steps", o.steps, "override the step count");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multimodal joint-embedding pretraining, probing and profiling"};
  app.require_subcommand(1);

  std::string train_config, probe_ckpt, probe_config, profile_config;
  Overrides train_o, probe_o, profile_o;

  CLI::App* train = app.add_subcommand("train", "run self-supervised training");
  train->add_option("config", train_config, "key=value config file")->required();
  add_common_flags(train, train_o);

  CLI::App* probe = app.add_subcommand("probe", "train frozen-feature probes on a checkpoint");
  probe->add_option("checkpoint", probe_ckpt, "checkpoint file")->required();
  probe->add_option("config", probe_config, "key=value config file")->required();
  add_common_flags(probe, probe_o);

  CLI::App* profile = app.add_subcommand("profile", "profile compute per routing mode");
  profile->add_option("config", profile_config, "key=value config file")->required();
  add_common_flags(profile, profile_o);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      mmjepa::RunConfig cfg = load_with_overrides(train_config, train_o);
      mmjepa::TrainResult result = mmjepa::run_training(cfg);
      if (result.status == mmjepa::TrainStatus::aborted_non_finite) {
        std::cerr << "aborted: non-finite loss at step " << result.steps_done
                  << "; last good checkpoint: " << result.last_good_checkpoint << "\n";
        return 2;
      }
      std::cout << "trained " << result.steps_done << " steps, loss " << result.first_loss
                << " -> " << result.last_loss << "\n";
      std::cout << "metrics: " << result.metrics_path << "\n";
      std::cout << "checkpoint: " << result.final_checkpoint << "\n";
      return 0;
    }
    if (probe->parsed()) {
      mmjepa::RunConfig cfg = load_with_overrides(probe_config, probe_o);
      mmjepa::ProbeResult result = mmjepa::run_probe(probe_ckpt, cfg);
      std::cout << "seg miou " << result.metrics.seg_miou << ", depth mae "
                << result.metrics.depth_mae_m << " m\n";
      std::cout << "metrics: " << result.metrics_path << "\n";
      return 0;
    }
    mmjepa::RunConfig cfg = load_with_overrides(profile_config, profile_o, true);
    auto reports = mmjepa::run_profile(cfg);
    for (const auto& r : reports)
      std::cout << r.mode << ": " << r.total_madds << " madds over " << r.steps << " steps, "
                << r.params << " params, peak " << r.peak_bytes << " bytes\n";
    std::cout << "profile: " << cfg.out_dir << "/profile.csv\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
