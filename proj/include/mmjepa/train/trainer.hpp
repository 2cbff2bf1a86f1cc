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

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <string>
#include <vector>

#include "mmjepa/data/scene.hpp"
#include "mmjepa/data/views.hpp"
#include "mmjepa/encoder/encoder.hpp"
#include "mmjepa/loss/sigreg.hpp"
#include "mmjepa/probe/probes.hpp"
#include "mmjepa/profile/profiler.hpp"
#include "mmjepa/train/checkpoint.hpp"
#include "mmjepa/train/config.hpp"
#include "mmjepa/train/optimizer.hpp"

namespace mmjepa {

enum class TrainStatus { completed, aborted_non_finite };

struct TrainResult {
  TrainStatus status = TrainStatus::completed;
  int64_t steps_done = 0;
  double first_loss = 0.0;
  double last_loss = 0.0;
  double last_sigreg = 0.0;
  double last_inv = 0.0;
  std::string metrics_path;
  std::string final_checkpoint;
  std::string last_good_checkpoint;
};

struct ProbeResult {
  ProbeMetrics metrics;
  std::string metrics_path;
  double encoder_grad_abs_sum = 0.0;
  int64_t validation_rows = 0;
};

namespace detail {

inline std::string fmt_float(double v) {
  std::ostringstream os;
  os << std::setprecision(9) << v;
  return os.str();
}

}  // namespace detail

// One SSL training run: owns the encoder, the optimizer, and the per-step
// loss construction. One optimizer thread owns the weights; scene and view
// generation is seed-indexed so worker parallelism could never change the
// produced data.
class TrainLoop {
 public:
  explicit TrainLoop(RunConfig cfg)
      : cfg_(std::move(cfg)),
        encoder_(cfg_.encoder_config(), cfg_.seed),
        adam_(AdamWConfig{cfg_.beta1, cfg_.beta2, 1e-8, cfg_.weight_decay}),
        sig_cfg_(cfg_.sigreg_config()),
        view_cfg_(cfg_.view_config()),
        depth_cfg_(cfg_.depth_config()) {
    cfg_.validate();
  }

  struct StepOutcome {
    double loss = 0.0;
    double sigreg = 0.0;
    double inv = 0.0;
    double lr = 0.0;
    bool finite = true;
  };

  StepOutcome run_step(int64_t step, bool keep_graph = false) {
    const bool three_pass = cfg_.objective == "three-pass";
    const int64_t total_views = cfg_.v_global + cfg_.v_local;
    std::vector<std::vector<Tensor<float>>> cls_joint(static_cast<size_t>(total_views));
    std::vector<std::vector<Tensor<float>>> cls_rgb, cls_mod;
    if (three_pass) {
      cls_rgb.resize(static_cast<size_t>(total_views));
      cls_mod.resize(static_cast<size_t>(total_views));
    }

    for (int64_t i = 0; i < cfg_.batch_size; ++i) {
      const uint64_t global_index = static_cast<uint64_t>(step * cfg_.batch_size + i);
      const uint64_t epoch = global_index / static_cast<uint64_t>(cfg_.dataset_scenes);
      const uint64_t index = global_index % static_cast<uint64_t>(cfg_.dataset_scenes);
      SceneSample scene =
          gen_scene(scene_stream_seed(cfg_.seed, epoch, index), cfg_.image_size, depth_cfg_);
      ViewSet views = make_views(scene, view_cfg_, mix_seed(cfg_.seed, 0xA96, global_index));
      for (int64_t v = 0; v < total_views; ++v) {
        const PairedView& view = views.views[static_cast<size_t>(v)];
        ++encode_forwards_;
        cls_joint[static_cast<size_t>(v)].push_back(encoder_.encode(view.rgb, view.mod).cls);
        if (three_pass) {
          encode_forwards_ += 2;
          cls_rgb[static_cast<size_t>(v)].push_back(
              encoder_.encode_single_modality(view.rgb, view.mod, Modality::cam).cls);
          cls_mod[static_cast<size_t>(v)].push_back(
              encoder_.encode_single_modality(view.rgb, view.mod, Modality::mod).cls);
        }
      }
    }

    auto project_views = [&](std::vector<std::vector<Tensor<float>>>& rows) {
      std::vector<Tensor<float>> out;
      out.reserve(rows.size());
      for (auto& view_rows : rows) out.push_back(encoder_.project(concat(view_rows, 0)));
      return out;
    };
    std::vector<Tensor<float>> z_joint = project_views(cls_joint);

    ViewBatch<float> views;
    for (int64_t v = 0; v < cfg_.v_global; ++v) views.globals.push_back(z_joint[static_cast<size_t>(v)]);
    for (int64_t v = cfg_.v_global; v < total_views; ++v)
      views.locals.push_back(z_joint[static_cast<size_t>(v)]);

    const uint64_t dir_seed = sig_cfg_.direction_policy == DirectionPolicy::fixed
                                  ? cfg_.direction_seed
                                  : mix_seed(cfg_.seed, 0xD125, static_cast<uint64_t>(step));
    Tensor<float> dirs =
        sample_directions<float>(sig_cfg_.num_directions, sig_cfg_.dim, dir_seed);

    Tensor<float> sig;
    {
      SectionGuard scope(-2, Meter::Section::loss);
      if (three_pass) {
        std::vector<Tensor<float>> z_rgb = project_views(cls_rgb);
        std::vector<Tensor<float>> z_mod = project_views(cls_mod);
        sig = three_pass_sigreg(concat(z_joint, 0), concat(z_rgb, 0), concat(z_mod, 0), dirs,
                                sig_cfg_);
      } else {
        sig = sigreg_loss(concat(z_joint, 0), dirs, sig_cfg_);
      }
    }
    Tensor<float> inv = invariance_loss(views);
    Tensor<float> total = add(scalar_mul(sig, static_cast<float>(sig_cfg_.lambda)),
                              scalar_mul(inv, static_cast<float>(1.0 - sig_cfg_.lambda)));

    StepOutcome outcome;
    outcome.loss = static_cast<double>(total.item());
    outcome.sigreg = static_cast<double>(sig.item());
    outcome.inv = static_cast<double>(inv.item());
    outcome.lr = lr_at(step, cfg_.effective_steps(), cfg_.lr, cfg_.warmup_frac, cfg_.lr_floor);
    outcome.finite = std::isfinite(outcome.loss);
    if (!outcome.finite) return outcome;

    backward(total);
    adam_.step(encoder_.params(), outcome.lr);
    encoder_.params().zero_grads();
    if (keep_graph) last_loss_ = total;
    return outcome;
  }

  FusionEncoder<float>& encoder() { return encoder_; }
  const RunConfig& config() const { return cfg_; }
  Tensor<float> last_loss_graph() const { return last_loss_; }
  int64_t encode_forwards() const { return encode_forwards_; }

 private:
  RunConfig cfg_;
  FusionEncoder<float> encoder_;
  AdamW<float> adam_;
  SigRegConfig sig_cfg_;
  ViewConfig view_cfg_;
  DepthRenderConfig depth_cfg_;
  Tensor<float> last_loss_;
  int64_t encode_forwards_ = 0;
};

// Full SSL entry point: runs the configured number of steps, writes
// metrics.csv (step, loss_total, loss_sigreg, loss_inv, lr, wall_ms),
// periodic checkpoints plus a final one, and aborts on a non-finite loss
// with the last good checkpoint retained.
inline TrainResult run_training(const RunConfig& cfg) {
  cfg.validate();
  std::filesystem::create_directories(cfg.out_dir);
  TrainLoop loop(cfg);

  TrainResult result;
  result.metrics_path = cfg.out_dir + "/metrics.csv";
  std::ofstream metrics(result.metrics_path);
  require(metrics.good(), "cannot open '" + result.metrics_path + "' for writing");
  metrics << "step,loss_total,loss_sigreg,loss_inv,lr,wall_ms\n";

  const std::string initial = cfg.out_dir + "/ckpt_step0.bin";
  save_checkpoint(initial, loop.encoder().params(), cfg, 0);
  result.last_good_checkpoint = initial;

  const int64_t steps = cfg.effective_steps();
  for (int64_t step = 0; step < steps; ++step) {
    const auto t0 = std::chrono::steady_clock::now();
    TrainLoop::StepOutcome out = loop.run_step(step);
    if (!out.finite) {
      result.status = TrainStatus::aborted_non_finite;
      break;
    }
    const auto wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - t0)
                             .count();
    metrics << step << "," << detail::fmt_float(out.loss) << "," << detail::fmt_float(out.sigreg)
            << "," << detail::fmt_float(out.inv) << "," << detail::fmt_float(out.lr) << ","
            << wall_ms << "\n";
    if (step == 0) result.first_loss = out.loss;
    result.last_loss = out.loss;
    result.last_sigreg = out.sigreg;
    result.last_inv = out.inv;
    result.steps_done = step + 1;
    if ((step + 1) % cfg.checkpoint_every == 0) {
      const std::string path =
          cfg.out_dir + "/ckpt_step" + std::to_string(step + 1) + ".bin";
      save_checkpoint(path, loop.encoder().params(), cfg, step + 1);
      result.last_good_checkpoint = path;
    }
  }
  if (result.status == TrainStatus::completed) {
    result.final_checkpoint = cfg.out_dir + "/ckpt_final.bin";
    save_checkpoint(result.final_checkpoint, loop.encoder().params(), cfg, result.steps_done);
    result.last_good_checkpoint = result.final_checkpoint;
  }
  return result;
}

namespace detail {

struct ProbeData {
  std::vector<Tensor<float>> features;  // detached fusion grids
  std::vector<std::vector<uint8_t>> seg_targets;
  std::vector<std::vector<float>> depth_targets;  // normalized by r_max
};

constexpr uint64_t kProbeTrainEpoch = 1000000;
constexpr uint64_t kProbeValEpoch = 1000001;

inline ProbeData extract_probe_features(FusionEncoder<float>& enc, const RunConfig& data_cfg,
                                        uint64_t probe_seed, uint64_t epoch, int64_t count) {
  ProbeData data;
  const CompanionKind companion = parse_companion_kind(data_cfg.companion);
  for (int64_t i = 0; i < count; ++i) {
    SceneSample scene = gen_scene(scene_stream_seed(probe_seed, epoch, static_cast<uint64_t>(i)),
                                  data_cfg.image_size, data_cfg.depth_config());
    PairedView view = make_probe_view(scene, companion, data_cfg.image_size);
    auto out = enc.encode(view.rgb, view.mod);
    data.features.push_back(
        Tensor<float>::from(out.fusion_grid.shape(), out.fusion_grid.value()));
    data.seg_targets.push_back(scene.seg);
    std::vector<float> depth(scene.depth_dense.size());
    for (size_t p = 0; p < depth.size(); ++p)
      depth[p] = std::min(1.0f, std::max(0.0f, scene.depth_dense[p] /
                                                   static_cast<float>(data_cfg.r_max)));
    data.depth_targets.push_back(std::move(depth));
  }
  return data;
}

inline ProbeMetrics evaluate_probes(const ProbeData& val, const SegProbe<float>& seg,
                                    const DepthProbe<float>& depth, int64_t out_size,
                                    double r_max) {
  std::vector<uint8_t> all_pred, all_target;
  std::vector<double> all_depth_pred;
  std::vector<float> all_depth_target;
  for (size_t i = 0; i < val.features.size(); ++i) {
    auto logits = seg.logits(val.features[i], out_size);
    auto pred = argmax_classes(
        std::vector<double>(logits.value().begin(), logits.value().end()), out_size * out_size,
        logits.cols());
    all_pred.insert(all_pred.end(), pred.begin(), pred.end());
    all_target.insert(all_target.end(), val.seg_targets[i].begin(), val.seg_targets[i].end());
    auto depth_pred = depth.predict(val.features[i], out_size);
    for (float v : depth_pred.value()) all_depth_pred.push_back(static_cast<double>(v));
    all_depth_target.insert(all_depth_target.end(), val.depth_targets[i].begin(),
                            val.depth_targets[i].end());
  }
  ProbeMetrics metrics;
  metrics.seg_miou = seg_miou(all_pred, all_target, kSegClasses);
  metrics.depth_mae_m = depth_mae_meters(all_depth_pred, all_depth_target, r_max);
  return metrics;
}

}  // namespace detail

// Frozen-probe evaluation: loads the checkpoint, freezes the encoder by
// training the heads on detached fusion-grid features of deterministic clean
// views, and reports split-level mIoU and depth MAE. The probe config must
// agree with the checkpoint on the embedding dimension.
inline ProbeResult run_probe(const std::string& checkpoint_path, const RunConfig& probe_cfg) {
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  require(probe_cfg.embed_dim == ckpt.config.embed_dim,
          "probe config embed_dim " + std::to_string(probe_cfg.embed_dim) +
              " does not match checkpoint embed_dim " + std::to_string(ckpt.config.embed_dim));
  std::filesystem::create_directories(probe_cfg.out_dir);

  FusionEncoder<float> enc(ckpt.config.encoder_config(), ckpt.config.seed);
  load_into(ckpt, enc.params());
  enc.params().zero_grads();

  detail::ProbeData train = detail::extract_probe_features(
      enc, ckpt.config, probe_cfg.seed, detail::kProbeTrainEpoch, probe_cfg.probe_train_scenes);
  detail::ProbeData val = detail::extract_probe_features(
      enc, ckpt.config, probe_cfg.seed, detail::kProbeValEpoch, probe_cfg.probe_val_scenes);

  const int64_t out_size = ckpt.config.image_size;
  SegProbe<float> seg(ckpt.config.embed_dim, kSegClasses, probe_cfg.seed);
  DepthProbe<float> depth(ckpt.config.embed_dim, probe_cfg.seed);
  AdamWConfig opt_cfg{probe_cfg.beta1, probe_cfg.beta2, 1e-8, 0.0};
  AdamW<float> seg_opt(opt_cfg), depth_opt(opt_cfg);

  ProbeResult result;
  result.metrics_path = probe_cfg.out_dir + "/probe_metrics.csv";
  std::ofstream metrics(result.metrics_path);
  require(metrics.good(), "cannot open '" + result.metrics_path + "' for writing");
  metrics << "step,seg_miou,depth_mae_m\n";

  auto validate = [&](int64_t step) {
    result.metrics = detail::evaluate_probes(val, seg, depth, out_size, ckpt.config.r_max);
    metrics << step << "," << detail::fmt_float(result.metrics.seg_miou) << ","
            << detail::fmt_float(result.metrics.depth_mae_m) << "\n";
    ++result.validation_rows;
  };

  int64_t step = 0;
  int64_t last_validated = -1;
  const int64_t n_train = static_cast<int64_t>(train.features.size());
  for (int64_t epoch = 0; epoch < probe_cfg.probe_epochs; ++epoch) {
    const double lr = probe_cfg.probe_lr * std::pow(0.5, static_cast<double>(epoch));
    for (int64_t start = 0; start < n_train; start += probe_cfg.probe_batch) {
      const int64_t stop = std::min(n_train, start + probe_cfg.probe_batch);
      Tensor<float> loss = Tensor<float>::scalar(0.0f);
      for (int64_t i = start; i < stop; ++i) {
        const auto& grid = train.features[static_cast<size_t>(i)];
        Tensor<float> seg_loss =
            seg_cross_entropy(seg.logits(grid, out_size), train.seg_targets[static_cast<size_t>(i)]);
        Tensor<float> depth_loss = depth_mse(depth.predict(grid, out_size),
                                             train.depth_targets[static_cast<size_t>(i)]);
        loss = add(loss, add(seg_loss, depth_loss));
      }
      loss = scalar_mul(loss, 1.0f / static_cast<float>(stop - start));
      backward(loss);
      seg_opt.step(seg.params(), lr);
      depth_opt.step(depth.params(), lr);
      seg.params().zero_grads();
      depth.params().zero_grads();
      ++step;
      if (step % probe_cfg.val_every == 0) {
        validate(step);
        last_validated = step;
      }
    }
  }
  if (last_validated != step) validate(step);
  result.encoder_grad_abs_sum = enc.params().grad_abs_sum();
  return result;
}

// Profiled short runs, one per requested routing mode: analytic per-layer
// attention costs plus counted totals, counted sigreg work, parameter count
// and graph-liveness peak bytes. Writes profile.csv.
inline std::vector<CostReport> run_profile(const RunConfig& cfg) {
  cfg.validate();
  std::filesystem::create_directories(cfg.out_dir);
  std::vector<std::string> modes;
  {
    std::string token;
    std::istringstream is(cfg.profile_modes);
    while (std::getline(is, token, ',')) {
      if (!token.empty()) modes.push_back(token);
    }
  }
  require(!modes.empty(), "profile_modes is empty");

  std::vector<CostReport> reports;
  for (const auto& mode : modes) {
    RunConfig mode_cfg = cfg;
    mode_cfg.routing_mode = mode;
    mode_cfg.steps = cfg.profile_steps;
    TrainLoop loop(mode_cfg);
    Meter meter;
    {
      MeterGuard guard(meter);
      for (int64_t step = 0; step < cfg.profile_steps; ++step)
        loop.run_step(step, step + 1 == cfg.profile_steps);
    }
    CostReport report;
    report.mode = mode;
    int64_t minimal = 0;
    report.layers = analytic_layer_costs(mode_cfg.encoder_config(), &minimal);
    report.layer0_minimal_madds = minimal;
    report.total_madds = meter.total();
    report.sigreg_madds = meter.section_madds(-2, Meter::Section::loss);
    report.params = loop.encoder().params().total_params();
    report.peak_bytes = peak_live_value_bytes(loop.last_loss_graph());
    report.steps = cfg.profile_steps;
    report.encode_forwards = loop.encode_forwards();
    reports.push_back(std::move(report));
  }
  write_profile_csv(cfg.out_dir + "/profile.csv", reports);
  return reports;
}

}  // namespace mmjepa
