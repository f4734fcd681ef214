/**
 * Copyright 2026 The SludgeVision Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <cstdint>
#include <string>

#include "sludgevision/augment.hpp"
#include "sludgevision/config.hpp"
#include "sludgevision/evalcv.hpp"
#include "sludgevision/ingest.hpp"
#include "sludgevision/model.hpp"
#include "sludgevision/monitor.hpp"
#include "sludgevision/trainer.hpp"

namespace svx {

// Configuration resolved from a key-value document (sections data, augment,
// model, train, eval, monitor) over the built-in defaults.
struct PipelineConfig {
  int width = 512;
  int height = 384;
  NormalizationStats normalization;
  AugmentPolicy augment;
  bool augment_enabled = true;
  double validation_fraction = 0.10;
  FoldMode fold_mode = FoldMode::per_day;
  bool save_fold_checkpoints = false;
  MonitorConfig monitor;
  KeyValueDoc raw;

  // Effective policy: identity when augmentation is disabled.
  AugmentPolicy effective_policy() const;
  // Mode defaults (30/95 epochs etc.) overridden by [train] keys.
  TrainConfig train_config(TrainMode mode) const;
  // arch + [model] keys; pretrained defaults to the mode-appropriate source
  // (imagenet_21k for convnext_s, imagenet_1k for the other paper backbones,
  // none for tiny_cnn and for from-scratch training).
  ModelSpec model_spec(Arch arch, TrainMode mode) const;
};

// Empty path -> all defaults.
PipelineConfig load_pipeline_config(const std::string& path);

struct SynthGenResult {
  std::string manifest_path;
  int n_images = 0;
};

SynthGenResult run_synth_gen(int days, int per_day, uint64_t seed,
                             const std::string& out_dir);

struct TrainRunResult {
  std::string checkpoint_path;
  std::string history_path;
  int selected_epoch = 0;
  double best_val_mse = 0.0;
};

// Carves a day-group validation split (validation_fraction) for checkpoint
// selection and trains on the remaining days.
TrainRunResult run_train(const std::string& manifest_path, const std::string& arch,
                         const std::string& mode, const std::string& config_path,
                         const std::string& out_dir);

struct CrossValidateRunResult {
  std::string report_path;
  CrossValAggregate aggregate;
};

CrossValidateRunResult run_cross_validate(const std::string& manifest_path,
                                          const std::string& arch,
                                          const std::string& mode, int k, uint64_t seed,
                                          const std::string& config_path,
                                          const std::string& out_dir);

struct CompareRunResult {
  std::string report_path;
  std::string table_path;
};

// specs: comma-separated arch:mode entries, e.g. "tiny_cnn:tl,tiny_cnn:tfs".
CompareRunResult run_compare(const std::string& manifest_path, const std::string& specs,
                             int k, uint64_t seed, const std::string& config_path,
                             const std::string& out_dir);

struct PredictRunResult {
  std::string predictions_path;
  int n_predictions = 0;
};

PredictRunResult run_predict(const std::string& checkpoint_path,
                             const std::string& manifest_path,
                             const std::string& out_dir);

struct MonitorRunResult {
  int n_days = 0;
  int n_warnings = 0;
  std::string report_path;
  std::string plot_path;
};

// Empty plot/report paths skip the corresponding artifact.
MonitorRunResult run_monitor(const std::string& predictions_path, double threshold,
                             int persistence, const std::string& plot_path,
                             const std::string& report_path,
                             const std::string& config_path);

} // namespace svx
