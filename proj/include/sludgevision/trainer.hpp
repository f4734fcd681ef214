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
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sludgevision/augment.hpp"
#include "sludgevision/ingest.hpp"
#include "sludgevision/model.hpp"
#include "sludgevision/nn.hpp"
#include "sludgevision/tensor.hpp"

namespace svx {

enum class TrainMode { transfer_learning, from_scratch };
enum class CheckpointRule { best_validation_mse, paper_faithful_best_eval_mse };

TrainMode parse_train_mode(const std::string& name); // "tl" | "tfs"
std::string train_mode_name(TrainMode mode);
CheckpointRule parse_checkpoint_rule(const std::string& name);
std::string checkpoint_rule_name(CheckpointRule rule);

struct TrainConfig {
  TrainMode mode = TrainMode::transfer_learning;
  int epochs = 30; // 30 for transfer learning, 95 from scratch
  int batch_size = 32;
  double initial_lr = 1e-4;
  double min_lr = 0.0;
  double weight_decay = 0.05;
  std::optional<double> layerwise_lr_decay; // in (0,1]; disabled by default
  CheckpointRule checkpoint_rule = CheckpointRule::best_validation_mse;
  uint64_t seed = 0;
  // Derive the output calibration (offset = mean target, scale = target std)
  // from the training split before the first epoch.
  bool calibrate_output = true;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  static TrainConfig defaults_for(TrainMode mode);
  void validate() const;
};

// Round-trippable JSON form, stored in checkpoints.
nlohmann::json train_config_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& doc);

struct EpochRecord {
  int epoch = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;
  double lr = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int selected_checkpoint_epoch = 0;
  // Augmentation bookkeeping; the validation counter must stay zero.
  int64_t train_augment_calls = 0;
  int64_t validation_augment_calls = 0;

  std::string to_json() const;
};

// Mean squared error over equal-length nonempty lists.
double mse(const std::vector<double>& predictions, const std::vector<double>& targets);

// Cosine annealing, evaluated per epoch:
//   min_lr + 0.5 * (initial_lr - min_lr) * (1 + cos(pi * epoch / epochs)).
// epoch must lie in [0, epochs].
double lr_at(int epoch, const TrainConfig& config);

// Decoupled-weight-decay Adam with optional per-parameter learning-rate
// multipliers (layer-wise decay). Decay is applied to every parameter.
class AdamW {
public:
  AdamW(std::vector<nn::Param*> params, const TrainConfig& config);

  // Applies one update from the accumulated gradients.
  void step(double lr);
  int64_t steps_taken() const { return t_; }

private:
  std::vector<nn::Param*> params_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::vector<double> lr_mult_;
  double beta1_, beta2_, eps_, weight_decay_;
  int64_t t_ = 0;
};

// Fine-tunes (or trains from scratch) in place. Per epoch: seeded shuffle of
// the training indices, per-sample augmentation streams keyed by
// (seed, sample_id, epoch), AdamW steps at lr_at(epoch), then an
// augmentation-free validation pass. The weights of the epoch with the lowest
// validation MSE (ties broken toward the earliest epoch) are restored into
// the model before returning. Which samples make up `val_indices` is the
// caller's encoding of the checkpoint rule: a held-out validation carve-out
// for best_validation_mse, the evaluation fold itself for the
// paper-faithful variant.
//
// Train and validation indices must be nonempty and day-disjoint.
TrainHistory train(RegressionModel& model,
                   const DatasetManifest& manifest,
                   const std::vector<int>& train_indices,
                   const std::vector<int>& val_indices,
                   const AugmentPolicy& policy,
                   const TrainConfig& config);

// Predictions for the given samples with augmentation and stochastic depth
// off, batched at batch_size.
std::vector<double> predict_samples(RegressionModel& model,
                                    const DatasetManifest& manifest,
                                    const std::vector<int>& indices,
                                    int batch_size);

} // namespace svx
