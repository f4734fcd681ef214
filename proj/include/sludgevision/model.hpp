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
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sludgevision/backbones.hpp"
#include "sludgevision/nn.hpp"

namespace svx {

enum class Pretrained { none, imagenet_1k, imagenet_21k };

Pretrained parse_pretrained(const std::string& name);
std::string pretrained_name(Pretrained p);

struct ModelSpec {
  Arch arch = Arch::tiny_cnn;
  Pretrained pretrained = Pretrained::none;
  double stochastic_depth_rate = 0.0;
  // The head is always a single-output affine regression layer.

  void validate() const;
  static double default_stochastic_depth(Arch arch); // 0.1 for ConvNeXt, else 0
};

struct ComplexityReport {
  // Multiply-accumulate count of the backbone with its original 1000-class
  // classifier at the reference resolution, in giga-ops (the convention the
  // published architecture tables use).
  double gflops = 0.0;
  int64_t parameter_count = 0; // regression variant (classifier replaced)
  int64_t parameter_count_classifier = 0;
  double gflops_regression = 0.0;
  int reference_h = 0;
  int reference_w = 0;
};

// Backbone + scalar affine head, with a fixed (non-trained) output
// calibration: prediction = offset + scale * head_output. The calibration
// keeps optimizer step sizes sane while targets live in SVI units.
class RegressionModel {
public:
  RegressionModel(const ModelSpec& spec, uint64_t seed, bool materialize = true);

  const ModelSpec& spec() const { return spec_; }
  int feature_dim() const { return build_.feature_dim; }
  int canonical_h() const { return build_.canonical_h; }
  int canonical_w() const { return build_.canonical_w; }

  // batch: [N,3,H,W], normalized. Returns one prediction per sample.
  std::vector<double> forward(const Tensor& batch, bool training, Rng* rng);
  // grad_pred: dLoss/dprediction per sample; accumulates parameter grads.
  void backward(const std::vector<double>& grad_pred);

  std::vector<nn::Param*> params();
  std::vector<nn::BufferRef> buffers();
  void zero_grad();
  int64_t parameter_count();

  double output_offset() const { return output_offset_; }
  double output_scale() const { return output_scale_; }
  void set_output_calibration(double offset, double scale);

  // Re-draws head weights (normal, std 0.01) from the given seed; backbone
  // bits are untouched. warm_start targets the given prediction at zero
  // features (typically the training-set mean SVI).
  void reinit_head(uint64_t seed, std::optional<double> warm_start = std::nullopt);

  // SHA-256 over backbone parameter bytes in traversal order.
  std::string backbone_checksum();

  std::map<std::string, Tensor> state_dict();
  void load_state_dict(const std::map<std::string, Tensor>& state, bool strict = true);
  // Backbone params + buffers only (pretrained weight files).
  std::map<std::string, Tensor> backbone_state_dict();
  void load_backbone_state_dict(const std::map<std::string, Tensor>& state);

private:
  ModelSpec spec_;
  BackboneBuild build_;
  std::unique_ptr<nn::Linear> head_;
  double output_offset_ = 0.0;
  double output_scale_ = 1.0;
};

// Constructs the model; with pretrained != none, backbone weights come from
// the local weight cache (see pretrained_cache_dir) and only the head is
// randomly initialized.
std::unique_ptr<RegressionModel> build_model(const ModelSpec& spec, uint64_t seed);

ComplexityReport complexity_report(const ModelSpec& spec);
ComplexityReport complexity_report(const ModelSpec& spec, int height, int width);

// $SLUDGEVISION_CACHE, or $HOME/.cache/sludgevision.
std::string pretrained_cache_dir();
std::string pretrained_weights_path(Arch arch, Pretrained p);
// Saves the model's backbone into the cache as the pretrained checkpoint for
// (arch, p) and records its content hash in the cache lockfile.
void stage_pretrained(RegressionModel& model, Pretrained p);

} // namespace svx
