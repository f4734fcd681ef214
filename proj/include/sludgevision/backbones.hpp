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

#include <string>

#include "sludgevision/nn.hpp"

namespace svx {

enum class Arch {
  inception_v3,
  resnet18,
  resnet152,
  convnext_nano,
  convnext_s,
  tiny_cnn,
};

Arch parse_arch(const std::string& name);
std::string arch_name(Arch arch);

// Feature extractor up to (and including) the flattened pooled vector; the
// classifier / regression head is attached by the model layer.
struct BackboneBuild {
  nn::LayerPtr features;
  int feature_dim = 0;
  int canonical_h = 224; // reference resolution for complexity reporting
  int canonical_w = 224;
};

// stochastic_depth_rate applies to residual-block drop paths (ConvNeXt and
// ResNet families); Inception and tiny_cnn ignore it. input_resize controls
// Inception's built-in 299x299 resize: runtime models keep it, complexity
// accounting drops it so layer arithmetic sees the requested resolution.
BackboneBuild build_backbone(Arch arch, double stochastic_depth_rate,
                             const nn::BuildContext& ctx, bool input_resize = true);

} // namespace svx
