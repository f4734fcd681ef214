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
#include "sludgevision/backbones.hpp"

#include <utility>
#include <vector>

#include "sludgevision/common.hpp"

namespace svx {

namespace nn_ = svx::nn;

namespace {

using nn_::BuildContext;
using nn_::LayerPtr;
using nn_::Sequential;

LayerPtr seq(std::vector<LayerPtr> layers) {
  auto s = std::make_unique<Sequential>();
  for (auto& l : layers) s->add(std::move(l));
  return s;
}

template <class... Ts>
LayerPtr seq(Ts&&... layers) {
  std::vector<LayerPtr> ls;
  ls.reserve(sizeof...(layers));
  (ls.push_back(std::forward<Ts>(layers)), ...);
  return seq(std::move(ls));
}

// conv (no bias) + batch norm + relu, the Inception building block.
LayerPtr basic_conv(const BuildContext& ctx, int in_ch, int out_ch, int kh, int kw, int sh,
                    int sw, int ph, int pw) {
  std::vector<LayerPtr> ls;
  ls.push_back(std::make_unique<nn_::Conv2d>(ctx, in_ch, out_ch, kh, kw, sh, sw, ph, pw, 1,
                                             false));
  ls.push_back(std::make_unique<nn_::BatchNorm2d>(ctx, out_ch, 1e-3));
  ls.push_back(std::make_unique<nn_::ReLU>());
  return seq(std::move(ls));
}

LayerPtr basic_conv_sq(const BuildContext& ctx, int in_ch, int out_ch, int k, int stride,
                       int pad) {
  return basic_conv(ctx, in_ch, out_ch, k, k, stride, stride, pad, pad);
}

// ---------------------------------------------------------------------------
// tiny_cnn: 4 stride-2 conv blocks, ~0.1 M parameters, CPU-friendly.

BackboneBuild build_tiny_cnn(const BuildContext& ctx) {
  std::vector<LayerPtr> ls;
  int in_ch = 3;
  for (int out_ch : {16, 32, 64, 128}) {
    ls.push_back(std::make_unique<nn_::Conv2d>(ctx, in_ch, out_ch, 3, 2, 1));
    ls.push_back(std::make_unique<nn_::ReLU>());
    in_ch = out_ch;
  }
  ls.push_back(std::make_unique<nn_::GlobalAvgPool>());

  BackboneBuild b;
  b.features = seq(std::move(ls));
  b.feature_dim = 128;
  b.canonical_h = 96;
  b.canonical_w = 128;
  return b;
}

// ---------------------------------------------------------------------------
// ResNet

LayerPtr resnet_downsample(const BuildContext& ctx, int in_ch, int out_ch, int stride) {
  std::vector<LayerPtr> ls;
  ls.push_back(std::make_unique<nn_::Conv2d>(ctx, in_ch, out_ch, 1, stride, 0, 1, false));
  ls.push_back(std::make_unique<nn_::BatchNorm2d>(ctx, out_ch));
  return seq(std::move(ls));
}

LayerPtr basic_block(const BuildContext& ctx, int in_ch, int ch, int stride,
                     double drop_rate) {
  std::vector<LayerPtr> branch;
  branch.push_back(std::make_unique<nn_::Conv2d>(ctx, in_ch, ch, 3, stride, 1, 1, false));
  branch.push_back(std::make_unique<nn_::BatchNorm2d>(ctx, ch));
  branch.push_back(std::make_unique<nn_::ReLU>());
  branch.push_back(std::make_unique<nn_::Conv2d>(ctx, ch, ch, 3, 1, 1, 1, false));
  branch.push_back(std::make_unique<nn_::BatchNorm2d>(ctx, ch));

  LayerPtr skip;
  if (stride != 1 || in_ch != ch) skip = resnet_downsample(ctx, in_ch, ch, stride);
  return std::make_unique<nn_::Residual>(seq(std::move(branch)), std::move(skip), true,
                                         drop_rate);
}

LayerPtr bottleneck_block(const BuildContext& ctx, int in_ch, int width, int stride,
                          double drop_rate) {
  const int out_ch = width * 4;
  std::vector<LayerPtr> branch;
  branch.push_back(std::make_unique<nn_::Conv2d>(ctx, in_ch, width, 1, 1, 0, 1, false));
  branch.push_back(std::make_unique<nn_::BatchNorm2d>(ctx, width));
  branch.push_back(std::make_unique<nn_::ReLU>());
  branch.push_back(std::make_unique<nn_::Conv2d>(ctx, width, width, 3, stride, 1, 1, false));
  branch.push_back(std::make_unique<nn_::BatchNorm2d>(ctx, width));
  branch.push_back(std::make_unique<nn_::ReLU>());
  branch.push_back(std::make_unique<nn_::Conv2d>(ctx, width, out_ch, 1, 1, 0, 1, false));
  branch.push_back(std::make_unique<nn_::BatchNorm2d>(ctx, out_ch));

  LayerPtr skip;
  if (stride != 1 || in_ch != out_ch) skip = resnet_downsample(ctx, in_ch, out_ch, stride);
  return std::make_unique<nn_::Residual>(seq(std::move(branch)), std::move(skip), true,
                                         drop_rate);
}

BackboneBuild build_resnet(const BuildContext& ctx, const std::vector<int>& depths,
                           bool bottleneck, double drop_rate) {
  std::vector<LayerPtr> ls;
  ls.push_back(std::make_unique<nn_::Conv2d>(ctx, 3, 64, 7, 2, 3, 1, false));
  ls.push_back(std::make_unique<nn_::BatchNorm2d>(ctx, 64));
  ls.push_back(std::make_unique<nn_::ReLU>());
  ls.push_back(std::make_unique<nn_::MaxPool2d>(3, 2, 1));

  const int widths[4] = {64, 128, 256, 512};
  int in_ch = 64;
  for (int stage = 0; stage < 4; ++stage) {
    const int stride0 = stage == 0 ? 1 : 2;
    for (int i = 0; i < depths[size_t(stage)]; ++i) {
      const int stride = i == 0 ? stride0 : 1;
      if (bottleneck) {
        ls.push_back(bottleneck_block(ctx, in_ch, widths[stage], stride, drop_rate));
        in_ch = widths[stage] * 4;
      } else {
        ls.push_back(basic_block(ctx, in_ch, widths[stage], stride, drop_rate));
        in_ch = widths[stage];
      }
    }
  }
  ls.push_back(std::make_unique<nn_::GlobalAvgPool>());

  BackboneBuild b;
  b.features = seq(std::move(ls));
  b.feature_dim = in_ch;
  return b;
}

// ---------------------------------------------------------------------------
// Inception v3 (auxiliary classifier omitted; regression needs one target)

LayerPtr avgpool_then_1x1(const BuildContext& ctx, int in_ch, int out_ch) {
  std::vector<LayerPtr> ls;
  ls.push_back(std::make_unique<nn_::AvgPool2d>(3, 1, 1));
  ls.push_back(basic_conv_sq(ctx, in_ch, out_ch, 1, 1, 0));
  return seq(std::move(ls));
}

LayerPtr inception_a(const BuildContext& ctx, int in_ch, int pool_features) {
  std::vector<LayerPtr> branches;
  branches.push_back(basic_conv_sq(ctx, in_ch, 64, 1, 1, 0));
  branches.push_back(seq(basic_conv_sq(ctx, in_ch, 48, 1, 1, 0),
                          basic_conv_sq(ctx, 48, 64, 5, 1, 2)));
  branches.push_back(seq(basic_conv_sq(ctx, in_ch, 64, 1, 1, 0),
                          basic_conv_sq(ctx, 64, 96, 3, 1, 1),
                          basic_conv_sq(ctx, 96, 96, 3, 1, 1)));
  branches.push_back(avgpool_then_1x1(ctx, in_ch, pool_features));
  return std::make_unique<nn_::ConcatBranches>(std::move(branches));
}

LayerPtr inception_b(const BuildContext& ctx, int in_ch) {
  std::vector<LayerPtr> branches;
  branches.push_back(basic_conv_sq(ctx, in_ch, 384, 3, 2, 0));
  branches.push_back(seq(basic_conv_sq(ctx, in_ch, 64, 1, 1, 0),
                          basic_conv_sq(ctx, 64, 96, 3, 1, 1),
                          basic_conv_sq(ctx, 96, 96, 3, 2, 0)));
  branches.push_back(seq(std::make_unique<nn_::MaxPool2d>(3, 2, 0)));
  return std::make_unique<nn_::ConcatBranches>(std::move(branches));
}

LayerPtr inception_c(const BuildContext& ctx, int in_ch, int c7) {
  std::vector<LayerPtr> branches;
  branches.push_back(basic_conv_sq(ctx, in_ch, 192, 1, 1, 0));
  branches.push_back(seq(basic_conv_sq(ctx, in_ch, c7, 1, 1, 0),
                          basic_conv(ctx, c7, c7, 1, 7, 1, 1, 0, 3),
                          basic_conv(ctx, c7, 192, 7, 1, 1, 1, 3, 0)));
  branches.push_back(seq(basic_conv_sq(ctx, in_ch, c7, 1, 1, 0),
                          basic_conv(ctx, c7, c7, 7, 1, 1, 1, 3, 0),
                          basic_conv(ctx, c7, c7, 1, 7, 1, 1, 0, 3),
                          basic_conv(ctx, c7, c7, 7, 1, 1, 1, 3, 0),
                          basic_conv(ctx, c7, 192, 1, 7, 1, 1, 0, 3)));
  branches.push_back(avgpool_then_1x1(ctx, in_ch, 192));
  return std::make_unique<nn_::ConcatBranches>(std::move(branches));
}

LayerPtr inception_d(const BuildContext& ctx, int in_ch) {
  std::vector<LayerPtr> branches;
  branches.push_back(seq(basic_conv_sq(ctx, in_ch, 192, 1, 1, 0),
                          basic_conv_sq(ctx, 192, 320, 3, 2, 0)));
  branches.push_back(seq(basic_conv_sq(ctx, in_ch, 192, 1, 1, 0),
                          basic_conv(ctx, 192, 192, 1, 7, 1, 1, 0, 3),
                          basic_conv(ctx, 192, 192, 7, 1, 1, 1, 3, 0),
                          basic_conv_sq(ctx, 192, 192, 3, 2, 0)));
  branches.push_back(seq(std::make_unique<nn_::MaxPool2d>(3, 2, 0)));
  return std::make_unique<nn_::ConcatBranches>(std::move(branches));
}

LayerPtr inception_e_split(const BuildContext& ctx, int in_ch) {
  std::vector<LayerPtr> pair;
  pair.push_back(basic_conv(ctx, in_ch, 384, 1, 3, 1, 1, 0, 1));
  pair.push_back(basic_conv(ctx, in_ch, 384, 3, 1, 1, 1, 1, 0));
  return std::make_unique<nn_::ConcatBranches>(std::move(pair));
}

LayerPtr inception_e(const BuildContext& ctx, int in_ch) {
  std::vector<LayerPtr> branches;
  branches.push_back(basic_conv_sq(ctx, in_ch, 320, 1, 1, 0));
  branches.push_back(seq(basic_conv_sq(ctx, in_ch, 384, 1, 1, 0),
                          inception_e_split(ctx, 384)));
  branches.push_back(seq(basic_conv_sq(ctx, in_ch, 448, 1, 1, 0),
                          basic_conv_sq(ctx, 448, 384, 3, 1, 1),
                          inception_e_split(ctx, 384)));
  branches.push_back(avgpool_then_1x1(ctx, in_ch, 192));
  return std::make_unique<nn_::ConcatBranches>(std::move(branches));
}

BackboneBuild build_inception_v3(const BuildContext& ctx, bool input_resize) {
  std::vector<LayerPtr> ls;
  // The canonical 299x299 input is enforced by an on-the-fly resize so the
  // data pipeline can keep a single native resolution.
  if (input_resize) ls.push_back(std::make_unique<nn_::InputResize>(299, 299));
  ls.push_back(basic_conv_sq(ctx, 3, 32, 3, 2, 0));
  ls.push_back(basic_conv_sq(ctx, 32, 32, 3, 1, 0));
  ls.push_back(basic_conv_sq(ctx, 32, 64, 3, 1, 1));
  ls.push_back(std::make_unique<nn_::MaxPool2d>(3, 2, 0));
  ls.push_back(basic_conv_sq(ctx, 64, 80, 1, 1, 0));
  ls.push_back(basic_conv_sq(ctx, 80, 192, 3, 1, 0));
  ls.push_back(std::make_unique<nn_::MaxPool2d>(3, 2, 0));
  ls.push_back(inception_a(ctx, 192, 32));
  ls.push_back(inception_a(ctx, 256, 64));
  ls.push_back(inception_a(ctx, 288, 64));
  ls.push_back(inception_b(ctx, 288));
  ls.push_back(inception_c(ctx, 768, 128));
  ls.push_back(inception_c(ctx, 768, 160));
  ls.push_back(inception_c(ctx, 768, 160));
  ls.push_back(inception_c(ctx, 768, 192));
  ls.push_back(inception_d(ctx, 768));
  ls.push_back(inception_e(ctx, 1280));
  ls.push_back(inception_e(ctx, 2048));
  ls.push_back(std::make_unique<nn_::GlobalAvgPool>());
  ls.push_back(std::make_unique<nn_::Dropout>(0.5));

  BackboneBuild b;
  b.features = seq(std::move(ls));
  b.feature_dim = 2048;
  b.canonical_h = 299;
  b.canonical_w = 299;
  return b;
}

// ---------------------------------------------------------------------------
// ConvNeXt

LayerPtr convnext_block(const BuildContext& ctx, int dim, double drop_rate) {
  std::vector<LayerPtr> branch;
  branch.push_back(std::make_unique<nn_::Conv2d>(ctx, dim, dim, 7, 1, 3, dim, true));
  branch.push_back(std::make_unique<nn_::ChannelLayerNorm>(ctx, dim));
  branch.push_back(std::make_unique<nn_::Conv2d>(ctx, dim, 4 * dim, 1, 1, 0, 1, true));
  branch.push_back(std::make_unique<nn_::GELU>());
  branch.push_back(std::make_unique<nn_::Conv2d>(ctx, 4 * dim, dim, 1, 1, 0, 1, true));
  branch.push_back(std::make_unique<nn_::ChannelScale>(ctx, dim, 1e-6));
  return std::make_unique<nn_::Residual>(seq(std::move(branch)), nullptr, false, drop_rate);
}

struct ConvNextStage {
  int in_ch;
  int out_ch; // 0: no downsample after this stage
  int blocks;
};

BackboneBuild build_convnext(const BuildContext& ctx, const std::vector<ConvNextStage>& stages,
                             double sd_rate) {
  std::vector<LayerPtr> ls;
  ls.push_back(std::make_unique<nn_::Conv2d>(ctx, 3, stages[0].in_ch, 4, 4, 0, 1, true));
  ls.push_back(std::make_unique<nn_::ChannelLayerNorm>(ctx, stages[0].in_ch));

  int total_blocks = 0;
  for (const auto& st : stages) total_blocks += st.blocks;
  int block_id = 0;
  int last_dim = stages[0].in_ch;
  for (const auto& st : stages) {
    for (int i = 0; i < st.blocks; ++i, ++block_id) {
      // Linear drop-path ramp across all blocks of the network.
      const double p =
          total_blocks > 1 ? sd_rate * double(block_id) / double(total_blocks - 1) : 0.0;
      ls.push_back(convnext_block(ctx, st.in_ch, p));
    }
    last_dim = st.in_ch;
    if (st.out_ch > 0) {
      ls.push_back(std::make_unique<nn_::ChannelLayerNorm>(ctx, st.in_ch));
      ls.push_back(std::make_unique<nn_::Conv2d>(ctx, st.in_ch, st.out_ch, 2, 2, 0, 1, true));
      last_dim = st.out_ch;
    }
  }
  ls.push_back(std::make_unique<nn_::GlobalAvgPool>(true));
  ls.push_back(std::make_unique<nn_::ChannelLayerNorm>(ctx, last_dim));
  ls.push_back(std::make_unique<nn_::Flatten>());

  BackboneBuild b;
  b.features = seq(std::move(ls));
  b.feature_dim = last_dim;
  return b;
}

} // namespace

Arch parse_arch(const std::string& name) {
  if (name == "inception_v3") return Arch::inception_v3;
  if (name == "resnet18") return Arch::resnet18;
  if (name == "resnet152") return Arch::resnet152;
  if (name == "convnext_nano") return Arch::convnext_nano;
  if (name == "convnext_s") return Arch::convnext_s;
  if (name == "tiny_cnn") return Arch::tiny_cnn;
  throw ValidationError("unknown architecture '" + name + "'");
}

std::string arch_name(Arch arch) {
  switch (arch) {
    case Arch::inception_v3: return "inception_v3";
    case Arch::resnet18: return "resnet18";
    case Arch::resnet152: return "resnet152";
    case Arch::convnext_nano: return "convnext_nano";
    case Arch::convnext_s: return "convnext_s";
    case Arch::tiny_cnn: return "tiny_cnn";
  }
  throw ValidationError("unknown architecture enum value");
}

BackboneBuild build_backbone(Arch arch, double stochastic_depth_rate,
                             const nn_::BuildContext& ctx, bool input_resize) {
  SVX_CHECK(stochastic_depth_rate >= 0.0 && stochastic_depth_rate < 1.0,
            ErrorKind::validation, "stochastic depth rate must lie in [0,1)");
  switch (arch) {
    case Arch::tiny_cnn:
      return build_tiny_cnn(ctx);
    case Arch::resnet18:
      return build_resnet(ctx, {2, 2, 2, 2}, false, stochastic_depth_rate);
    case Arch::resnet152:
      return build_resnet(ctx, {3, 8, 36, 3}, true, stochastic_depth_rate);
    case Arch::inception_v3:
      return build_inception_v3(ctx, input_resize);
    case Arch::convnext_nano:
      return build_convnext(
          ctx, {{80, 160, 2}, {160, 320, 2}, {320, 640, 8}, {640, 0, 2}},
          stochastic_depth_rate);
    case Arch::convnext_s:
      return build_convnext(
          ctx, {{96, 192, 3}, {192, 384, 3}, {384, 768, 27}, {768, 0, 3}},
          stochastic_depth_rate);
  }
  throw ValidationError("unknown architecture enum value");
}

} // namespace svx
