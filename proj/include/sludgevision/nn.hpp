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

#include <memory>
#include <string>
#include <vector>

#include "sludgevision/rng.hpp"
#include "sludgevision/tensor.hpp"

namespace svx::nn {

// One learnable tensor. `decay` marks participation in decoupled weight decay.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  bool decay = true;
};

// Non-learnable state carried by a layer (e.g. batch-norm running stats).
struct BufferRef {
  std::string name;
  Tensor* value = nullptr;
};

// Construction context shared by all layer builders. With materialize=false
// layers carry shapes only, enough for complexity accounting but not for
// execution.
struct BuildContext {
  bool materialize = true;
  Rng* rng = nullptr; // weight init stream; required when materialize
};

// Explicit forward/backward layer. backward() consumes the gradient w.r.t.
// the layer output and returns the gradient w.r.t. its input, accumulating
// parameter gradients in place. Layers cache what they need during forward;
// a backward() call must follow a forward() on the same input.
class Layer {
public:
  virtual ~Layer() = default;

  virtual Tensor forward(const Tensor& x, bool training, Rng* rng) = 0;
  virtual Tensor backward(const Tensor& grad_out) = 0;

  virtual void collect_params(const std::string& prefix, std::vector<Param*>& out) {}
  virtual void collect_buffers(const std::string& prefix, std::vector<BufferRef>& out) {}

  // Shape inference and multiply-accumulate count for one sample; both must
  // work on described (weight-free) layers.
  virtual std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const = 0;
  virtual int64_t macs(const std::vector<int64_t>& in) const { return 0; }

  virtual std::string kind() const = 0;
};

using LayerPtr = std::unique_ptr<Layer>;

class Sequential : public Layer {
public:
  Sequential() = default;
  explicit Sequential(std::string name) : name_(std::move(name)) {}

  Sequential& add(LayerPtr layer) {
    layers_.push_back(std::move(layer));
    return *this;
  }
  size_t size() const { return layers_.size(); }
  Layer& at(size_t i) { return *layers_.at(i); }

  Tensor forward(const Tensor& x, bool training, Rng* rng) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_params(const std::string& prefix, std::vector<Param*>& out) override;
  void collect_buffers(const std::string& prefix, std::vector<BufferRef>& out) override;
  std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const override;
  int64_t macs(const std::vector<int64_t>& in) const override;
  std::string kind() const override { return name_.empty() ? "sequential" : name_; }

private:
  std::string name_;
  std::vector<LayerPtr> layers_;
};

// 2-D convolution, NCHW, optional groups, He-normal init.
class Conv2d : public Layer {
public:
  Conv2d(const BuildContext& ctx, int in_ch, int out_ch, int kh, int kw, int stride_h,
         int stride_w, int pad_h, int pad_w, int groups, bool bias);
  // Square kernel convenience.
  Conv2d(const BuildContext& ctx, int in_ch, int out_ch, int k, int stride, int pad,
         int groups = 1, bool bias = true)
      : Conv2d(ctx, in_ch, out_ch, k, k, stride, stride, pad, pad, groups, bias) {}

  Tensor forward(const Tensor& x, bool training, Rng* rng) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_params(const std::string& prefix, std::vector<Param*>& out) override;
  std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const override;
  int64_t macs(const std::vector<int64_t>& in) const override;
  std::string kind() const override { return "conv2d"; }

  Param& weight() { return weight_; }
  Param& bias_param() { return bias_; }

private:
  int in_ch_, out_ch_, kh_, kw_, sh_, sw_, ph_, pw_, groups_;
  bool has_bias_;
  Param weight_; // [out_ch, in_ch/groups, kh, kw]
  Param bias_;   // [out_ch]
  Tensor cached_x_;
};

// Batch normalization with running statistics (momentum 0.1, eps 1e-5).
class BatchNorm2d : public Layer {
public:
  BatchNorm2d(const BuildContext& ctx, int channels, double eps = 1e-5,
              double momentum = 0.1);

  Tensor forward(const Tensor& x, bool training, Rng* rng) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_params(const std::string& prefix, std::vector<Param*>& out) override;
  void collect_buffers(const std::string& prefix, std::vector<BufferRef>& out) override;
  std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const override {
    return in;
  }
  std::string kind() const override { return "batchnorm2d"; }

private:
  int channels_;
  double eps_, momentum_;
  Param gamma_, beta_;
  Tensor running_mean_, running_var_;
  Tensor cached_xhat_;
  std::vector<double> cached_invstd_;
  bool cached_training_ = false;
};

// Per-position layer norm over the channel axis (ConvNeXt style), eps 1e-6.
class ChannelLayerNorm : public Layer {
public:
  ChannelLayerNorm(const BuildContext& ctx, int channels, double eps = 1e-6);

  Tensor forward(const Tensor& x, bool training, Rng* rng) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_params(const std::string& prefix, std::vector<Param*>& out) override;
  std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const override {
    return in;
  }
  std::string kind() const override { return "layernorm"; }

private:
  int channels_;
  double eps_;
  Param gamma_, beta_;
  Tensor cached_xhat_;
  std::vector<double> cached_invstd_;
};

class ReLU : public Layer {
public:
  Tensor forward(const Tensor& x, bool training, Rng* rng) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const override {
    return in;
  }
  std::string kind() const override { return "relu"; }

private:
  Tensor cached_x_;
};

// Exact (erf) GELU.
class GELU : public Layer {
public:
  Tensor forward(const Tensor& x, bool training, Rng* rng) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const override {
    return in;
  }
  std::string kind() const override { return "gelu"; }

private:
  Tensor cached_x_;
};

class MaxPool2d : public Layer {
public:
  MaxPool2d(int k, int stride, int pad = 0) : k_(k), stride_(stride), pad_(pad) {}

  Tensor forward(const Tensor& x, bool training, Rng* rng) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const override;
  std::string kind() const override { return "maxpool2d"; }

private:
  int k_, stride_, pad_;
  std::vector<int64_t> cached_argmax_;
  std::vector<int64_t> cached_in_shape_;
};

// Average pooling, divisor always k*k (padding included).
class AvgPool2d : public Layer {
public:
  AvgPool2d(int k, int stride, int pad = 0) : k_(k), stride_(stride), pad_(pad) {}

  Tensor forward(const Tensor& x, bool training, Rng* rng) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const override;
  std::string kind() const override { return "avgpool2d"; }

private:
  int k_, stride_, pad_;
  std::vector<int64_t> cached_in_shape_;
};

// Global average pool: [N,C,H,W] -> [N,C], or [N,C,1,1] with keepdims.
class GlobalAvgPool : public Layer {
public:
  explicit GlobalAvgPool(bool keepdims = false) : keepdims_(keepdims) {}

  Tensor forward(const Tensor& x, bool training, Rng* rng) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const override;
  std::string kind() const override { return "global_avg_pool"; }

private:
  bool keepdims_;
  std::vector<int64_t> cached_in_shape_;
};

// [N, ...] -> [N, prod(...)].
class Flatten : public Layer {
public:
  Tensor forward(const Tensor& x, bool training, Rng* rng) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const override;
  std::string kind() const override { return "flatten"; }

private:
  std::vector<int64_t> cached_in_shape_;
};

// Affine layer on [N,F] inputs.
class Linear : public Layer {
public:
  Linear(const BuildContext& ctx, int in_features, int out_features, bool bias = true);

  Tensor forward(const Tensor& x, bool training, Rng* rng) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_params(const std::string& prefix, std::vector<Param*>& out) override;
  std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const override;
  int64_t macs(const std::vector<int64_t>& in) const override;
  std::string kind() const override { return "linear"; }

  Param& weight() { return weight_; }
  Param& bias_param() { return bias_; }

private:
  int in_f_, out_f_;
  bool has_bias_;
  Param weight_; // [out, in]
  Param bias_;   // [out]
  Tensor cached_x_;
};

class Dropout : public Layer {
public:
  explicit Dropout(double p) : p_(p) {}

  Tensor forward(const Tensor& x, bool training, Rng* rng) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const override {
    return in;
  }
  std::string kind() const override { return "dropout"; }

private:
  double p_;
  std::vector<double> cached_mask_;
};

// Per-channel learnable scale (ConvNeXt layer scale), initialized to 1e-6.
class ChannelScale : public Layer {
public:
  ChannelScale(const BuildContext& ctx, int channels, double init);

  Tensor forward(const Tensor& x, bool training, Rng* rng) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_params(const std::string& prefix, std::vector<Param*>& out) override;
  std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const override {
    return in;
  }
  std::string kind() const override { return "channel_scale";
  }

private:
  int channels_;
  Param gamma_;
  Tensor cached_x_;
};

// y = skip(x) + drop_path(branch(x)); optional ReLU after the sum (ResNet).
// skip is identity when null. Stochastic depth drops the branch per sample
// with probability drop_rate during training, scaling survivors by 1/keep.
class Residual : public Layer {
public:
  Residual(LayerPtr branch, LayerPtr skip, bool relu_after, double drop_rate);

  Tensor forward(const Tensor& x, bool training, Rng* rng) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_params(const std::string& prefix, std::vector<Param*>& out) override;
  void collect_buffers(const std::string& prefix, std::vector<BufferRef>& out) override;
  std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const override;
  int64_t macs(const std::vector<int64_t>& in) const override;
  std::string kind() const override { return "residual"; }

private:
  LayerPtr branch_;
  LayerPtr skip_;
  bool relu_after_;
  double drop_rate_;
  std::vector<double> cached_keep_; // per-sample branch scale used in forward
  Tensor cached_sum_;
};

// Runs each branch on the same input and concatenates along channels.
class ConcatBranches : public Layer {
public:
  explicit ConcatBranches(std::vector<LayerPtr> branches)
      : branches_(std::move(branches)) {}

  Tensor forward(const Tensor& x, bool training, Rng* rng) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_params(const std::string& prefix, std::vector<Param*>& out) override;
  void collect_buffers(const std::string& prefix, std::vector<BufferRef>& out) override;
  std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const override;
  int64_t macs(const std::vector<int64_t>& in) const override;
  std::string kind() const override { return "concat"; }

private:
  std::vector<LayerPtr> branches_;
  std::vector<int64_t> cached_widths_;
};

// Bilinear resize to a fixed resolution (Inception's canonical 299 input).
class InputResize : public Layer {
public:
  InputResize(int out_h, int out_w) : out_h_(out_h), out_w_(out_w) {}

  Tensor forward(const Tensor& x, bool training, Rng* rng) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const override;
  std::string kind() const override { return "input_resize"; }

private:
  int out_h_, out_w_;
  std::vector<int64_t> cached_in_shape_;
};

// Total learnable scalars under a layer tree.
int64_t param_count(Layer& layer);

} // namespace svx::nn
