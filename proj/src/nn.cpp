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
#include "sludgevision/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>

#include "sludgevision/common.hpp"

namespace svx::nn {

namespace {

// C[M x N] (+)= A[M x K] * B[K x N], all row-major contiguous.
void gemm(const double* A, const double* B, double* C, int64_t M, int64_t K, int64_t N,
          bool accumulate) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < M; ++i) {
    double* crow = C + i * N;
    if (!accumulate) std::memset(crow, 0, size_t(N) * sizeof(double));
    const double* arow = A + i * K;
    for (int64_t k = 0; k < K; ++k) {
      const double a = arow[k];
      if (a == 0.0) continue;
      const double* brow = B + k * N;
      for (int64_t j = 0; j < N; ++j) crow[j] += a * brow[j];
    }
  }
}

// C[M x N] (+)= A[M x P] * B[N x P]^T.
void gemm_abt(const double* A, const double* B, double* C, int64_t M, int64_t P, int64_t N,
              bool accumulate) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < M; ++i) {
    const double* arow = A + i * P;
    double* crow = C + i * N;
    for (int64_t j = 0; j < N; ++j) {
      const double* brow = B + j * P;
      double acc = 0.0;
      for (int64_t p = 0; p < P; ++p) acc += arow[p] * brow[p];
      if (accumulate) {
        crow[j] += acc;
      } else {
        crow[j] = acc;
      }
    }
  }
}

// C[K x N] (+)= A[M x K]^T * B[M x N].
void gemm_atb(const double* A, const double* B, double* C, int64_t M, int64_t K, int64_t N,
              bool accumulate) {
#pragma omp parallel for schedule(static)
  for (int64_t k = 0; k < K; ++k) {
    double* crow = C + k * N;
    if (!accumulate) std::memset(crow, 0, size_t(N) * sizeof(double));
    for (int64_t i = 0; i < M; ++i) {
      const double a = A[i * K + k];
      if (a == 0.0) continue;
      const double* brow = B + i * N;
      for (int64_t j = 0; j < N; ++j) crow[j] += a * brow[j];
    }
  }
}

void im2col(const double* x, int64_t ic0, int64_t ic1, int64_t ih, int64_t iw, int kh, int kw,
            int sh, int sw, int ph, int pw, int64_t oh, int64_t ow, double* col) {
  int64_t row = 0;
  for (int64_t c = ic0; c < ic1; ++c) {
    const double* plane = x + c * ih * iw;
    for (int r = 0; r < kh; ++r) {
      for (int s = 0; s < kw; ++s, ++row) {
        double* out = col + row * oh * ow;
        for (int64_t oy = 0; oy < oh; ++oy) {
          const int64_t iy = oy * sh - ph + r;
          if (iy < 0 || iy >= ih) {
            std::memset(out + oy * ow, 0, size_t(ow) * sizeof(double));
            continue;
          }
          const double* src = plane + iy * iw;
          double* dst = out + oy * ow;
          for (int64_t ox = 0; ox < ow; ++ox) {
            const int64_t ix = ox * sw - pw + s;
            dst[ox] = (ix >= 0 && ix < iw) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const double* col, int64_t ic0, int64_t ic1, int64_t ih, int64_t iw, int kh,
                int kw, int sh, int sw, int ph, int pw, int64_t oh, int64_t ow, double* x) {
  int64_t row = 0;
  for (int64_t c = ic0; c < ic1; ++c) {
    double* plane = x + c * ih * iw;
    for (int r = 0; r < kh; ++r) {
      for (int s = 0; s < kw; ++s, ++row) {
        const double* in = col + row * oh * ow;
        for (int64_t oy = 0; oy < oh; ++oy) {
          const int64_t iy = oy * sh - ph + r;
          if (iy < 0 || iy >= ih) continue;
          double* dst = plane + iy * iw;
          for (int64_t ox = 0; ox < ow; ++ox) {
            const int64_t ix = ox * sw - pw + s;
            if (ix >= 0 && ix < iw) dst[ix] += in[oy * ow + ox];
          }
        }
      }
    }
  }
}

int64_t out_extent(int64_t in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

void check_materialized(const Tensor& t, const char* who) {
  SVX_CHECK(t.allocated(), ErrorKind::validation,
            std::string(who) + ": layer was built weight-free (complexity only)");
}

} // namespace

// ---------------------------------------------------------------------------
// Sequential

Tensor Sequential::forward(const Tensor& x, bool training, Rng* rng) {
  Tensor cur = x;
  for (auto& l : layers_) cur = l->forward(cur, training, rng);
  return cur;
}

Tensor Sequential::backward(const Tensor& grad_out) {
  Tensor cur = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    cur = (*it)->backward(cur);
  }
  return cur;
}

void Sequential::collect_params(const std::string& prefix, std::vector<Param*>& out) {
  for (size_t i = 0; i < layers_.size(); ++i) {
    layers_[i]->collect_params(prefix + "." + std::to_string(i), out);
  }
}

void Sequential::collect_buffers(const std::string& prefix, std::vector<BufferRef>& out) {
  for (size_t i = 0; i < layers_.size(); ++i) {
    layers_[i]->collect_buffers(prefix + "." + std::to_string(i), out);
  }
}

std::vector<int64_t> Sequential::output_shape(const std::vector<int64_t>& in) const {
  std::vector<int64_t> cur = in;
  for (const auto& l : layers_) cur = l->output_shape(cur);
  return cur;
}

int64_t Sequential::macs(const std::vector<int64_t>& in) const {
  int64_t total = 0;
  std::vector<int64_t> cur = in;
  for (const auto& l : layers_) {
    total += l->macs(cur);
    cur = l->output_shape(cur);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(const BuildContext& ctx, int in_ch, int out_ch, int kh, int kw, int stride_h,
               int stride_w, int pad_h, int pad_w, int groups, bool bias)
    : in_ch_(in_ch), out_ch_(out_ch), kh_(kh), kw_(kw), sh_(stride_h), sw_(stride_w),
      ph_(pad_h), pw_(pad_w), groups_(groups), has_bias_(bias) {
  SVX_CHECK(in_ch > 0 && out_ch > 0 && kh > 0 && kw > 0 && stride_h > 0 && stride_w > 0 &&
                pad_h >= 0 && pad_w >= 0 && groups > 0,
            ErrorKind::validation, "conv2d: bad geometry");
  SVX_CHECK(in_ch % groups == 0 && out_ch % groups == 0, ErrorKind::validation,
            "conv2d: channels must divide groups");
  weight_.value = Tensor({out_ch, in_ch / groups, kh, kw}, ctx.materialize);
  weight_.decay = true;
  if (has_bias_) {
    bias_.value = Tensor({out_ch}, ctx.materialize);
    bias_.decay = false;
  }
  if (ctx.materialize) {
    SVX_CHECK(ctx.rng != nullptr, ErrorKind::validation, "conv2d: init rng required");
    const double fan_in = double(in_ch / groups) * kh * kw;
    const double std = std::sqrt(2.0 / fan_in);
    for (auto& v : weight_.value.vec()) v = ctx.rng->normal(0.0, std);
    // bias stays zero
  }
}

Tensor Conv2d::forward(const Tensor& x, bool training, Rng* rng) {
  check_materialized(weight_.value, "conv2d");
  SVX_CHECK(x.rank() == 4 && x.dim(1) == in_ch_, ErrorKind::validation,
            "conv2d: input shape mismatch");
  const int64_t N = x.dim(0), IH = x.dim(2), IW = x.dim(3);
  const int64_t OH = out_extent(IH, kh_, sh_, ph_);
  const int64_t OW = out_extent(IW, kw_, sw_, pw_);
  SVX_CHECK(OH >= 1 && OW >= 1, ErrorKind::validation, "conv2d: input too small");

  Tensor y({N, out_ch_, OH, OW});
  const int64_t icg = in_ch_ / groups_;
  const int64_t ocg = out_ch_ / groups_;
  const int64_t Kg = icg * kh_ * kw_;
  const int64_t P = OH * OW;
  std::vector<double> col(size_t(Kg) * P);

  for (int64_t n = 0; n < N; ++n) {
    const double* xn = x.data() + n * in_ch_ * IH * IW;
    double* yn = y.data() + n * out_ch_ * P;
    for (int g = 0; g < groups_; ++g) {
      im2col(xn, g * icg, (g + 1) * icg, IH, IW, kh_, kw_, sh_, sw_, ph_, pw_, OH, OW,
             col.data());
      gemm(weight_.value.data() + int64_t(g) * ocg * Kg, col.data(), yn + int64_t(g) * ocg * P,
           ocg, Kg, P, false);
    }
    if (has_bias_) {
      for (int64_t oc = 0; oc < out_ch_; ++oc) {
        const double b = bias_.value[oc];
        double* row = yn + oc * P;
        for (int64_t p = 0; p < P; ++p) row[p] += b;
      }
    }
  }
  cached_x_ = x;
  return y;
}

Tensor Conv2d::backward(const Tensor& grad_out) {
  const Tensor& x = cached_x_;
  SVX_CHECK(x.allocated() && x.rank() == 4, ErrorKind::validation,
            "conv2d: backward before forward");
  const int64_t N = x.dim(0), IH = x.dim(2), IW = x.dim(3);
  const int64_t OH = grad_out.dim(2), OW = grad_out.dim(3);
  const int64_t icg = in_ch_ / groups_;
  const int64_t ocg = out_ch_ / groups_;
  const int64_t Kg = icg * kh_ * kw_;
  const int64_t P = OH * OW;

  if (!weight_.grad.allocated() || weight_.grad.shape() != weight_.value.shape()) {
    weight_.grad = weight_.value.shaped_like();
  }
  if (has_bias_ && (!bias_.grad.allocated() || bias_.grad.shape() != bias_.value.shape())) {
    bias_.grad = bias_.value.shaped_like();
  }

  Tensor dx({N, in_ch_, IH, IW});
  std::vector<double> col(size_t(Kg) * P);
  std::vector<double> dcol(size_t(Kg) * P);

  for (int64_t n = 0; n < N; ++n) {
    const double* xn = x.data() + n * in_ch_ * IH * IW;
    const double* gn = grad_out.data() + n * out_ch_ * P;
    double* dxn = dx.data() + n * in_ch_ * IH * IW;
    for (int g = 0; g < groups_; ++g) {
      im2col(xn, g * icg, (g + 1) * icg, IH, IW, kh_, kw_, sh_, sw_, ph_, pw_, OH, OW,
             col.data());
      const double* gy = gn + int64_t(g) * ocg * P;
      // dW += gy * col^T
      gemm_abt(gy, col.data(), weight_.grad.data() + int64_t(g) * ocg * Kg, ocg, P, Kg, true);
      // dcol = W^T * gy
      gemm_atb(weight_.value.data() + int64_t(g) * ocg * Kg, gy, dcol.data(), ocg, Kg, P,
               false);
      col2im_add(dcol.data(), g * icg, (g + 1) * icg, IH, IW, kh_, kw_, sh_, sw_, ph_, pw_,
                 OH, OW, dxn);
    }
    if (has_bias_) {
      for (int64_t oc = 0; oc < out_ch_; ++oc) {
        const double* row = gn + oc * P;
        double acc = 0.0;
        for (int64_t p = 0; p < P; ++p) acc += row[p];
        bias_.grad[oc] += acc;
      }
    }
  }
  return dx;
}

void Conv2d::collect_params(const std::string& prefix, std::vector<Param*>& out) {
  weight_.name = prefix + ".weight";
  out.push_back(&weight_);
  if (has_bias_) {
    bias_.name = prefix + ".bias";
    out.push_back(&bias_);
  }
}

std::vector<int64_t> Conv2d::output_shape(const std::vector<int64_t>& in) const {
  SVX_CHECK(in.size() == 4 && in[1] == in_ch_, ErrorKind::validation,
            "conv2d: shape mismatch");
  return {in[0], out_ch_, out_extent(in[2], kh_, sh_, ph_), out_extent(in[3], kw_, sw_, pw_)};
}

int64_t Conv2d::macs(const std::vector<int64_t>& in) const {
  auto out = output_shape(in);
  return out[1] * out[2] * out[3] * int64_t(in_ch_ / groups_) * kh_ * kw_;
}

// ---------------------------------------------------------------------------
// BatchNorm2d

BatchNorm2d::BatchNorm2d(const BuildContext& ctx, int channels, double eps, double momentum)
    : channels_(channels), eps_(eps), momentum_(momentum) {
  gamma_.value = Tensor({channels}, ctx.materialize);
  gamma_.decay = false;
  beta_.value = Tensor({channels}, ctx.materialize);
  beta_.decay = false;
  running_mean_ = Tensor({channels}, ctx.materialize);
  running_var_ = Tensor({channels}, ctx.materialize);
  if (ctx.materialize) {
    gamma_.value.fill(1.0);
    running_var_.fill(1.0);
  }
}

Tensor BatchNorm2d::forward(const Tensor& x, bool training, Rng* rng) {
  check_materialized(gamma_.value, "batchnorm2d");
  SVX_CHECK(x.rank() == 4 && x.dim(1) == channels_, ErrorKind::validation,
            "batchnorm2d: input shape mismatch");
  const int64_t N = x.dim(0), C = channels_, H = x.dim(2), W = x.dim(3);
  const int64_t plane = H * W;
  const int64_t count = N * plane;

  Tensor y = x.shaped_like();
  cached_xhat_ = x.shaped_like();
  cached_invstd_.assign(size_t(C), 0.0);
  cached_training_ = training;

  for (int64_t c = 0; c < C; ++c) {
    double mean, var;
    if (training) {
      double sum = 0.0, sq = 0.0;
      for (int64_t n = 0; n < N; ++n) {
        const double* p = x.data() + (n * C + c) * plane;
        for (int64_t i = 0; i < plane; ++i) {
          sum += p[i];
          sq += p[i] * p[i];
        }
      }
      mean = sum / double(count);
      var = sq / double(count) - mean * mean;
      if (var < 0.0) var = 0.0;
      const double unbiased = count > 1 ? var * double(count) / double(count - 1) : var;
      running_mean_[c] = (1.0 - momentum_) * running_mean_[c] + momentum_ * mean;
      running_var_[c] = (1.0 - momentum_) * running_var_[c] + momentum_ * unbiased;
    } else {
      mean = running_mean_[c];
      var = running_var_[c];
    }
    const double invstd = 1.0 / std::sqrt(var + eps_);
    cached_invstd_[size_t(c)] = invstd;
    const double g = gamma_.value[c], b = beta_.value[c];
    for (int64_t n = 0; n < N; ++n) {
      const double* p = x.data() + (n * C + c) * plane;
      double* xh = cached_xhat_.data() + (n * C + c) * plane;
      double* out = y.data() + (n * C + c) * plane;
      for (int64_t i = 0; i < plane; ++i) {
        xh[i] = (p[i] - mean) * invstd;
        out[i] = g * xh[i] + b;
      }
    }
  }
  return y;
}

Tensor BatchNorm2d::backward(const Tensor& grad_out) {
  const int64_t N = grad_out.dim(0), C = channels_, H = grad_out.dim(2), W = grad_out.dim(3);
  const int64_t plane = H * W;
  const int64_t count = N * plane;

  if (!gamma_.grad.allocated()) gamma_.grad = gamma_.value.shaped_like();
  if (!beta_.grad.allocated()) beta_.grad = beta_.value.shaped_like();

  Tensor dx = grad_out.shaped_like();
  for (int64_t c = 0; c < C; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int64_t n = 0; n < N; ++n) {
      const double* dy = grad_out.data() + (n * C + c) * plane;
      const double* xh = cached_xhat_.data() + (n * C + c) * plane;
      for (int64_t i = 0; i < plane; ++i) {
        sum_dy += dy[i];
        sum_dy_xhat += dy[i] * xh[i];
      }
    }
    gamma_.grad[c] += sum_dy_xhat;
    beta_.grad[c] += sum_dy;

    const double g = gamma_.value[c];
    const double invstd = cached_invstd_[size_t(c)];
    if (cached_training_) {
      const double mean_dy = sum_dy / double(count);
      const double mean_dy_xhat = sum_dy_xhat / double(count);
      for (int64_t n = 0; n < N; ++n) {
        const double* dy = grad_out.data() + (n * C + c) * plane;
        const double* xh = cached_xhat_.data() + (n * C + c) * plane;
        double* out = dx.data() + (n * C + c) * plane;
        for (int64_t i = 0; i < plane; ++i) {
          out[i] = g * invstd * (dy[i] - mean_dy - xh[i] * mean_dy_xhat);
        }
      }
    } else {
      for (int64_t n = 0; n < N; ++n) {
        const double* dy = grad_out.data() + (n * C + c) * plane;
        double* out = dx.data() + (n * C + c) * plane;
        for (int64_t i = 0; i < plane; ++i) out[i] = g * invstd * dy[i];
      }
    }
  }
  return dx;
}

void BatchNorm2d::collect_params(const std::string& prefix, std::vector<Param*>& out) {
  gamma_.name = prefix + ".weight";
  beta_.name = prefix + ".bias";
  out.push_back(&gamma_);
  out.push_back(&beta_);
}

void BatchNorm2d::collect_buffers(const std::string& prefix, std::vector<BufferRef>& out) {
  out.push_back({prefix + ".running_mean", &running_mean_});
  out.push_back({prefix + ".running_var", &running_var_});
}

// ---------------------------------------------------------------------------
// ChannelLayerNorm

ChannelLayerNorm::ChannelLayerNorm(const BuildContext& ctx, int channels, double eps)
    : channels_(channels), eps_(eps) {
  gamma_.value = Tensor({channels}, ctx.materialize);
  gamma_.decay = false;
  beta_.value = Tensor({channels}, ctx.materialize);
  beta_.decay = false;
  if (ctx.materialize) gamma_.value.fill(1.0);
}

Tensor ChannelLayerNorm::forward(const Tensor& x, bool training, Rng* rng) {
  check_materialized(gamma_.value, "layernorm");
  SVX_CHECK(x.rank() == 4 && x.dim(1) == channels_, ErrorKind::validation,
            "layernorm: input shape mismatch");
  const int64_t N = x.dim(0), C = channels_, H = x.dim(2), W = x.dim(3);
  const int64_t plane = H * W;

  Tensor y = x.shaped_like();
  cached_xhat_ = x.shaped_like();
  cached_invstd_.assign(size_t(N * plane), 0.0);

  for (int64_t n = 0; n < N; ++n) {
    const double* xn = x.data() + n * C * plane;
    double* yn = y.data() + n * C * plane;
    double* xhn = cached_xhat_.data() + n * C * plane;
    for (int64_t i = 0; i < plane; ++i) {
      double sum = 0.0, sq = 0.0;
      for (int64_t c = 0; c < C; ++c) {
        const double v = xn[c * plane + i];
        sum += v;
        sq += v * v;
      }
      const double mean = sum / double(C);
      double var = sq / double(C) - mean * mean;
      if (var < 0.0) var = 0.0;
      const double invstd = 1.0 / std::sqrt(var + eps_);
      cached_invstd_[size_t(n * plane + i)] = invstd;
      for (int64_t c = 0; c < C; ++c) {
        const double xh = (xn[c * plane + i] - mean) * invstd;
        xhn[c * plane + i] = xh;
        yn[c * plane + i] = gamma_.value[c] * xh + beta_.value[c];
      }
    }
  }
  return y;
}

Tensor ChannelLayerNorm::backward(const Tensor& grad_out) {
  const int64_t N = grad_out.dim(0), C = channels_, H = grad_out.dim(2), W = grad_out.dim(3);
  const int64_t plane = H * W;

  if (!gamma_.grad.allocated()) gamma_.grad = gamma_.value.shaped_like();
  if (!beta_.grad.allocated()) beta_.grad = beta_.value.shaped_like();

  Tensor dx = grad_out.shaped_like();
  for (int64_t n = 0; n < N; ++n) {
    const double* dyn = grad_out.data() + n * C * plane;
    const double* xhn = cached_xhat_.data() + n * C * plane;
    double* dxn = dx.data() + n * C * plane;
    for (int64_t i = 0; i < plane; ++i) {
      double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
      for (int64_t c = 0; c < C; ++c) {
        const double dy = dyn[c * plane + i];
        const double xh = xhn[c * plane + i];
        gamma_.grad[c] += dy * xh;
        beta_.grad[c] += dy;
        const double dxhat = dy * gamma_.value[c];
        sum_dxhat += dxhat;
        sum_dxhat_xhat += dxhat * xh;
      }
      const double invstd = cached_invstd_[size_t(n * plane + i)];
      for (int64_t c = 0; c < C; ++c) {
        const double dxhat = dyn[c * plane + i] * gamma_.value[c];
        dxn[c * plane + i] = invstd * (dxhat - sum_dxhat / double(C) -
                                       xhn[c * plane + i] * sum_dxhat_xhat / double(C));
      }
    }
  }
  return dx;
}

void ChannelLayerNorm::collect_params(const std::string& prefix, std::vector<Param*>& out) {
  gamma_.name = prefix + ".weight";
  beta_.name = prefix + ".bias";
  out.push_back(&gamma_);
  out.push_back(&beta_);
}

// ---------------------------------------------------------------------------
// Activations

Tensor ReLU::forward(const Tensor& x, bool training, Rng* rng) {
  cached_x_ = x;
  Tensor y = x;
  for (auto& v : y.vec()) v = v > 0.0 ? v : 0.0;
  return y;
}

Tensor ReLU::backward(const Tensor& grad_out) {
  Tensor dx = grad_out;
  const auto& xv = cached_x_.vec();
  auto& dv = dx.vec();
  for (size_t i = 0; i < dv.size(); ++i) {
    if (xv[i] <= 0.0) dv[i] = 0.0;
  }
  return dx;
}

Tensor GELU::forward(const Tensor& x, bool training, Rng* rng) {
  cached_x_ = x;
  Tensor y = x;
  for (auto& v : y.vec()) v = 0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
  return y;
}

Tensor GELU::backward(const Tensor& grad_out) {
  Tensor dx = grad_out;
  const auto& xv = cached_x_.vec();
  auto& dv = dx.vec();
  const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  for (size_t i = 0; i < dv.size(); ++i) {
    const double x = xv[i];
    const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
    const double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
    dv[i] *= cdf + x * pdf;
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Pooling

Tensor MaxPool2d::forward(const Tensor& x, bool training, Rng* rng) {
  const int64_t N = x.dim(0), C = x.dim(1), IH = x.dim(2), IW = x.dim(3);
  const int64_t OH = out_extent(IH, k_, stride_, pad_);
  const int64_t OW = out_extent(IW, k_, stride_, pad_);
  SVX_CHECK(OH >= 1 && OW >= 1, ErrorKind::validation, "maxpool2d: input too small");

  Tensor y({N, C, OH, OW});
  cached_argmax_.assign(size_t(N * C * OH * OW), 0);
  cached_in_shape_ = x.shape();

  int64_t oidx = 0;
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t c = 0; c < C; ++c) {
      const double* plane = x.data() + (n * C + c) * IH * IW;
      for (int64_t oy = 0; oy < OH; ++oy) {
        for (int64_t ox = 0; ox < OW; ++ox, ++oidx) {
          double best = -std::numeric_limits<double>::infinity();
          int64_t best_i = -1;
          for (int r = 0; r < k_; ++r) {
            const int64_t iy = oy * stride_ - pad_ + r;
            if (iy < 0 || iy >= IH) continue;
            for (int s = 0; s < k_; ++s) {
              const int64_t ix = ox * stride_ - pad_ + s;
              if (ix < 0 || ix >= IW) continue;
              const double v = plane[iy * IW + ix];
              if (v > best) {
                best = v;
                best_i = iy * IW + ix;
              }
            }
          }
          y[oidx] = best;
          cached_argmax_[size_t(oidx)] = (n * C + c) * IH * IW + best_i;
        }
      }
    }
  }
  return y;
}

Tensor MaxPool2d::backward(const Tensor& grad_out) {
  Tensor dx(cached_in_shape_);
  const auto& gv = grad_out.vec();
  for (size_t i = 0; i < gv.size(); ++i) {
    dx[cached_argmax_[i]] += gv[i];
  }
  return dx;
}

std::vector<int64_t> MaxPool2d::output_shape(const std::vector<int64_t>& in) const {
  return {in[0], in[1], out_extent(in[2], k_, stride_, pad_),
          out_extent(in[3], k_, stride_, pad_)};
}

Tensor AvgPool2d::forward(const Tensor& x, bool training, Rng* rng) {
  const int64_t N = x.dim(0), C = x.dim(1), IH = x.dim(2), IW = x.dim(3);
  const int64_t OH = out_extent(IH, k_, stride_, pad_);
  const int64_t OW = out_extent(IW, k_, stride_, pad_);
  SVX_CHECK(OH >= 1 && OW >= 1, ErrorKind::validation, "avgpool2d: input too small");

  Tensor y({N, C, OH, OW});
  cached_in_shape_ = x.shape();
  const double inv = 1.0 / double(k_ * k_);

  int64_t oidx = 0;
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t c = 0; c < C; ++c) {
      const double* plane = x.data() + (n * C + c) * IH * IW;
      for (int64_t oy = 0; oy < OH; ++oy) {
        for (int64_t ox = 0; ox < OW; ++ox, ++oidx) {
          double acc = 0.0;
          for (int r = 0; r < k_; ++r) {
            const int64_t iy = oy * stride_ - pad_ + r;
            if (iy < 0 || iy >= IH) continue;
            for (int s = 0; s < k_; ++s) {
              const int64_t ix = ox * stride_ - pad_ + s;
              if (ix >= 0 && ix < IW) acc += plane[iy * IW + ix];
            }
          }
          y[oidx] = acc * inv;
        }
      }
    }
  }
  return y;
}

Tensor AvgPool2d::backward(const Tensor& grad_out) {
  const int64_t N = cached_in_shape_[0], C = cached_in_shape_[1];
  const int64_t IH = cached_in_shape_[2], IW = cached_in_shape_[3];
  const int64_t OH = grad_out.dim(2), OW = grad_out.dim(3);
  const double inv = 1.0 / double(k_ * k_);

  Tensor dx(cached_in_shape_);
  int64_t oidx = 0;
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t c = 0; c < C; ++c) {
      double* plane = dx.data() + (n * C + c) * IH * IW;
      for (int64_t oy = 0; oy < OH; ++oy) {
        for (int64_t ox = 0; ox < OW; ++ox, ++oidx) {
          const double g = grad_out[oidx] * inv;
          for (int r = 0; r < k_; ++r) {
            const int64_t iy = oy * stride_ - pad_ + r;
            if (iy < 0 || iy >= IH) continue;
            for (int s = 0; s < k_; ++s) {
              const int64_t ix = ox * stride_ - pad_ + s;
              if (ix >= 0 && ix < IW) plane[iy * IW + ix] += g;
            }
          }
        }
      }
    }
  }
  return dx;
}

std::vector<int64_t> AvgPool2d::output_shape(const std::vector<int64_t>& in) const {
  return {in[0], in[1], out_extent(in[2], k_, stride_, pad_),
          out_extent(in[3], k_, stride_, pad_)};
}

Tensor GlobalAvgPool::forward(const Tensor& x, bool training, Rng* rng) {
  const int64_t N = x.dim(0), C = x.dim(1), plane = x.dim(2) * x.dim(3);
  cached_in_shape_ = x.shape();
  Tensor y(keepdims_ ? std::vector<int64_t>{N, C, 1, 1} : std::vector<int64_t>{N, C});
  const double inv = 1.0 / double(plane);
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t c = 0; c < C; ++c) {
      const double* p = x.data() + (n * C + c) * plane;
      double acc = 0.0;
      for (int64_t i = 0; i < plane; ++i) acc += p[i];
      y[n * C + c] = acc * inv;
    }
  }
  return y;
}

Tensor GlobalAvgPool::backward(const Tensor& grad_out) {
  const int64_t N = cached_in_shape_[0], C = cached_in_shape_[1];
  const int64_t plane = cached_in_shape_[2] * cached_in_shape_[3];
  const double inv = 1.0 / double(plane);
  Tensor dx(cached_in_shape_);
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t c = 0; c < C; ++c) {
      const double g = grad_out[n * C + c] * inv;
      double* p = dx.data() + (n * C + c) * plane;
      for (int64_t i = 0; i < plane; ++i) p[i] = g;
    }
  }
  return dx;
}

std::vector<int64_t> GlobalAvgPool::output_shape(const std::vector<int64_t>& in) const {
  if (keepdims_) return {in[0], in[1], 1, 1};
  return {in[0], in[1]};
}

Tensor Flatten::forward(const Tensor& x, bool training, Rng* rng) {
  cached_in_shape_ = x.shape();
  Tensor y({x.dim(0), x.numel() / x.dim(0)});
  y.vec() = x.vec();
  return y;
}

Tensor Flatten::backward(const Tensor& grad_out) {
  Tensor dx(cached_in_shape_);
  dx.vec() = grad_out.vec();
  return dx;
}

std::vector<int64_t> Flatten::output_shape(const std::vector<int64_t>& in) const {
  int64_t per = 1;
  for (size_t i = 1; i < in.size(); ++i) per *= in[i];
  return {in[0], per};
}

// ---------------------------------------------------------------------------
// Linear

Linear::Linear(const BuildContext& ctx, int in_features, int out_features, bool bias)
    : in_f_(in_features), out_f_(out_features), has_bias_(bias) {
  SVX_CHECK(in_features > 0 && out_features > 0, ErrorKind::validation,
            "linear: bad dimensions");
  weight_.value = Tensor({out_features, in_features}, ctx.materialize);
  weight_.decay = true;
  if (has_bias_) {
    bias_.value = Tensor({out_features}, ctx.materialize);
    bias_.decay = false;
  }
  if (ctx.materialize) {
    SVX_CHECK(ctx.rng != nullptr, ErrorKind::validation, "linear: init rng required");
    const double std = std::sqrt(1.0 / double(in_features));
    for (auto& v : weight_.value.vec()) v = ctx.rng->normal(0.0, std);
  }
}

Tensor Linear::forward(const Tensor& x, bool training, Rng* rng) {
  check_materialized(weight_.value, "linear");
  SVX_CHECK(x.rank() == 2 && x.dim(1) == in_f_, ErrorKind::validation,
            "linear: input shape mismatch");
  const int64_t N = x.dim(0);
  Tensor y({N, out_f_});
  gemm_abt(x.data(), weight_.value.data(), y.data(), N, in_f_, out_f_, false);
  if (has_bias_) {
    for (int64_t n = 0; n < N; ++n) {
      for (int64_t o = 0; o < out_f_; ++o) y[n * out_f_ + o] += bias_.value[o];
    }
  }
  cached_x_ = x;
  return y;
}

Tensor Linear::backward(const Tensor& grad_out) {
  const int64_t N = cached_x_.dim(0);
  if (!weight_.grad.allocated()) weight_.grad = weight_.value.shaped_like();
  if (has_bias_ && !bias_.grad.allocated()) bias_.grad = bias_.value.shaped_like();

  // dW += dY^T * X
  gemm_atb(grad_out.data(), cached_x_.data(), weight_.grad.data(), N, out_f_, in_f_, true);
  if (has_bias_) {
    for (int64_t n = 0; n < N; ++n) {
      for (int64_t o = 0; o < out_f_; ++o) bias_.grad[o] += grad_out[n * out_f_ + o];
    }
  }
  Tensor dx({N, in_f_});
  gemm(grad_out.data(), weight_.value.data(), dx.data(), N, out_f_, in_f_, false);
  return dx;
}

void Linear::collect_params(const std::string& prefix, std::vector<Param*>& out) {
  weight_.name = prefix + ".weight";
  out.push_back(&weight_);
  if (has_bias_) {
    bias_.name = prefix + ".bias";
    out.push_back(&bias_);
  }
}

std::vector<int64_t> Linear::output_shape(const std::vector<int64_t>& in) const {
  SVX_CHECK(in.size() == 2 && in[1] == in_f_, ErrorKind::validation,
            "linear: shape mismatch");
  return {in[0], out_f_};
}

int64_t Linear::macs(const std::vector<int64_t>& in) const {
  return int64_t(in_f_) * out_f_;
}

// ---------------------------------------------------------------------------
// Dropout

Tensor Dropout::forward(const Tensor& x, bool training, Rng* rng) {
  if (!training || p_ <= 0.0) {
    cached_mask_.clear();
    return x;
  }
  SVX_CHECK(rng != nullptr, ErrorKind::validation, "dropout: rng required in training");
  const double keep = 1.0 - p_;
  Tensor y = x;
  cached_mask_.assign(y.vec().size(), 0.0);
  for (size_t i = 0; i < y.vec().size(); ++i) {
    const double m = rng->bernoulli(keep) ? 1.0 / keep : 0.0;
    cached_mask_[i] = m;
    y.vec()[i] *= m;
  }
  return y;
}

Tensor Dropout::backward(const Tensor& grad_out) {
  if (cached_mask_.empty()) return grad_out;
  Tensor dx = grad_out;
  for (size_t i = 0; i < dx.vec().size(); ++i) dx.vec()[i] *= cached_mask_[i];
  return dx;
}

// ---------------------------------------------------------------------------
// ChannelScale

ChannelScale::ChannelScale(const BuildContext& ctx, int channels, double init)
    : channels_(channels) {
  gamma_.value = Tensor({channels}, ctx.materialize);
  gamma_.decay = false;
  if (ctx.materialize) gamma_.value.fill(init);
}

Tensor ChannelScale::forward(const Tensor& x, bool training, Rng* rng) {
  check_materialized(gamma_.value, "channel_scale");
  const int64_t N = x.dim(0), C = x.dim(1), plane = x.dim(2) * x.dim(3);
  Tensor y = x;
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t c = 0; c < C; ++c) {
      const double g = gamma_.value[c];
      double* p = y.data() + (n * C + c) * plane;
      for (int64_t i = 0; i < plane; ++i) p[i] *= g;
    }
  }
  cached_x_ = x;
  return y;
}

Tensor ChannelScale::backward(const Tensor& grad_out) {
  const int64_t N = grad_out.dim(0), C = grad_out.dim(1);
  const int64_t plane = grad_out.dim(2) * grad_out.dim(3);
  if (!gamma_.grad.allocated()) gamma_.grad = gamma_.value.shaped_like();

  Tensor dx = grad_out;
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t c = 0; c < C; ++c) {
      const double* dy = grad_out.data() + (n * C + c) * plane;
      const double* xp = cached_x_.data() + (n * C + c) * plane;
      double* out = dx.data() + (n * C + c) * plane;
      double acc = 0.0;
      for (int64_t i = 0; i < plane; ++i) acc += dy[i] * xp[i];
      gamma_.grad[c] += acc;
      const double g = gamma_.value[c];
      for (int64_t i = 0; i < plane; ++i) out[i] = dy[i] * g;
    }
  }
  return dx;
}

void ChannelScale::collect_params(const std::string& prefix, std::vector<Param*>& out) {
  gamma_.name = prefix + ".gamma";
  out.push_back(&gamma_);
}

// ---------------------------------------------------------------------------
// Residual

Residual::Residual(LayerPtr branch, LayerPtr skip, bool relu_after, double drop_rate)
    : branch_(std::move(branch)), skip_(std::move(skip)), relu_after_(relu_after),
      drop_rate_(drop_rate) {
  SVX_CHECK(drop_rate_ >= 0.0 && drop_rate_ < 1.0, ErrorKind::validation,
            "residual: drop rate must lie in [0,1)");
}

Tensor Residual::forward(const Tensor& x, bool training, Rng* rng) {
  Tensor b = branch_->forward(x, training, rng);
  Tensor s = skip_ ? skip_->forward(x, training, rng) : x;
  SVX_CHECK(b.shape() == s.shape(), ErrorKind::validation,
            "residual: branch/skip shape mismatch");

  const int64_t N = b.dim(0);
  const int64_t per = b.numel() / N;
  cached_keep_.assign(size_t(N), 1.0);
  if (training && drop_rate_ > 0.0) {
    SVX_CHECK(rng != nullptr, ErrorKind::validation, "residual: rng required in training");
    const double keep = 1.0 - drop_rate_;
    for (int64_t n = 0; n < N; ++n) {
      cached_keep_[size_t(n)] = rng->bernoulli(keep) ? 1.0 / keep : 0.0;
    }
  }

  Tensor y = s;
  for (int64_t n = 0; n < N; ++n) {
    const double scale = cached_keep_[size_t(n)];
    if (scale == 0.0) continue;
    const double* bp = b.data() + n * per;
    double* yp = y.data() + n * per;
    for (int64_t i = 0; i < per; ++i) yp[i] += scale * bp[i];
  }
  if (relu_after_) {
    cached_sum_ = y;
    for (auto& v : y.vec()) v = v > 0.0 ? v : 0.0;
  }
  return y;
}

Tensor Residual::backward(const Tensor& grad_out) {
  Tensor g = grad_out;
  if (relu_after_) {
    const auto& sv = cached_sum_.vec();
    for (size_t i = 0; i < g.vec().size(); ++i) {
      if (sv[i] <= 0.0) g.vec()[i] = 0.0;
    }
  }

  const int64_t N = g.dim(0);
  const int64_t per = g.numel() / N;
  Tensor gb = g;
  for (int64_t n = 0; n < N; ++n) {
    const double scale = cached_keep_[size_t(n)];
    double* p = gb.data() + n * per;
    for (int64_t i = 0; i < per; ++i) p[i] *= scale;
  }

  Tensor dx = branch_->backward(gb);
  Tensor ds = skip_ ? skip_->backward(g) : g;
  for (size_t i = 0; i < dx.vec().size(); ++i) dx.vec()[i] += ds.vec()[i];
  return dx;
}

void Residual::collect_params(const std::string& prefix, std::vector<Param*>& out) {
  branch_->collect_params(prefix + ".branch", out);
  if (skip_) skip_->collect_params(prefix + ".skip", out);
}

void Residual::collect_buffers(const std::string& prefix, std::vector<BufferRef>& out) {
  branch_->collect_buffers(prefix + ".branch", out);
  if (skip_) skip_->collect_buffers(prefix + ".skip", out);
}

std::vector<int64_t> Residual::output_shape(const std::vector<int64_t>& in) const {
  return branch_->output_shape(in);
}

int64_t Residual::macs(const std::vector<int64_t>& in) const {
  return branch_->macs(in) + (skip_ ? skip_->macs(in) : 0);
}

// ---------------------------------------------------------------------------
// ConcatBranches

Tensor ConcatBranches::forward(const Tensor& x, bool training, Rng* rng) {
  std::vector<Tensor> outs;
  outs.reserve(branches_.size());
  cached_widths_.clear();
  int64_t total_c = 0;
  for (auto& br : branches_) {
    outs.push_back(br->forward(x, training, rng));
    cached_widths_.push_back(outs.back().dim(1));
    total_c += outs.back().dim(1);
  }
  const int64_t N = outs[0].dim(0), H = outs[0].dim(2), W = outs[0].dim(3);
  for (const auto& o : outs) {
    SVX_CHECK(o.dim(0) == N && o.dim(2) == H && o.dim(3) == W, ErrorKind::validation,
              "concat: branch spatial shapes differ");
  }

  Tensor y({N, total_c, H, W});
  const int64_t plane = H * W;
  for (int64_t n = 0; n < N; ++n) {
    int64_t c_off = 0;
    for (const auto& o : outs) {
      const int64_t bc = o.dim(1);
      std::memcpy(y.data() + (n * total_c + c_off) * plane, o.data() + n * bc * plane,
                  size_t(bc * plane) * sizeof(double));
      c_off += bc;
    }
  }
  return y;
}

Tensor ConcatBranches::backward(const Tensor& grad_out) {
  const int64_t N = grad_out.dim(0), H = grad_out.dim(2), W = grad_out.dim(3);
  const int64_t total_c = grad_out.dim(1);
  const int64_t plane = H * W;

  Tensor dx;
  int64_t c_off = 0;
  for (size_t b = 0; b < branches_.size(); ++b) {
    const int64_t bc = cached_widths_[b];
    Tensor slice({N, bc, H, W});
    for (int64_t n = 0; n < N; ++n) {
      std::memcpy(slice.data() + n * bc * plane,
                  grad_out.data() + (n * total_c + c_off) * plane,
                  size_t(bc * plane) * sizeof(double));
    }
    Tensor dxi = branches_[b]->backward(slice);
    if (b == 0) {
      dx = std::move(dxi);
    } else {
      for (size_t i = 0; i < dx.vec().size(); ++i) dx.vec()[i] += dxi.vec()[i];
    }
    c_off += bc;
  }
  return dx;
}

void ConcatBranches::collect_params(const std::string& prefix, std::vector<Param*>& out) {
  for (size_t i = 0; i < branches_.size(); ++i) {
    branches_[i]->collect_params(prefix + ".b" + std::to_string(i), out);
  }
}

void ConcatBranches::collect_buffers(const std::string& prefix, std::vector<BufferRef>& out) {
  for (size_t i = 0; i < branches_.size(); ++i) {
    branches_[i]->collect_buffers(prefix + ".b" + std::to_string(i), out);
  }
}

std::vector<int64_t> ConcatBranches::output_shape(const std::vector<int64_t>& in) const {
  int64_t total_c = 0;
  std::vector<int64_t> first;
  for (const auto& br : branches_) {
    auto s = br->output_shape(in);
    if (first.empty()) first = s;
    total_c += s[1];
  }
  return {first[0], total_c, first[2], first[3]};
}

int64_t ConcatBranches::macs(const std::vector<int64_t>& in) const {
  int64_t total = 0;
  for (const auto& br : branches_) total += br->macs(in);
  return total;
}

// ---------------------------------------------------------------------------
// InputResize

namespace {

struct Tap {
  int64_t i0, i1;
  double w0, w1;
};

Tap bilinear_tap(int64_t out_i, int64_t in_n, int64_t out_n) {
  // align_corners=false source coordinate
  const double scale = double(in_n) / double(out_n);
  double src = (double(out_i) + 0.5) * scale - 0.5;
  if (src < 0.0) src = 0.0;
  if (src > double(in_n - 1)) src = double(in_n - 1);
  const int64_t i0 = int64_t(std::floor(src));
  const int64_t i1 = std::min(i0 + 1, in_n - 1);
  const double f = src - double(i0);
  return {i0, i1, 1.0 - f, f};
}

} // namespace

Tensor InputResize::forward(const Tensor& x, bool training, Rng* rng) {
  const int64_t N = x.dim(0), C = x.dim(1), IH = x.dim(2), IW = x.dim(3);
  cached_in_shape_ = x.shape();
  if (IH == out_h_ && IW == out_w_) return x;

  Tensor y({N, C, out_h_, out_w_});
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t c = 0; c < C; ++c) {
      const double* src = x.data() + (n * C + c) * IH * IW;
      double* dst = y.data() + (n * C + c) * int64_t(out_h_) * out_w_;
      for (int64_t oy = 0; oy < out_h_; ++oy) {
        const Tap ty = bilinear_tap(oy, IH, out_h_);
        for (int64_t ox = 0; ox < out_w_; ++ox) {
          const Tap tx = bilinear_tap(ox, IW, out_w_);
          dst[oy * out_w_ + ox] = ty.w0 * (tx.w0 * src[ty.i0 * IW + tx.i0] +
                                           tx.w1 * src[ty.i0 * IW + tx.i1]) +
                                  ty.w1 * (tx.w0 * src[ty.i1 * IW + tx.i0] +
                                           tx.w1 * src[ty.i1 * IW + tx.i1]);
        }
      }
    }
  }
  return y;
}

Tensor InputResize::backward(const Tensor& grad_out) {
  const int64_t N = cached_in_shape_[0], C = cached_in_shape_[1];
  const int64_t IH = cached_in_shape_[2], IW = cached_in_shape_[3];
  if (IH == out_h_ && IW == out_w_) return grad_out;

  Tensor dx(cached_in_shape_);
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t c = 0; c < C; ++c) {
      double* dst = dx.data() + (n * C + c) * IH * IW;
      const double* g = grad_out.data() + (n * C + c) * int64_t(out_h_) * out_w_;
      for (int64_t oy = 0; oy < out_h_; ++oy) {
        const Tap ty = bilinear_tap(oy, IH, out_h_);
        for (int64_t ox = 0; ox < out_w_; ++ox) {
          const Tap tx = bilinear_tap(ox, IW, out_w_);
          const double gv = g[oy * out_w_ + ox];
          dst[ty.i0 * IW + tx.i0] += ty.w0 * tx.w0 * gv;
          dst[ty.i0 * IW + tx.i1] += ty.w0 * tx.w1 * gv;
          dst[ty.i1 * IW + tx.i0] += ty.w1 * tx.w0 * gv;
          dst[ty.i1 * IW + tx.i1] += ty.w1 * tx.w1 * gv;
        }
      }
    }
  }
  return dx;
}

std::vector<int64_t> InputResize::output_shape(const std::vector<int64_t>& in) const {
  return {in[0], in[1], out_h_, out_w_};
}

// ---------------------------------------------------------------------------

int64_t param_count(Layer& layer) {
  std::vector<Param*> params;
  layer.collect_params("", params);
  int64_t total = 0;
  for (const Param* p : params) total += p->value.numel();
  return total;
}

} // namespace svx::nn
