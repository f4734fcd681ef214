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

#include <algorithm>
#include <cstdint>
#include <vector>

#include "sludgevision/common.hpp"

namespace svx {

// Dense row-major tensor of doubles. A tensor may carry its shape without
// storage ("described"): model builders use that for weight-free complexity
// accounting. allocate() must run before element access.
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(std::vector<int64_t> shape, bool materialize = true)
      : shape_(std::move(shape)) {
    if (materialize) allocate();
  }

  static Tensor zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }

  int64_t numel() const {
    int64_t n = 1;
    for (int64_t d : shape_) n *= d;
    return shape_.empty() ? 0 : n;
  }
  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t dim(size_t i) const { return shape_.at(i); }
  size_t rank() const { return shape_.size(); }

  bool allocated() const { return !data_.empty() || numel() == 0; }
  void allocate() {
    if (data_.empty()) data_.assign(size_t(numel()), 0.0);
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& operator[](int64_t i) { return data_[size_t(i)]; }
  double operator[](int64_t i) const { return data_[size_t(i)]; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
  void zero() { fill(0.0); }

  // NCHW convenience accessors.
  double& at4(int64_t n, int64_t c, int64_t h, int64_t w) {
    return data_[size_t(((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
  }
  double at4(int64_t n, int64_t c, int64_t h, int64_t w) const {
    return data_[size_t(((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
  }

  Tensor shaped_like() const { return Tensor(shape_); }

private:
  std::vector<int64_t> shape_;
  std::vector<double> data_;
};

} // namespace svx
