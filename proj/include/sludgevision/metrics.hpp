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
#include <span>
#include <vector>

namespace svx {

// Ground truth x_i paired with predictions y_i, both in mL/g.
struct EvalBatch {
  std::vector<double> ground_truth;
  std::vector<double> predictions;

  size_t size() const { return ground_truth.size(); }
  void validate() const; // equal lengths >= 1, all ground truth > 0
};

struct MetricsReport {
  double mae = 0.0;
  double mape = 0.0; // fraction, not percent
  double r2 = 0.0;
  double mtd = 0.0;
  double mse = 0.0;
  int64_t n = 0;
};

double mae(const EvalBatch& batch);
double mape(const EvalBatch& batch);
// Needs n >= 2 and non-constant ground truth.
double r2(const EvalBatch& batch);
// Poisson deviance; predictions are clamped to kMtdClampEpsilon first and the
// number of clamped entries is reported through `clamped` when given.
double mtd_poisson(const EvalBatch& batch, int64_t* clamped = nullptr);
double mse(std::span<const double> predictions, std::span<const double> targets);

inline constexpr double kMtdClampEpsilon = 1e-6;

// All five metrics in one pass; r2 requires a non-degenerate batch.
MetricsReport evaluate(const EvalBatch& batch);

} // namespace svx
