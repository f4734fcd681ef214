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
#include "sludgevision/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "sludgevision/common.hpp"

namespace svx {

void EvalBatch::validate() const {
  SVX_CHECK(!ground_truth.empty(), ErrorKind::validation, "empty evaluation batch");
  SVX_CHECK(ground_truth.size() == predictions.size(), ErrorKind::validation,
            "ground truth and prediction lengths differ");
  for (double x : ground_truth)
    SVX_CHECK(x > 0.0 && std::isfinite(x), ErrorKind::validation,
              "ground-truth SVI values must be positive and finite");
}

double mae(const EvalBatch& batch) {
  batch.validate();
  double acc = 0.0;
  for (size_t i = 0; i < batch.size(); ++i)
    acc += std::abs(batch.ground_truth[i] - batch.predictions[i]);
  return acc / double(batch.size());
}

double mape(const EvalBatch& batch) {
  batch.validate();
  double acc = 0.0;
  for (size_t i = 0; i < batch.size(); ++i)
    acc += std::abs(batch.ground_truth[i] - batch.predictions[i]) / batch.ground_truth[i];
  return acc / double(batch.size());
}

double r2(const EvalBatch& batch) {
  batch.validate();
  SVX_CHECK(batch.size() >= 2, ErrorKind::validation, "r2 needs at least two samples");
  double mean = 0.0;
  for (double x : batch.ground_truth) mean += x;
  mean /= double(batch.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (size_t i = 0; i < batch.size(); ++i) {
    double r = batch.ground_truth[i] - batch.predictions[i];
    double t = batch.ground_truth[i] - mean;
    ss_res += r * r;
    ss_tot += t * t;
  }
  SVX_CHECK(ss_tot > 0.0, ErrorKind::validation,
            "r2 is undefined for constant ground truth");
  return 1.0 - ss_res / ss_tot;
}

double mtd_poisson(const EvalBatch& batch, int64_t* clamped) {
  batch.validate();
  int64_t n_clamped = 0;
  double acc = 0.0;
  for (size_t i = 0; i < batch.size(); ++i) {
    double x = batch.ground_truth[i];
    double y = batch.predictions[i];
    if (!(y >= kMtdClampEpsilon)) {
      SVX_CHECK(std::isfinite(y), ErrorKind::validation,
                "non-finite prediction in Tweedie deviance");
      y = kMtdClampEpsilon;
      ++n_clamped;
    }
    acc += 2.0 * (x * std::log(x / y) + y - x);
  }
  if (clamped) *clamped = n_clamped;
  return acc / double(batch.size());
}

double mse(std::span<const double> predictions, std::span<const double> targets) {
  SVX_CHECK(!predictions.empty(), ErrorKind::validation, "empty batch in mse");
  SVX_CHECK(predictions.size() == targets.size(), ErrorKind::validation,
            "prediction and target lengths differ");
  double acc = 0.0;
  for (size_t i = 0; i < predictions.size(); ++i) {
    double d = predictions[i] - targets[i];
    acc += d * d;
  }
  return acc / double(predictions.size());
}

MetricsReport evaluate(const EvalBatch& batch) {
  MetricsReport rep;
  rep.mae = mae(batch);
  rep.mape = mape(batch);
  rep.r2 = r2(batch);
  rep.mtd = mtd_poisson(batch);
  rep.mse = mse(batch.predictions, batch.ground_truth);
  rep.n = int64_t(batch.size());
  return rep;
}

} // namespace svx
