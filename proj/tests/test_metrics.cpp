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
#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "sludgevision/common.hpp"
#include "sludgevision/metrics.hpp"
#include "sludgevision/rng.hpp"

namespace {

// Direct-summation reference implementations, deliberately written with a
// different accumulation style than the library.
double ref_mae(const svx::EvalBatch& b) {
  double s = 0.0;
  for (size_t i = 0; i < b.size(); ++i) s += std::fabs(b.ground_truth[i] - b.predictions[i]);
  return s / double(b.size());
}

double ref_mape(const svx::EvalBatch& b) {
  double s = 0.0;
  for (size_t i = 0; i < b.size(); ++i)
    s += std::fabs((b.ground_truth[i] - b.predictions[i]) / b.ground_truth[i]);
  return s / double(b.size());
}

double ref_r2(const svx::EvalBatch& b) {
  double mean = 0.0;
  for (double x : b.ground_truth) mean += x;
  mean /= double(b.size());
  double res = 0.0, tot = 0.0;
  for (size_t i = 0; i < b.size(); ++i) {
    res += (b.ground_truth[i] - b.predictions[i]) * (b.ground_truth[i] - b.predictions[i]);
    tot += (b.ground_truth[i] - mean) * (b.ground_truth[i] - mean);
  }
  return 1.0 - res / tot;
}

double ref_mtd(const svx::EvalBatch& b) {
  double s = 0.0;
  for (size_t i = 0; i < b.size(); ++i) {
    double x = b.ground_truth[i];
    double y = b.predictions[i] < svx::kMtdClampEpsilon ? svx::kMtdClampEpsilon : b.predictions[i];
    s += 2.0 * (x * std::log(x / y) + y - x);
  }
  return s / double(b.size());
}

double ref_mse(const svx::EvalBatch& b) {
  double s = 0.0;
  for (size_t i = 0; i < b.size(); ++i) {
    double d = b.predictions[i] - b.ground_truth[i];
    s += d * d;
  }
  return s / double(b.size());
}

svx::EvalBatch random_batch(svx::Rng& rng) {
  svx::EvalBatch b;
  const int n = int(rng.uniform_int(2, 64));
  for (int i = 0; i < n; ++i) {
    b.ground_truth.push_back(rng.uniform(40.0, 450.0));
    b.predictions.push_back(rng.uniform(10.0, 500.0));
  }
  // r2 needs non-constant truth; spread one entry if the draw degenerated.
  b.ground_truth[0] += 25.0;
  return b;
}

} // namespace

TEST_CASE("metrics: agree with direct-summation references over 1000 batches") {
  svx::Rng rng(2026);
  for (int trial = 0; trial < 1000; ++trial) {
    svx::EvalBatch b = random_batch(rng);
    CAPTURE(trial);
    CHECK(svx::mae(b) == doctest::Approx(ref_mae(b)).epsilon(1e-9));
    CHECK(svx::mape(b) == doctest::Approx(ref_mape(b)).epsilon(1e-9));
    CHECK(svx::r2(b) == doctest::Approx(ref_r2(b)).epsilon(1e-9));
    CHECK(svx::mtd_poisson(b) == doctest::Approx(ref_mtd(b)).epsilon(1e-9));
    CHECK(svx::mse(b.predictions, b.ground_truth) == doctest::Approx(ref_mse(b)).epsilon(1e-9));
    auto rep = svx::evaluate(b);
    CHECK(rep.mae == doctest::Approx(ref_mae(b)).epsilon(1e-9));
    CHECK(rep.mape == doctest::Approx(ref_mape(b)).epsilon(1e-9));
    CHECK(rep.r2 == doctest::Approx(ref_r2(b)).epsilon(1e-9));
    CHECK(rep.mtd == doctest::Approx(ref_mtd(b)).epsilon(1e-9));
    CHECK(rep.mse == doctest::Approx(ref_mse(b)).epsilon(1e-9));
    CHECK(rep.n == int64_t(b.size()));
  }
}

TEST_CASE("metrics: hand-computed anchor values") {
  svx::EvalBatch b;
  b.ground_truth = {100.0};
  b.predictions = {90.0};
  CHECK(svx::mae(b) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(svx::mape(b) == doctest::Approx(0.10).epsilon(1e-12));
  CHECK(svx::mse(b.predictions, b.ground_truth) == doctest::Approx(100.0).epsilon(1e-12));

  svx::EvalBatch d;
  d.ground_truth = {2.0};
  d.predictions = {1.0};
  // 2*(2*ln 2 + 1 - 2) = 4 ln 2 - 2
  CHECK(svx::mtd_poisson(d) == doctest::Approx(4.0 * std::log(2.0) - 2.0).epsilon(1e-12));
  CHECK(svx::mtd_poisson(d) == doctest::Approx(0.772588722239781).epsilon(1e-9));

  svx::EvalBatch r;
  r.ground_truth = {100.0, 200.0, 300.0};
  r.predictions = {110.0, 190.0, 310.0};
  // SS_res = 300, SS_tot = 20000
  CHECK(svx::r2(r) == doctest::Approx(1.0 - 300.0 / 20000.0).epsilon(1e-12));
}

TEST_CASE("metrics: perfect predictions zero every deviance") {
  svx::EvalBatch b;
  b.ground_truth = {120.0, 150.0, 180.0, 260.0};
  b.predictions = b.ground_truth;
  CHECK(svx::mae(b) == 0.0);
  CHECK(svx::mape(b) == 0.0);
  CHECK(svx::mse(b.predictions, b.ground_truth) == 0.0);
  CHECK(svx::mtd_poisson(b) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(svx::r2(b) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("metrics: scale behavior") {
  svx::Rng rng(5);
  svx::EvalBatch b = random_batch(rng);
  svx::EvalBatch scaled;
  for (size_t i = 0; i < b.size(); ++i) {
    scaled.ground_truth.push_back(3.0 * b.ground_truth[i]);
    scaled.predictions.push_back(3.0 * b.predictions[i]);
  }
  // MAE scales linearly, MSE quadratically; MAPE and R2 are scale-free.
  CHECK(svx::mae(scaled) == doctest::Approx(3.0 * svx::mae(b)).epsilon(1e-12));
  CHECK(svx::mse(scaled.predictions, scaled.ground_truth) ==
        doctest::Approx(9.0 * svx::mse(b.predictions, b.ground_truth)).epsilon(1e-12));
  CHECK(svx::mape(scaled) == doctest::Approx(svx::mape(b)).epsilon(1e-12));
  CHECK(svx::r2(scaled) == doctest::Approx(svx::r2(b)).epsilon(1e-12));
}

TEST_CASE("metrics: mtd is nonnegative and counts clamped entries") {
  svx::Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    svx::EvalBatch b = random_batch(rng);
    CHECK(svx::mtd_poisson(b) >= 0.0);
  }
  svx::EvalBatch b;
  b.ground_truth = {100.0, 150.0, 200.0};
  b.predictions = {0.0, -5.0, 200.0};
  int64_t clamped = 0;
  double v = svx::mtd_poisson(b, &clamped);
  CHECK(clamped == 2);
  CHECK(std::isfinite(v));
  CHECK(v > 0.0);
}

TEST_CASE("metrics: validation rejects degenerate batches") {
  svx::EvalBatch empty;
  CHECK_THROWS_AS(svx::mae(empty), svx::ValidationError);

  svx::EvalBatch mismatched;
  mismatched.ground_truth = {100.0, 200.0};
  mismatched.predictions = {100.0};
  CHECK_THROWS_AS(mismatched.validate(), svx::ValidationError);

  svx::EvalBatch nonpositive;
  nonpositive.ground_truth = {100.0, 0.0};
  nonpositive.predictions = {100.0, 50.0};
  CHECK_THROWS_AS(svx::mape(nonpositive), svx::ValidationError);

  svx::EvalBatch single;
  single.ground_truth = {100.0};
  single.predictions = {90.0};
  CHECK_THROWS_AS(svx::r2(single), svx::ValidationError);

  svx::EvalBatch constant;
  constant.ground_truth = {100.0, 100.0, 100.0};
  constant.predictions = {90.0, 100.0, 110.0};
  CHECK_THROWS_AS(svx::r2(constant), svx::ValidationError);
}
