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
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "sludgevision/augment.hpp"
#include "sludgevision/ingest.hpp"
#include "sludgevision/metrics.hpp"
#include "sludgevision/model.hpp"
#include "sludgevision/trainer.hpp"

namespace svx {

// Day-level fold assignment: all replicates of one day share a fold.
struct FoldAssignment {
  int k = 10;
  std::map<Date, int> fold_of_day;

  void validate() const;
  // Sample indices per fold, in manifest order.
  std::vector<std::vector<int>> fold_samples(const DatasetManifest& manifest) const;
};

// Shuffles the day groups with the given seed and deals them round-robin.
FoldAssignment kfold_split(const DatasetManifest& manifest, int k, uint64_t seed);

enum class FoldMode {
  per_day,  // group-aware (default): a day's replicates never straddle folds
  per_image // ambiguity-exploration mode; leaks near-duplicates across folds
};

struct CrossValOptions {
  FoldMode fold_mode = FoldMode::per_day;
  // Fraction of training-portion day groups held out for checkpoint
  // selection (ignored under the paper-faithful checkpoint rule).
  double validation_fraction = 0.10;
  // When nonempty, the selected checkpoint of each fold is written here.
  std::string checkpoint_dir;
};

struct MetricAggregate {
  double mean = 0.0;
  double stddev = 0.0; // sample (n-1) standard deviation across folds
};

struct CrossValAggregate {
  MetricAggregate mae, mape, r2, mtd, mse;
  int folds = 0;
};

struct FoldResult {
  int fold = 0;
  MetricsReport metrics;
  int64_t mtd_clamped = 0;
  int selected_checkpoint_epoch = 0;
};

struct CrossValResult {
  std::vector<FoldResult> folds;
  CrossValAggregate aggregate;

  std::string to_json(const std::string& model, const std::string& mode) const;
};

CrossValAggregate aggregate_folds(const std::vector<FoldResult>& folds);
nlohmann::json aggregate_json(const CrossValAggregate& aggregate);

// Per-fold prediction callback; receives the manifest, the held-out sample
// indices and the fold number, and returns one prediction per index.
using FoldPredictor =
    std::function<std::vector<double>(const DatasetManifest&, const std::vector<int>&, int)>;

// Shared fold/metric machinery with an arbitrary predictor (model-backed or
// a deterministic stub in tests).
CrossValResult cross_validate_with(const FoldPredictor& predict,
                                   const DatasetManifest& manifest,
                                   int k, uint64_t seed,
                                   const CrossValOptions& options = {});

// Full protocol: per fold, train a fresh model on the other k-1 folds (with
// an internal validation carve-out, or the test fold itself under the
// paper-faithful rule), then score the selected checkpoint on the held-out
// fold. Training errors are rethrown annotated with the fold index.
CrossValResult cross_validate(const ModelSpec& spec,
                              const DatasetManifest& manifest,
                              const TrainConfig& config,
                              const AugmentPolicy& policy,
                              int k, uint64_t seed,
                              const CrossValOptions& options = {});

// One comparison entry: a model plus its full training configuration
// (mode-appropriate epoch counts live in the config).
struct CompareSpec {
  ModelSpec model;
  TrainConfig config;
  AugmentPolicy policy;

  std::string label() const;
};

struct LeaderboardRow {
  std::string model;
  std::string mode;
  std::vector<FoldResult> folds;
  CrossValAggregate aggregate;
};

struct Leaderboard {
  std::vector<LeaderboardRow> rows; // sorted by aggregate mean MAE, ascending

  std::string to_json() const;
  std::string to_text() const; // aligned mean +/- std table
};

// Runs cross_validate per entry with one shared fold assignment and seed
// (each entry's config.seed is overridden by `seed`).
Leaderboard compare_models(const std::vector<CompareSpec>& entries,
                           const DatasetManifest& manifest,
                           int k, uint64_t seed,
                           const CrossValOptions& options = {});

} // namespace svx
