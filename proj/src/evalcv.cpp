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
#include "sludgevision/evalcv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>

#include "json.hpp"
#include "sludgevision/checkpoint.hpp"
#include "sludgevision/common.hpp"
#include "sludgevision/rng.hpp"

namespace svx {

void FoldAssignment::validate() const {
  SVX_CHECK(k >= 2, ErrorKind::validation, "fold count must be >= 2");
  std::vector<int> counts(size_t(k), 0);
  for (const auto& [day, fold] : fold_of_day) {
    SVX_CHECK(fold >= 0 && fold < k, ErrorKind::validation,
              "fold index for day " + to_iso(day) + " out of range");
    ++counts[size_t(fold)];
  }
  if (fold_of_day.size() >= size_t(k)) {
    for (int f = 0; f < k; ++f) {
      SVX_CHECK(counts[size_t(f)] > 0, ErrorKind::validation,
                "fold " + std::to_string(f) + " received no day groups");
    }
  }
}

std::vector<std::vector<int>> FoldAssignment::fold_samples(
    const DatasetManifest& manifest) const {
  std::vector<std::vector<int>> folds(static_cast<size_t>(k));
  for (size_t i = 0; i < manifest.samples.size(); ++i) {
    const Date day = manifest.samples[i].day;
    auto it = fold_of_day.find(day);
    SVX_CHECK(it != fold_of_day.end(), ErrorKind::validation,
              "day " + to_iso(day) + " is missing from the fold assignment");
    folds[size_t(it->second)].push_back(int(i));
  }
  return folds;
}

FoldAssignment kfold_split(const DatasetManifest& manifest, int k, uint64_t seed) {
  SVX_CHECK(k >= 2, ErrorKind::validation, "fold count must be >= 2");
  std::vector<DayGroup> groups = group_by_day(manifest);
  SVX_CHECK(groups.size() >= size_t(k), ErrorKind::validation,
            "need at least " + std::to_string(k) + " day groups for " +
                std::to_string(k) + "-fold cross-validation, have " +
                std::to_string(groups.size()));

  std::vector<Date> days;
  days.reserve(groups.size());
  for (const DayGroup& g : groups) days.push_back(g.day);
  Rng rng(derive_seed(seed, "kfold", k));
  for (size_t i = days.size(); i > 1; --i) {
    const size_t j = size_t(rng.uniform_int(0, int64_t(i) - 1));
    std::swap(days[i - 1], days[j]);
  }

  FoldAssignment assignment;
  assignment.k = k;
  for (size_t i = 0; i < days.size(); ++i) {
    assignment.fold_of_day[days[i]] = int(i % size_t(k));
  }
  return assignment;
}

// ---------------------------------------------------------------------------
// Aggregation and serialization

namespace {

MetricAggregate mean_std(const std::vector<double>& values) {
  MetricAggregate a;
  const double n = double(values.size());
  for (double v : values) a.mean += v;
  a.mean /= n;
  if (values.size() > 1) {
    double var = 0.0;
    for (double v : values) var += (v - a.mean) * (v - a.mean);
    a.stddev = std::sqrt(var / (n - 1.0));
  }
  return a;
}

nlohmann::json fold_row_json(const std::string& model, const std::string& mode,
                             const FoldResult& f) {
  return nlohmann::json{{"model", model}, {"mode", mode},
                        {"fold", f.fold},  {"mae", f.metrics.mae},
                        {"mape", f.metrics.mape}, {"r2", f.metrics.r2},
                        {"mtd", f.metrics.mtd},   {"mse", f.metrics.mse},
                        {"n", f.metrics.n}};
}

} // namespace

nlohmann::json aggregate_json(const CrossValAggregate& a) {
  auto pair = [](const MetricAggregate& m) {
    return nlohmann::json{{"mean", m.mean}, {"std", m.stddev}};
  };
  return nlohmann::json{{"folds", a.folds}, {"mae", pair(a.mae)},
                        {"mape", pair(a.mape)}, {"r2", pair(a.r2)},
                        {"mtd", pair(a.mtd)},   {"mse", pair(a.mse)}};
}

CrossValAggregate aggregate_folds(const std::vector<FoldResult>& folds) {
  SVX_CHECK(!folds.empty(), ErrorKind::validation, "no fold results to aggregate");
  std::vector<double> mae_v, mape_v, r2_v, mtd_v, mse_v;
  for (const FoldResult& f : folds) {
    mae_v.push_back(f.metrics.mae);
    mape_v.push_back(f.metrics.mape);
    r2_v.push_back(f.metrics.r2);
    mtd_v.push_back(f.metrics.mtd);
    mse_v.push_back(f.metrics.mse);
  }
  CrossValAggregate a;
  a.folds = int(folds.size());
  a.mae = mean_std(mae_v);
  a.mape = mean_std(mape_v);
  a.r2 = mean_std(r2_v);
  a.mtd = mean_std(mtd_v);
  a.mse = mean_std(mse_v);
  return a;
}

std::string CrossValResult::to_json(const std::string& model,
                                    const std::string& mode) const {
  nlohmann::json rows = nlohmann::json::array();
  for (const FoldResult& f : folds) rows.push_back(fold_row_json(model, mode, f));
  nlohmann::json agg = aggregate_json(aggregate);
  agg["model"] = model;
  agg["mode"] = mode;
  nlohmann::json doc{{"rows", rows}, {"aggregate", agg}};
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Cross-validation drivers

namespace {

std::vector<std::vector<int>> per_image_folds(const DatasetManifest& manifest, int k,
                                              uint64_t seed) {
  SVX_CHECK(k >= 2, ErrorKind::validation, "fold count must be >= 2");
  SVX_CHECK(manifest.samples.size() >= size_t(k), ErrorKind::validation,
            "need at least " + std::to_string(k) + " samples for per-image folds");
  std::vector<int> order(manifest.samples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = int(i);
  Rng rng(derive_seed(seed, "kfold_per_image", k));
  for (size_t i = order.size(); i > 1; --i) {
    const size_t j = size_t(rng.uniform_int(0, int64_t(i) - 1));
    std::swap(order[i - 1], order[j]);
  }
  std::vector<std::vector<int>> folds(static_cast<size_t>(k));
  for (size_t i = 0; i < order.size(); ++i) folds[i % size_t(k)].push_back(order[i]);
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

} // namespace

CrossValResult cross_validate_with(const FoldPredictor& predict,
                                   const DatasetManifest& manifest,
                                   int k, uint64_t seed,
                                   const CrossValOptions& options) {
  manifest.validate();
  std::vector<std::vector<int>> folds;
  if (options.fold_mode == FoldMode::per_day) {
    folds = kfold_split(manifest, k, seed).fold_samples(manifest);
  } else {
    folds = per_image_folds(manifest, k, seed);
  }

  CrossValResult result;
  for (int f = 0; f < k; ++f) {
    try {
      const std::vector<int>& test = folds[size_t(f)];
      SVX_CHECK(!test.empty(), ErrorKind::validation, "held-out fold is empty");
      const std::vector<double> preds = predict(manifest, test, f);
      SVX_CHECK(preds.size() == test.size(), ErrorKind::validation,
                "predictor returned " + std::to_string(preds.size()) +
                    " values for " + std::to_string(test.size()) + " samples");
      EvalBatch batch;
      batch.predictions = preds;
      batch.ground_truth.reserve(test.size());
      for (int i : test) batch.ground_truth.push_back(manifest.samples[size_t(i)].svi);

      FoldResult fr;
      fr.fold = f;
      fr.metrics.mae = mae(batch);
      fr.metrics.mape = mape(batch);
      fr.metrics.r2 = r2(batch);
      fr.metrics.mtd = mtd_poisson(batch, &fr.mtd_clamped);
      fr.metrics.mse = mse(batch.predictions, batch.ground_truth);
      fr.metrics.n = int64_t(batch.size());
      result.folds.push_back(std::move(fr));
    } catch (const Error& e) {
      throw_error(e.kind(), "fold " + std::to_string(f) + ": " + e.what());
    }
  }
  result.aggregate = aggregate_folds(result.folds);
  return result;
}

CrossValResult cross_validate(const ModelSpec& spec,
                              const DatasetManifest& manifest,
                              const TrainConfig& config,
                              const AugmentPolicy& policy,
                              int k, uint64_t seed,
                              const CrossValOptions& options) {
  spec.validate();
  config.validate();
  SVX_CHECK(options.validation_fraction > 0.0 && options.validation_fraction < 1.0,
            ErrorKind::validation, "validation_fraction must lie in (0,1)");

  std::map<int, int> selected_epoch;
  auto predictor = [&](const DatasetManifest& m, const std::vector<int>& test,
                       int fold) -> std::vector<double> {
    std::vector<char> in_test(m.samples.size(), 0);
    for (int i : test) in_test[size_t(i)] = 1;
    std::vector<int> rest;
    for (size_t i = 0; i < m.samples.size(); ++i) {
      if (!in_test[i]) rest.push_back(int(i));
    }

    TrainConfig fold_config = config;
    fold_config.seed = derive_seed(seed, "fold_train", fold);

    std::vector<int> train_idx, val_idx;
    if (config.checkpoint_rule == CheckpointRule::paper_faithful_best_eval_mse) {
      train_idx = rest;
      val_idx = test;
    } else {
      std::set<Date> day_set;
      for (int i : rest) day_set.insert(m.samples[size_t(i)].day);
      std::vector<Date> days(day_set.begin(), day_set.end());
      SVX_CHECK(days.size() >= 2, ErrorKind::validation,
                "not enough training day groups to carve a validation split");
      Rng rng(derive_seed(seed, "val_carve", fold));
      for (size_t i = days.size(); i > 1; --i) {
        const size_t j = size_t(rng.uniform_int(0, int64_t(i) - 1));
        std::swap(days[i - 1], days[j]);
      }
      size_t n_val = size_t(std::ceil(options.validation_fraction * double(days.size())));
      n_val = std::min(std::max<size_t>(n_val, 1), days.size() - 1);
      std::set<Date> val_days(days.begin(), days.begin() + long(n_val));
      for (int i : rest) {
        (val_days.count(m.samples[size_t(i)].day) ? val_idx : train_idx).push_back(i);
      }
    }

    auto model = build_model(spec, derive_seed(seed, "model_init", fold));
    TrainHistory history = train(*model, m, train_idx, val_idx, policy, fold_config);
    selected_epoch[fold] = history.selected_checkpoint_epoch;

    if (!options.checkpoint_dir.empty()) {
      nlohmann::json extra{{"train_config", train_config_json(fold_config)},
                           {"seed", fold_config.seed},
                           {"fold", fold},
                           {"manifest_hash", manifest_content_hash(m)}};
      const std::string name = checkpoint_filename(
          spec.arch, train_mode_name(fold_config.mode), fold,
          history.selected_checkpoint_epoch);
      save_checkpoint((std::filesystem::path(options.checkpoint_dir) / name).string(),
                      *model, extra);
    }
    return predict_samples(*model, m, test, fold_config.batch_size);
  };

  CrossValResult result = cross_validate_with(predictor, manifest, k, seed, options);
  for (FoldResult& f : result.folds) {
    auto it = selected_epoch.find(f.fold);
    if (it != selected_epoch.end()) f.selected_checkpoint_epoch = it->second;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Model comparison

std::string CompareSpec::label() const {
  return arch_name(model.arch) + "_" + train_mode_name(config.mode);
}

std::string Leaderboard::to_json() const {
  nlohmann::json row_list = nlohmann::json::array();
  nlohmann::json agg_list = nlohmann::json::array();
  for (const LeaderboardRow& r : rows) {
    for (const FoldResult& f : r.folds) {
      row_list.push_back(fold_row_json(r.model, r.mode, f));
    }
    nlohmann::json agg = aggregate_json(r.aggregate);
    agg["model"] = r.model;
    agg["mode"] = r.mode;
    agg_list.push_back(agg);
  }
  nlohmann::json doc{{"rows", row_list}, {"aggregates", agg_list}};
  return doc.dump(2) + "\n";
}

std::string Leaderboard::to_text() const {
  auto cell = [](const MetricAggregate& m, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f +/- %.*f", decimals, m.mean, decimals,
                  m.stddev);
    return std::string(buf);
  };
  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-16s %-5s %-22s %-22s %-20s %-20s\n", "model",
                "mode", "mae", "mtd", "mape", "r2");
  out += line;
  for (const LeaderboardRow& r : rows) {
    std::snprintf(line, sizeof(line), "%-16s %-5s %-22s %-22s %-20s %-20s\n",
                  r.model.c_str(), r.mode.c_str(), cell(r.aggregate.mae, 3).c_str(),
                  cell(r.aggregate.mtd, 3).c_str(), cell(r.aggregate.mape, 4).c_str(),
                  cell(r.aggregate.r2, 4).c_str());
    out += line;
  }
  return out;
}

Leaderboard compare_models(const std::vector<CompareSpec>& entries,
                           const DatasetManifest& manifest,
                           int k, uint64_t seed,
                           const CrossValOptions& options) {
  SVX_CHECK(entries.size() >= 2, ErrorKind::validation,
            "model comparison needs at least two entries");
  Leaderboard board;
  for (const CompareSpec& entry : entries) {
    TrainConfig config = entry.config;
    config.seed = seed;
    CrossValResult cv =
        cross_validate(entry.model, manifest, config, entry.policy, k, seed, options);
    LeaderboardRow row;
    row.model = arch_name(entry.model.arch);
    row.mode = train_mode_name(entry.config.mode);
    row.folds = std::move(cv.folds);
    row.aggregate = cv.aggregate;
    board.rows.push_back(std::move(row));
  }
  std::stable_sort(board.rows.begin(), board.rows.end(),
                   [](const LeaderboardRow& a, const LeaderboardRow& b) {
                     return a.aggregate.mae.mean < b.aggregate.mae.mean;
                   });
  return board;
}

} // namespace svx
