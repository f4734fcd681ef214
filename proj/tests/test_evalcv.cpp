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
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "sludgevision/checkpoint.hpp"
#include "sludgevision/common.hpp"
#include "sludgevision/date.hpp"
#include "sludgevision/evalcv.hpp"
#include "sludgevision/ingest.hpp"
#include "sludgevision/synth.hpp"

namespace fs = std::filesystem;

namespace {

// In-memory manifest; kfold machinery never touches the image files.
svx::DatasetManifest day_manifest(int n_days, int replicates) {
  svx::DatasetManifest m;
  m.width = 64;
  m.height = 48;
  const svx::Date start(2024, 5, 1);
  for (int d = 0; d < n_days; ++d) {
    for (int r = 0; r < replicates; ++r) {
      svx::ImageSample s;
      s.sample_id = "d" + std::to_string(d) + "_r" + std::to_string(r);
      s.day = start.add_days(d);
      s.replicate_index = r;
      s.image_path = "images/" + s.sample_id + ".png";
      s.svi = 80.0 + 7.0 * double(d);
      m.samples.push_back(std::move(s));
    }
  }
  return m;
}

double ref_mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / double(v.size());
}

double ref_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = ref_mean(v);
  double var = 0.0;
  for (double x : v) var += (x - m) * (x - m);
  return std::sqrt(var / double(v.size() - 1));
}

struct RefMetrics {
  double mae = 0.0, mape = 0.0, r2 = 0.0, mtd = 0.0, mse = 0.0;
};

RefMetrics ref_metrics(double prediction, const std::vector<double>& truth) {
  RefMetrics r;
  const double n = double(truth.size());
  double ss_res = 0.0;
  for (double g : truth) {
    r.mae += std::fabs(prediction - g);
    r.mape += std::fabs(prediction - g) / g;
    r.mse += (prediction - g) * (prediction - g);
    r.mtd += 2.0 * (g * std::log(g / prediction) + prediction - g);
    ss_res += (g - prediction) * (g - prediction);
  }
  r.mae /= n;
  r.mape /= n;
  r.mse /= n;
  r.mtd /= n;
  const double mean_g = ref_mean(truth);
  double ss_tot = 0.0;
  for (double g : truth) ss_tot += (g - mean_g) * (g - mean_g);
  r.r2 = 1.0 - ss_res / ss_tot;
  return r;
}

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "svx_test_evalcv" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

} // namespace

TEST_CASE("evalcv: day-level k-fold split partitions samples without day leakage") {
  auto m = day_manifest(40, 3);
  auto assignment = svx::kfold_split(m, 10, 2024);
  CHECK_NOTHROW(assignment.validate());
  CHECK(assignment.k == 10);
  REQUIRE(assignment.fold_of_day.size() == 40);

  // Round-robin dealing of 40 shuffled days gives exactly 4 days per fold.
  std::map<int, int> days_per_fold;
  for (const auto& [day, fold] : assignment.fold_of_day) ++days_per_fold[fold];
  REQUIRE(days_per_fold.size() == 10);
  for (const auto& [fold, count] : days_per_fold) CHECK(count == 4);

  auto folds = assignment.fold_samples(m);
  REQUIRE(folds.size() == 10);
  std::vector<int> seen(m.samples.size(), 0);
  for (const auto& fold : folds) {
    CHECK(fold.size() == 12); // 4 days x 3 replicates
    for (int i : fold) ++seen[size_t(i)];
  }
  for (int c : seen) CHECK(c == 1);

  // All replicates of a day live in the same fold.
  for (size_t f = 0; f < folds.size(); ++f) {
    for (int i : folds[f]) {
      CHECK(assignment.fold_of_day.at(m.samples[size_t(i)].day) == int(f));
    }
  }

  // Deterministic in the seed, different across seeds.
  auto again = svx::kfold_split(m, 10, 2024);
  CHECK(again.fold_of_day == assignment.fold_of_day);
  auto other = svx::kfold_split(m, 10, 2025);
  CHECK(other.fold_of_day != assignment.fold_of_day);

  // Uneven day counts spread the remainder across the leading folds.
  auto uneven = svx::kfold_split(day_manifest(37, 1), 10, 3);
  std::map<int, int> uneven_counts;
  for (const auto& [day, fold] : uneven.fold_of_day) ++uneven_counts[fold];
  for (int f = 0; f < 10; ++f) CHECK(uneven_counts[f] == (f < 7 ? 4 : 3));

  CHECK_THROWS_AS(svx::kfold_split(m, 1, 1), svx::ValidationError);
  CHECK_THROWS_AS(svx::kfold_split(day_manifest(5, 2), 10, 1), svx::ValidationError);
}

TEST_CASE("evalcv: per-image folds partition samples and may split days") {
  auto m = day_manifest(12, 3);
  svx::CrossValOptions options;
  options.fold_mode = svx::FoldMode::per_image;

  std::map<int, std::vector<int>> captured;
  auto stub = [&](const svx::DatasetManifest& manifest, const std::vector<int>& test,
                  int fold) {
    captured[fold] = test;
    return std::vector<double>(test.size(), 230.0);
  };
  auto result = svx::cross_validate_with(stub, m, 6, 77, options);
  REQUIRE(result.folds.size() == 6);

  std::vector<int> seen(m.samples.size(), 0);
  for (const auto& [fold, idx] : captured) {
    CHECK(idx.size() == 6); // 36 samples over 6 folds
    CHECK(std::is_sorted(idx.begin(), idx.end()));
    for (int i : idx) ++seen[size_t(i)];
  }
  for (int c : seen) CHECK(c == 1);

  // Unlike the day-aware split, at least one day straddles folds here.
  std::map<svx::Date, std::set<int>> folds_of_day;
  for (const auto& [fold, idx] : captured) {
    for (int i : idx) folds_of_day[m.samples[size_t(i)].day].insert(fold);
  }
  bool any_straddle = false;
  for (const auto& [day, folds] : folds_of_day) {
    if (folds.size() > 1) any_straddle = true;
  }
  CHECK(any_straddle);
}

TEST_CASE("evalcv: stub-backed cross-validation reproduces hand-computed metrics") {
  auto m = day_manifest(20, 2);
  const int k = 5;
  const uint64_t seed = 99;

  std::map<int, std::vector<int>> captured;
  auto stub = [&](const svx::DatasetManifest& manifest, const std::vector<int>& test,
                  int fold) {
    captured[fold] = test;
    return std::vector<double>(test.size(), 230.0);
  };
  auto result = svx::cross_validate_with(stub, m, k, seed);

  // The driver must hand the predictor exactly the day-aware fold partition.
  auto expected_folds = svx::kfold_split(m, k, seed).fold_samples(m);
  REQUIRE(int(captured.size()) == k);
  for (int f = 0; f < k; ++f) CHECK(captured[f] == expected_folds[size_t(f)]);

  REQUIRE(int(result.folds.size()) == k);
  std::vector<double> mae_v, mape_v, r2_v, mtd_v, mse_v;
  for (int f = 0; f < k; ++f) {
    std::vector<double> truth;
    for (int i : expected_folds[size_t(f)]) truth.push_back(m.samples[size_t(i)].svi);
    RefMetrics ref = ref_metrics(230.0, truth);

    const svx::FoldResult& fr = result.folds[size_t(f)];
    CHECK(fr.fold == f);
    CHECK(fr.metrics.n == int64_t(truth.size()));
    CHECK(fr.metrics.mae == doctest::Approx(ref.mae).epsilon(1e-12));
    CHECK(fr.metrics.mape == doctest::Approx(ref.mape).epsilon(1e-12));
    CHECK(fr.metrics.r2 == doctest::Approx(ref.r2).epsilon(1e-12));
    CHECK(fr.metrics.mtd == doctest::Approx(ref.mtd).epsilon(1e-12));
    CHECK(fr.metrics.mse == doctest::Approx(ref.mse).epsilon(1e-12));
    CHECK(fr.mtd_clamped == 0);

    mae_v.push_back(ref.mae);
    mape_v.push_back(ref.mape);
    r2_v.push_back(ref.r2);
    mtd_v.push_back(ref.mtd);
    mse_v.push_back(ref.mse);
  }

  CHECK(result.aggregate.folds == k);
  CHECK(result.aggregate.mae.mean == doctest::Approx(ref_mean(mae_v)).epsilon(1e-12));
  CHECK(result.aggregate.mae.stddev == doctest::Approx(ref_std(mae_v)).epsilon(1e-12));
  CHECK(result.aggregate.mape.mean == doctest::Approx(ref_mean(mape_v)).epsilon(1e-12));
  CHECK(result.aggregate.r2.mean == doctest::Approx(ref_mean(r2_v)).epsilon(1e-12));
  CHECK(result.aggregate.mtd.mean == doctest::Approx(ref_mean(mtd_v)).epsilon(1e-12));
  CHECK(result.aggregate.mse.stddev == doctest::Approx(ref_std(mse_v)).epsilon(1e-12));

  // Serialized form carries one row per fold plus the labeled aggregate.
  auto doc = nlohmann::json::parse(result.to_json("tiny_cnn", "tfs"));
  REQUIRE(doc.at("rows").size() == size_t(k));
  CHECK(doc.at("rows")[0].at("model") == "tiny_cnn");
  CHECK(doc.at("rows")[0].at("mode") == "tfs");
  for (const char* key : {"mae", "mape", "r2", "mtd", "mse", "n", "fold"}) {
    CHECK(doc.at("rows")[0].contains(key));
  }
  CHECK(doc.at("aggregate").at("model") == "tiny_cnn");
  CHECK(doc.at("aggregate").at("folds") == k);
  CHECK(doc.at("aggregate").at("mae").at("mean").get<double>() ==
        doctest::Approx(ref_mean(mae_v)).epsilon(1e-12));
}

TEST_CASE("evalcv: aggregation handles degenerate inputs and fold errors annotate") {
  svx::FoldResult a;
  a.fold = 0;
  a.metrics = {10.0, 0.1, 0.9, 1.0, 100.0, 4};
  svx::FoldResult b = a;
  b.fold = 1;
  b.metrics = {14.0, 0.2, 0.8, 2.0, 200.0, 4};

  auto agg = svx::aggregate_folds({a, b});
  CHECK(agg.folds == 2);
  CHECK(agg.mae.mean == doctest::Approx(12.0).epsilon(1e-15));
  CHECK(agg.mae.stddev == doctest::Approx(std::sqrt(8.0)).epsilon(1e-12));
  CHECK(agg.mse.mean == doctest::Approx(150.0).epsilon(1e-15));

  auto single = svx::aggregate_folds({a});
  CHECK(single.folds == 1);
  CHECK(single.mae.mean == 10.0);
  CHECK(single.mae.stddev == 0.0);

  CHECK_THROWS_AS(svx::aggregate_folds({}), svx::ValidationError);

  // Errors inside one fold surface with the fold index attached.
  auto m = day_manifest(10, 2);
  auto bad_stub = [](const svx::DatasetManifest&, const std::vector<int>& test, int fold)
      -> std::vector<double> {
    if (fold == 2) throw svx::TrainError("diverged");
    return std::vector<double>(test.size(), 230.0);
  };
  try {
    svx::cross_validate_with(bad_stub, m, 5, 1);
    FAIL("expected a TrainError");
  } catch (const svx::TrainError& e) {
    CHECK(std::string(e.what()).find("fold 2") != std::string::npos);
    CHECK(std::string(e.what()).find("diverged") != std::string::npos);
  }

  auto short_stub = [](const svx::DatasetManifest&, const std::vector<int>&, int)
      -> std::vector<double> { return {1.0}; };
  try {
    svx::cross_validate_with(short_stub, m, 5, 1);
    FAIL("expected a ValidationError");
  } catch (const svx::ValidationError& e) {
    CHECK(std::string(e.what()).find("fold 0") != std::string::npos);
  }
}

TEST_CASE("evalcv: model-backed cross-validation trains, selects, and checkpoints") {
  auto data_dir = fresh_dir("cv_data");
  svx::SynthParams params;
  params.width = 64;
  params.height = 48;
  params.floc_count_range = {3, 6};
  params.floc_radius_range = {2.0, 6.0};
  params.filament_length_range = {10.0, 40.0};
  auto manifest = svx::generate_dataset(12, 2, 515, data_dir.string(), params, {});

  svx::ModelSpec spec;
  spec.arch = svx::Arch::tiny_cnn;
  svx::TrainConfig config = svx::TrainConfig::defaults_for(svx::TrainMode::from_scratch);
  config.epochs = 2;
  config.batch_size = 8;
  config.min_lr = 0.0;
  auto policy = svx::AugmentPolicy::identity();

  auto ckpt_dir = fresh_dir("cv_ckpts");
  svx::CrossValOptions options;
  options.checkpoint_dir = ckpt_dir.string();

  auto result = svx::cross_validate(spec, manifest, config, policy, 3, 42, options);
  REQUIRE(result.folds.size() == 3);
  for (const auto& fr : result.folds) {
    CHECK(fr.metrics.n > 0);
    CHECK(std::isfinite(fr.metrics.mae));
    CHECK(fr.selected_checkpoint_epoch >= 0);
    CHECK(fr.selected_checkpoint_epoch < config.epochs);

    const std::string name = svx::checkpoint_filename(
        spec.arch, "tfs", fr.fold, fr.selected_checkpoint_epoch);
    CHECK(fs::exists(ckpt_dir / name));
  }

  // Checkpoints carry the provenance needed to reproduce the fold.
  auto loaded = svx::load_checkpoint(
      (ckpt_dir / svx::checkpoint_filename(spec.arch, "tfs", 0,
                                           result.folds[0].selected_checkpoint_epoch))
          .string());
  CHECK(loaded.extra.at("fold") == 0);
  CHECK(loaded.extra.at("manifest_hash") == svx::manifest_content_hash(manifest));
  CHECK(loaded.extra.contains("train_config"));
  CHECK(loaded.extra.contains("seed"));

  // The whole protocol is deterministic in (data, seed).
  auto rerun = svx::cross_validate(spec, manifest, config, policy, 3, 42);
  CHECK(rerun.to_json("tiny_cnn", "tfs") == result.to_json("tiny_cnn", "tfs"));

  svx::CrossValOptions bad;
  bad.validation_fraction = 0.0;
  CHECK_THROWS_AS(svx::cross_validate(spec, manifest, config, policy, 3, 42, bad),
                  svx::ValidationError);
}

TEST_CASE("evalcv: compare_models produces a leaderboard sorted by mean MAE") {
  auto data_dir = fresh_dir("board_data");
  svx::SynthParams params;
  params.width = 64;
  params.height = 48;
  params.floc_count_range = {3, 6};
  params.floc_radius_range = {2.0, 6.0};
  params.filament_length_range = {10.0, 40.0};
  auto manifest = svx::generate_dataset(12, 2, 616, data_dir.string(), params, {});

  svx::CompareSpec weak;
  weak.model.arch = svx::Arch::tiny_cnn;
  weak.config = svx::TrainConfig::defaults_for(svx::TrainMode::from_scratch);
  weak.config.epochs = 1;
  weak.config.batch_size = 8;
  weak.config.initial_lr = 1e-5; // barely moves off the random init
  weak.config.min_lr = 0.0;
  weak.policy = svx::AugmentPolicy::identity();

  svx::CompareSpec strong = weak;
  strong.config.epochs = 3;
  strong.config.initial_lr = 3e-3;
  strong.config.checkpoint_rule = svx::CheckpointRule::paper_faithful_best_eval_mse;

  auto board = svx::compare_models({weak, strong}, manifest, 3, 7);
  REQUIRE(board.rows.size() == 2);
  CHECK(board.rows[0].aggregate.mae.mean <= board.rows[1].aggregate.mae.mean);
  for (const auto& row : board.rows) {
    CHECK(row.model == "tiny_cnn");
    CHECK(row.mode == "tfs");
    CHECK(row.folds.size() == 3);
  }

  // JSON and text renderings expose every row.
  auto doc = nlohmann::json::parse(board.to_json());
  CHECK(doc.at("rows").size() == 6); // 2 entries x 3 folds
  CHECK(doc.at("aggregates").size() == 2);
  const std::string text = board.to_text();
  CHECK(text.find("model") != std::string::npos);
  CHECK(text.find("tiny_cnn") != std::string::npos);
  CHECK(text.find("+/-") != std::string::npos);

  CHECK_THROWS_AS(svx::compare_models({weak}, manifest, 3, 7), svx::ValidationError);
}
