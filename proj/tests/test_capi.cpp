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
// Exercises the shared library strictly through its C surface; no C++
// symbols from the core are referenced here.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "sludgevision.h"

namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "svx_test_capi" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

std::string take(char** result) {
  REQUIRE(*result != nullptr);
  std::string s(*result);
  svx_string_free(*result);
  *result = nullptr;
  return s;
}

} // namespace

TEST_CASE("capi: version and error-message lifecycle") {
  REQUIRE(svx_version() != nullptr);
  CHECK(std::string(svx_version()) == "0.1.0");

  double out = 0.0;
  CHECK(svx_compute_svi(300.0, 2.0, &out) == SVX_OK);
  CHECK(out == 150.0);

  CHECK(svx_compute_svi(1500.0, 2.0, &out) == SVX_ERR_VALIDATION);
  const std::string msg = svx_last_error_message();
  CHECK(!msg.empty());
  CHECK(msg.find("settled") != std::string::npos);

  CHECK(svx_compute_svi(300.0, 0.0, &out) == SVX_ERR_VALIDATION);
  CHECK(svx_compute_svi(300.0, 2.0, nullptr) == SVX_ERR_VALIDATION);

  // Free functions tolerate NULL.
  svx_string_free(nullptr);
  svx_manifest_free(nullptr);
}

TEST_CASE("capi: metric evaluation matches direct formulas") {
  const std::vector<double> gt{100.0, 200.0, 400.0};
  const std::vector<double> pred{110.0, 190.0, 410.0};

  double mae = 0.0, mape = 0.0, r2 = 0.0, mtd = 0.0, mse = 0.0;
  REQUIRE(svx_metrics_evaluate(gt.data(), pred.data(), 3, &mae, &mape, &r2, &mtd,
                               &mse) == SVX_OK);

  double ref_mape = 0.0, ref_mtd = 0.0, ss_res = 0.0, ss_tot = 0.0;
  const double mean_gt = (100.0 + 200.0 + 400.0) / 3.0;
  for (size_t i = 0; i < gt.size(); ++i) {
    ref_mape += std::fabs(pred[i] - gt[i]) / gt[i];
    ref_mtd += 2.0 * (gt[i] * std::log(gt[i] / pred[i]) + pred[i] - gt[i]);
    ss_res += (gt[i] - pred[i]) * (gt[i] - pred[i]);
    ss_tot += (gt[i] - mean_gt) * (gt[i] - mean_gt);
  }
  CHECK(mae == doctest::Approx(10.0).epsilon(1e-15));
  CHECK(mse == doctest::Approx(100.0).epsilon(1e-15));
  CHECK(mape == doctest::Approx(ref_mape / 3.0).epsilon(1e-15));
  CHECK(mtd == doctest::Approx(ref_mtd / 3.0).epsilon(1e-15));
  CHECK(r2 == doctest::Approx(1.0 - ss_res / ss_tot).epsilon(1e-15));

  // Unwanted outputs may be NULL.
  double only_mae = 0.0;
  CHECK(svx_metrics_evaluate(gt.data(), pred.data(), 3, &only_mae, nullptr, nullptr,
                             nullptr, nullptr) == SVX_OK);
  CHECK(only_mae == doctest::Approx(10.0).epsilon(1e-15));

  CHECK(svx_metrics_evaluate(nullptr, pred.data(), 3, &mae, nullptr, nullptr, nullptr,
                             nullptr) == SVX_ERR_VALIDATION);
  CHECK(svx_metrics_evaluate(gt.data(), pred.data(), 0, &mae, nullptr, nullptr, nullptr,
                             nullptr) == SVX_ERR_VALIDATION);
}

TEST_CASE("capi: cosine learning-rate schedule endpoints and midpoint") {
  double lr = 0.0;
  REQUIRE(svx_lr_at(0, 30, 1e-3, 1e-5, &lr) == SVX_OK);
  CHECK(lr == 1e-3);
  REQUIRE(svx_lr_at(30, 30, 1e-3, 1e-5, &lr) == SVX_OK);
  CHECK(lr == doctest::Approx(1e-5).epsilon(1e-12));
  REQUIRE(svx_lr_at(15, 30, 1e-3, 1e-5, &lr) == SVX_OK);
  CHECK(lr == doctest::Approx((1e-3 + 1e-5) / 2.0).epsilon(1e-12));

  CHECK(svx_lr_at(-1, 30, 1e-3, 1e-5, &lr) == SVX_ERR_VALIDATION);
  CHECK(svx_lr_at(31, 30, 1e-3, 1e-5, &lr) == SVX_ERR_VALIDATION);
  CHECK(svx_lr_at(0, 0, 1e-3, 1e-5, &lr) == SVX_ERR_VALIDATION);
  CHECK(svx_lr_at(0, 30, 1e-3, 1e-5, nullptr) == SVX_ERR_VALIDATION);
}

TEST_CASE("capi: synthetic generation and manifest accessors") {
  auto dir = fresh_dir("synth");
  char* json = nullptr;
  REQUIRE(svx_run_synth_gen(3, 2, 11, dir.string().c_str(), &json) == SVX_OK);
  auto doc = nlohmann::json::parse(take(&json));
  CHECK(doc.at("n_images") == 6);
  const std::string manifest_path = doc.at("manifest_path");
  CHECK(fs::exists(manifest_path));

  svx_manifest* m = nullptr;
  REQUIRE(svx_manifest_load(manifest_path.c_str(), &m) == SVX_OK);
  REQUIRE(m != nullptr);
  CHECK(svx_manifest_size(m) == 6);
  CHECK(svx_manifest_day_count(m) == 3);

  const char* sample_id = nullptr;
  const char* day_iso = nullptr;
  const char* image_path = nullptr;
  int replicate = -1;
  double svi = 0.0;
  REQUIRE(svx_manifest_sample(m, 0, &sample_id, &day_iso, &replicate, &svi,
                              &image_path) == SVX_OK);
  CHECK(sample_id != nullptr);
  CHECK(std::strlen(sample_id) > 0);
  CHECK(std::string(day_iso) == "2024-01-01");
  CHECK(replicate == 0);
  CHECK(svi > 0.0);
  CHECK(fs::exists(image_path));

  // Output pointers are individually optional.
  CHECK(svx_manifest_sample(m, 5, nullptr, nullptr, nullptr, &svi, nullptr) == SVX_OK);
  CHECK(svi > 0.0);

  CHECK(svx_manifest_sample(m, 6, &sample_id, nullptr, nullptr, nullptr, nullptr) ==
        SVX_ERR_VALIDATION);
  CHECK(svx_manifest_sample(m, -1, &sample_id, nullptr, nullptr, nullptr, nullptr) ==
        SVX_ERR_VALIDATION);
  CHECK(svx_manifest_sample(nullptr, 0, &sample_id, nullptr, nullptr, nullptr,
                            nullptr) == SVX_ERR_VALIDATION);
  CHECK(svx_manifest_size(nullptr) == 0);
  CHECK(svx_manifest_day_count(nullptr) == 0);
  svx_manifest_free(m);

  // Each failure category surfaces as its own status code.
  svx_manifest* bad = nullptr;
  CHECK(svx_manifest_load((dir / "missing.csv").string().c_str(), &bad) == SVX_ERR_IO);
  CHECK(std::string(svx_last_error_message()).find("missing.csv") != std::string::npos);

  const std::string malformed = (dir / "malformed.csv").string();
  spit(malformed, "not,a,manifest\n");
  CHECK(svx_manifest_load(malformed.c_str(), &bad) == SVX_ERR_PARSE);

  const std::string ghost = (dir / "ghost.csv").string();
  spit(ghost,
       "sample_id,day,replicate,svi_ml_per_g,image_path\n"
       "g0,2024-01-01,0,150,images/ghost.png\n");
  CHECK(svx_manifest_load(ghost.c_str(), &bad) == SVX_ERR_INTEGRITY);

  CHECK(svx_manifest_load(nullptr, &bad) == SVX_ERR_VALIDATION);
  CHECK(svx_manifest_load(manifest_path.c_str(), nullptr) == SVX_ERR_VALIDATION);
  CHECK(svx_run_synth_gen(3, 2, 11, nullptr, &json) == SVX_ERR_VALIDATION);
  CHECK(std::string(svx_last_error_message()).find("out_dir") != std::string::npos);
}

TEST_CASE("capi: monitor run aggregates, warns, and writes artifacts") {
  auto dir = fresh_dir("monitor");
  const std::string preds = (dir / "predictions.csv").string();
  std::string csv = "sample_id,day,replicate,svi_ml_per_g,predicted_svi\n";
  for (int d = 0; d < 12; ++d) {
    const double base = d < 6 ? 120.0 : 165.0;
    char day[16];
    std::snprintf(day, sizeof(day), "2024-06-%02d", d + 1);
    csv += "s" + std::to_string(d) + "a," + day + ",0," + std::to_string(base) + "," +
           std::to_string(base - 2.0) + "\n";
    csv += "s" + std::to_string(d) + "b," + day + ",1,," +
           std::to_string(base + 2.0) + "\n";
  }
  spit(preds, csv);

  const std::string plot = (dir / "monitor.svg").string();
  const std::string report = (dir / "monitor.json").string();
  char* json = nullptr;
  // threshold 0 / persistence 0 fall back to the defaults (150 mL/g, 2 days).
  REQUIRE(svx_run_monitor(preds.c_str(), 0.0, 0, plot.c_str(), report.c_str(), nullptr,
                          &json) == SVX_OK);
  auto doc = nlohmann::json::parse(take(&json));
  CHECK(doc.at("n_days") == 12);
  CHECK(doc.at("n_warnings") == 1);
  CHECK(doc.at("report_path") == report);
  CHECK(doc.at("plot_path") == plot);

  auto rep = nlohmann::json::parse(slurp(report));
  CHECK(rep.at("config").at("threshold") == 150.0);
  CHECK(rep.at("config").at("persistence") == 2);
  REQUIRE(rep.at("warnings").size() == 1);
  CHECK(rep.at("warnings")[0].at("kind") == "threshold_crossing");
  CHECK(rep.at("warnings")[0].at("onset_day") == "2024-06-07");
  CHECK(rep.at("series")[0].at("mean_svi") == 120.0);
  CHECK(rep.at("series")[0].at("measured_svi") == 120.0);
  CHECK(slurp(plot).rfind("<svg", 0) == 0);

  // Raising the threshold above the plateau leaves only the rising trend.
  REQUIRE(svx_run_monitor(preds.c_str(), 170.0, 1, "", report.c_str(), nullptr,
                          &json) == SVX_OK);
  doc = nlohmann::json::parse(take(&json));
  CHECK(doc.at("n_warnings") == 1);
  CHECK(doc.at("plot_path") == "");
  rep = nlohmann::json::parse(slurp(report));
  CHECK(rep.at("warnings")[0].at("kind") == "rising_trend");
  CHECK(rep.at("warnings")[0].at("onset_day") == "2024-06-07");

  // Config files are validated against the key whitelist.
  const std::string cfg = (dir / "bad.cfg").string();
  spit(cfg, "bogus.key = 1\n");
  CHECK(svx_run_monitor(preds.c_str(), 0.0, 0, "", "", cfg.c_str(), &json) ==
        SVX_ERR_PARSE);
  CHECK(std::string(svx_last_error_message()).find("bogus.key") != std::string::npos);

  CHECK(svx_run_monitor(nullptr, 0.0, 0, "", "", nullptr, &json) ==
        SVX_ERR_VALIDATION);
  CHECK(std::string(svx_last_error_message()).find("predictions_path") !=
        std::string::npos);
}
