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
#include <cstdint>
#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "sludgevision.h"

namespace {

int exit_code_for(svx_status status) {
  if (status == SVX_OK) return 0;
  const bool usage = status == SVX_ERR_VALIDATION || status == SVX_ERR_PARSE ||
                     status == SVX_ERR_INTEGRITY;
  return usage ? 1 : 2;
}

int finish(svx_status status, char* result_json) {
  if (status == SVX_OK) {
    if (result_json) std::printf("%s\n", result_json);
  } else {
    std::fprintf(stderr, "error: %s\n", svx_last_error_message());
  }
  svx_string_free(result_json);
  return exit_code_for(status);
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"SVI prediction and bulking early-warning pipeline"};
  app.set_version_flag("--version", std::string(svx_version()));
  app.require_subcommand(1);
  int rc = 0;

  // synth-gen
  int days = 0, per_day = 0;
  uint64_t synth_seed = 0;
  std::string synth_out;
  CLI::App* synth = app.add_subcommand(
      "synth-gen", "Generate a deterministic synthetic floc/filament dataset");
  synth->add_option("--days", days, "number of sampling days")->required();
  synth->add_option("--per-day", per_day, "images per day")->required();
  synth->add_option("--seed", synth_seed, "generator seed")->default_val(0);
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->callback([&] {
    char* result = nullptr;
    rc = finish(
        svx_run_synth_gen(days, per_day, synth_seed, synth_out.c_str(), &result),
        result);
  });

  // train
  std::string train_manifest, train_arch, train_mode, train_config, train_out;
  CLI::App* train =
      app.add_subcommand("train", "Train one model and save its best checkpoint");
  train->add_option("--manifest", train_manifest, "manifest CSV")->required();
  train->add_option("--arch", train_arch,
                    "inception_v3|resnet18|resnet152|convnext_nano|convnext_s|tiny_cnn")
      ->required();
  train->add_option("--mode", train_mode, "tl|tfs")->required();
  train->add_option("--config", train_config, "key-value config file");
  train->add_option("--out", train_out, "output directory")->required();
  train->callback([&] {
    char* result = nullptr;
    rc = finish(svx_run_train(train_manifest.c_str(), train_arch.c_str(),
                              train_mode.c_str(), train_config.c_str(),
                              train_out.c_str(), &result),
                result);
  });

  // cross-validate
  std::string cv_manifest, cv_arch, cv_mode, cv_config, cv_out;
  int cv_k = 10;
  uint64_t cv_seed = 0;
  CLI::App* cv = app.add_subcommand("cross-validate",
                                    "Group-aware k-fold cross-validation");
  cv->add_option("--manifest", cv_manifest, "manifest CSV")->required();
  cv->add_option("--arch", cv_arch, "architecture")->required();
  cv->add_option("--mode", cv_mode, "tl|tfs")->required();
  cv->add_option("--k", cv_k, "fold count")->default_val(10);
  cv->add_option("--seed", cv_seed, "fold/shuffle seed")->default_val(0);
  cv->add_option("--config", cv_config, "key-value config file");
  cv->add_option("--out", cv_out, "output directory")->required();
  cv->callback([&] {
    char* result = nullptr;
    rc = finish(svx_run_cross_validate(cv_manifest.c_str(), cv_arch.c_str(),
                                       cv_mode.c_str(), cv_k, cv_seed,
                                       cv_config.c_str(), cv_out.c_str(), &result),
                result);
  });

  // compare
  std::string cmp_manifest, cmp_specs, cmp_config, cmp_out;
  int cmp_k = 10;
  uint64_t cmp_seed = 0;
  CLI::App* cmp = app.add_subcommand(
      "compare", "Cross-validated leaderboard over several arch:mode entries");
  cmp->add_option("--manifest", cmp_manifest, "manifest CSV")->required();
  cmp->add_option("--specs", cmp_specs, "e.g. tiny_cnn:tl,tiny_cnn:tfs")->required();
  cmp->add_option("--k", cmp_k, "fold count")->default_val(10);
  cmp->add_option("--seed", cmp_seed, "fold/shuffle seed")->default_val(0);
  cmp->add_option("--config", cmp_config, "key-value config file");
  cmp->add_option("--out", cmp_out, "output directory")->required();
  cmp->callback([&] {
    char* result = nullptr;
    rc = finish(svx_run_compare(cmp_manifest.c_str(), cmp_specs.c_str(), cmp_k,
                                cmp_seed, cmp_config.c_str(), cmp_out.c_str(),
                                &result),
                result);
  });

  // predict
  std::string pred_ckpt, pred_manifest, pred_out;
  CLI::App* pred = app.add_subcommand(
      "predict", "Per-image SVI predictions from a saved checkpoint");
  pred->add_option("--checkpoint", pred_ckpt, "checkpoint file")->required();
  pred->add_option("--manifest", pred_manifest, "manifest CSV")->required();
  pred->add_option("--out", pred_out, "output directory")->required();
  pred->callback([&] {
    char* result = nullptr;
    rc = finish(svx_run_predict(pred_ckpt.c_str(), pred_manifest.c_str(),
                                pred_out.c_str(), &result),
                result);
  });

  // monitor
  std::string mon_predictions, mon_plot, mon_report = "monitor_report.json";
  std::string mon_config;
  double mon_threshold = 150.0;
  int mon_persistence = 2;
  CLI::App* mon = app.add_subcommand(
      "monitor", "Daily aggregation and bulking early-warning detection");
  mon->add_option("--predictions", mon_predictions, "predictions CSV")->required();
  mon->add_option("--threshold", mon_threshold, "SVI bulking threshold (mL/g)")
      ->default_val(150.0);
  mon->add_option("--persistence", mon_persistence, "days above threshold")
      ->default_val(2);
  mon->add_option("--plot", mon_plot, "plot output (.png or .svg; empty = skip)");
  mon->add_option("--report", mon_report, "JSON report output")
      ->default_val("monitor_report.json");
  mon->add_option("--config", mon_config, "key-value config file");
  mon->callback([&] {
    char* result = nullptr;
    rc = finish(svx_run_monitor(mon_predictions.c_str(), mon_threshold,
                                mon_persistence, mon_plot.c_str(),
                                mon_report.c_str(), mon_config.c_str(), &result),
                result);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int cli_rc = app.exit(e);
    return cli_rc == 0 ? 0 : 1;
  }
  return rc;
}
