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
#include "sludgevision.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "sludgevision/common.hpp"
#include "sludgevision/ingest.hpp"
#include "sludgevision/metrics.hpp"
#include "sludgevision/pipeline.hpp"
#include "sludgevision/trainer.hpp"

namespace {

thread_local std::string g_last_error;

svx_status status_of(svx::ErrorKind kind) {
  return static_cast<svx_status>(static_cast<int>(kind));
}

template <typename Fn>
svx_status guarded(Fn&& fn) {
  try {
    fn();
    return SVX_OK;
  } catch (const svx::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::exception& e) {
    g_last_error = std::string("unexpected error: ") + e.what();
    return SVX_ERR_IO;
  }
}

const char* require(const char* s, const char* what) {
  if (!s) throw svx::ValidationError(std::string(what) + " must not be NULL");
  return s;
}

std::string opt(const char* s) { return s ? std::string(s) : std::string(); }

void put_result(char** result_json, const nlohmann::json& doc) {
  if (!result_json) return;
  const std::string text = doc.dump(2);
  char* out = static_cast<char*>(std::malloc(text.size() + 1));
  if (!out) throw svx::IoError("out of memory for result string");
  std::memcpy(out, text.c_str(), text.size() + 1);
  *result_json = out;
}

} // namespace

struct svx_manifest {
  svx::DatasetManifest manifest;
  std::vector<std::string> day_iso; // one per sample, for stable C pointers
  int64_t n_days = 0;
};

extern "C" {

const char* svx_version(void) { return svx::kVersion; }

const char* svx_last_error_message(void) { return g_last_error.c_str(); }

void svx_string_free(char* s) { std::free(s); }

svx_status svx_manifest_load(const char* path, svx_manifest** out) {
  return svx_manifest_load_sized(path, 512, 384, out);
}

svx_status svx_manifest_load_sized(const char* path, int width, int height,
                                   svx_manifest** out) {
  return guarded([&] {
    require(path, "path");
    if (!out) throw svx::ValidationError("out must not be NULL");
    auto handle = std::make_unique<svx_manifest>();
    handle->manifest =
        svx::load_manifest(path, width, height, svx::NormalizationStats{});
    handle->day_iso.reserve(handle->manifest.samples.size());
    for (const svx::ImageSample& s : handle->manifest.samples) {
      handle->day_iso.push_back(s.day.to_iso());
    }
    handle->n_days = int64_t(svx::group_by_day(handle->manifest).size());
    *out = handle.release();
  });
}

void svx_manifest_free(svx_manifest* m) { delete m; }

int64_t svx_manifest_size(const svx_manifest* m) {
  return m ? int64_t(m->manifest.samples.size()) : 0;
}

int64_t svx_manifest_day_count(const svx_manifest* m) { return m ? m->n_days : 0; }

svx_status svx_manifest_sample(const svx_manifest* m, int64_t index,
                               const char** sample_id, const char** day_iso,
                               int* replicate, double* svi_ml_per_g,
                               const char** image_path) {
  return guarded([&] {
    if (!m) throw svx::ValidationError("manifest must not be NULL");
    if (index < 0 || size_t(index) >= m->manifest.samples.size()) {
      throw svx::ValidationError("sample index " + std::to_string(index) +
                                 " out of range");
    }
    const svx::ImageSample& s = m->manifest.samples[size_t(index)];
    if (sample_id) *sample_id = s.sample_id.c_str();
    if (day_iso) *day_iso = m->day_iso[size_t(index)].c_str();
    if (replicate) *replicate = s.replicate_index;
    if (svi_ml_per_g) *svi_ml_per_g = s.svi;
    if (image_path) *image_path = s.image_path.c_str();
  });
}

svx_status svx_compute_svi(double settled_volume_ml_per_l, double mlss_g_per_l,
                           double* out_svi) {
  return guarded([&] {
    if (!out_svi) throw svx::ValidationError("out_svi must not be NULL");
    *out_svi = svx::compute_svi({settled_volume_ml_per_l, mlss_g_per_l});
  });
}

svx_status svx_metrics_evaluate(const double* ground_truth, const double* predictions,
                                int64_t n, double* mae, double* mape, double* r2,
                                double* mtd, double* mse) {
  return guarded([&] {
    if (!ground_truth || !predictions) {
      throw svx::ValidationError("metric inputs must not be NULL");
    }
    if (n <= 0) throw svx::ValidationError("n must be positive");
    svx::EvalBatch batch;
    batch.ground_truth.assign(ground_truth, ground_truth + n);
    batch.predictions.assign(predictions, predictions + n);
    if (mae) *mae = svx::mae(batch);
    if (mape) *mape = svx::mape(batch);
    if (r2) *r2 = svx::r2(batch);
    if (mtd) *mtd = svx::mtd_poisson(batch);
    if (mse) *mse = svx::mse(batch.predictions, batch.ground_truth);
  });
}

svx_status svx_lr_at(int epoch, int epochs, double initial_lr, double min_lr,
                     double* out_lr) {
  return guarded([&] {
    if (!out_lr) throw svx::ValidationError("out_lr must not be NULL");
    svx::TrainConfig config;
    config.epochs = epochs;
    config.initial_lr = initial_lr;
    config.min_lr = min_lr;
    *out_lr = svx::lr_at(epoch, config);
  });
}

svx_status svx_run_synth_gen(int days, int per_day, uint64_t seed,
                             const char* out_dir, char** result_json) {
  return guarded([&] {
    const svx::SynthGenResult r =
        svx::run_synth_gen(days, per_day, seed, require(out_dir, "out_dir"));
    put_result(result_json, {{"manifest_path", r.manifest_path},
                             {"n_images", r.n_images}});
  });
}

svx_status svx_run_train(const char* manifest_path, const char* arch,
                         const char* mode, const char* config_path,
                         const char* out_dir, char** result_json) {
  return guarded([&] {
    const svx::TrainRunResult r = svx::run_train(
        require(manifest_path, "manifest_path"), require(arch, "arch"),
        require(mode, "mode"), opt(config_path), require(out_dir, "out_dir"));
    put_result(result_json, {{"checkpoint_path", r.checkpoint_path},
                             {"history_path", r.history_path},
                             {"selected_epoch", r.selected_epoch},
                             {"best_val_mse", r.best_val_mse}});
  });
}

svx_status svx_run_cross_validate(const char* manifest_path, const char* arch,
                                  const char* mode, int k, uint64_t seed,
                                  const char* config_path, const char* out_dir,
                                  char** result_json) {
  return guarded([&] {
    const svx::CrossValidateRunResult r = svx::run_cross_validate(
        require(manifest_path, "manifest_path"), require(arch, "arch"),
        require(mode, "mode"), k, seed, opt(config_path),
        require(out_dir, "out_dir"));
    put_result(result_json, {{"report_path", r.report_path},
                             {"aggregate", svx::aggregate_json(r.aggregate)}});
  });
}

svx_status svx_run_compare(const char* manifest_path, const char* specs, int k,
                           uint64_t seed, const char* config_path,
                           const char* out_dir, char** result_json) {
  return guarded([&] {
    const svx::CompareRunResult r = svx::run_compare(
        require(manifest_path, "manifest_path"), require(specs, "specs"), k, seed,
        opt(config_path), require(out_dir, "out_dir"));
    put_result(result_json, {{"report_path", r.report_path},
                             {"table_path", r.table_path}});
  });
}

svx_status svx_run_predict(const char* checkpoint_path, const char* manifest_path,
                           const char* out_dir, char** result_json) {
  return guarded([&] {
    const svx::PredictRunResult r = svx::run_predict(
        require(checkpoint_path, "checkpoint_path"),
        require(manifest_path, "manifest_path"), require(out_dir, "out_dir"));
    put_result(result_json, {{"predictions_path", r.predictions_path},
                             {"n_predictions", r.n_predictions}});
  });
}

svx_status svx_run_monitor(const char* predictions_path, double threshold,
                           int persistence, const char* plot_path,
                           const char* report_path, const char* config_path,
                           char** result_json) {
  return guarded([&] {
    const svx::MonitorRunResult r = svx::run_monitor(
        require(predictions_path, "predictions_path"), threshold, persistence,
        opt(plot_path), opt(report_path), opt(config_path));
    put_result(result_json, {{"n_days", r.n_days},
                             {"n_warnings", r.n_warnings},
                             {"report_path", r.report_path},
                             {"plot_path", r.plot_path}});
  });
}

} // extern "C"
