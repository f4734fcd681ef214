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
#ifndef SLUDGEVISION_H
#define SLUDGEVISION_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes; nonzero values mirror the library's error categories. */
typedef enum svx_status {
  SVX_OK = 0,
  SVX_ERR_VALIDATION = 1,
  SVX_ERR_PARSE = 2,
  SVX_ERR_INTEGRITY = 3,
  SVX_ERR_IO = 4,
  SVX_ERR_TRAIN = 5,
  SVX_ERR_UNAVAILABLE = 6
} svx_status;

const char* svx_version(void);

/* Message for the most recent failure on the calling thread ("" when none).
 * Valid until the next failing call on the same thread. */
const char* svx_last_error_message(void);

/* Frees strings returned through result_json output parameters. */
void svx_string_free(char* s);

/* ---------------------------------------------------------------------- */
/* Dataset manifests                                                      */

typedef struct svx_manifest svx_manifest;

/* Loads a manifest CSV at the default 512x384 resolution. */
svx_status svx_manifest_load(const char* path, svx_manifest** out);
svx_status svx_manifest_load_sized(const char* path, int width, int height,
                                   svx_manifest** out);
void svx_manifest_free(svx_manifest* m);
int64_t svx_manifest_size(const svx_manifest* m);
int64_t svx_manifest_day_count(const svx_manifest* m);
/* Returned strings stay valid until the manifest is freed. Output pointers
 * may be NULL when a field is not needed. */
svx_status svx_manifest_sample(const svx_manifest* m, int64_t index,
                               const char** sample_id, const char** day_iso,
                               int* replicate, double* svi_ml_per_g,
                               const char** image_path);

/* ---------------------------------------------------------------------- */
/* Kernel functions                                                       */

/* settled volume (mL/L) / MLSS (g/L) -> SVI (mL/g). */
svx_status svx_compute_svi(double settled_volume_ml_per_l, double mlss_g_per_l,
                           double* out_svi);

/* MAE, MAPE (fraction), R2, Poisson mean Tweedie deviance and MSE over n
 * pairs. Any output pointer may be NULL. */
svx_status svx_metrics_evaluate(const double* ground_truth, const double* predictions,
                                int64_t n, double* mae, double* mape, double* r2,
                                double* mtd, double* mse);

/* Cosine annealing: min_lr + 0.5*(initial_lr-min_lr)*(1+cos(pi*epoch/epochs)). */
svx_status svx_lr_at(int epoch, int epochs, double initial_lr, double min_lr,
                     double* out_lr);

/* ---------------------------------------------------------------------- */
/* Pipeline commands (one per CLI subcommand)                             */
/*                                                                        */
/* Each writes its artifacts under out_dir and, when result_json is not   */
/* NULL, returns a JSON summary of what was produced (free it with        */
/* svx_string_free). config_path may be "" or NULL for defaults.          */

svx_status svx_run_synth_gen(int days, int per_day, uint64_t seed,
                             const char* out_dir, char** result_json);

svx_status svx_run_train(const char* manifest_path, const char* arch,
                         const char* mode, const char* config_path,
                         const char* out_dir, char** result_json);

svx_status svx_run_cross_validate(const char* manifest_path, const char* arch,
                                  const char* mode, int k, uint64_t seed,
                                  const char* config_path, const char* out_dir,
                                  char** result_json);

/* specs: comma-separated arch:mode entries, e.g. "tiny_cnn:tl,tiny_cnn:tfs". */
svx_status svx_run_compare(const char* manifest_path, const char* specs, int k,
                           uint64_t seed, const char* config_path,
                           const char* out_dir, char** result_json);

svx_status svx_run_predict(const char* checkpoint_path, const char* manifest_path,
                           const char* out_dir, char** result_json);

/* threshold <= 0 and persistence <= 0 fall back to the config values.
 * Empty plot/report paths skip that artifact. */
svx_status svx_run_monitor(const char* predictions_path, double threshold,
                           int persistence, const char* plot_path,
                           const char* report_path, const char* config_path,
                           char** result_json);

#ifdef __cplusplus
}
#endif

#endif /* SLUDGEVISION_H */
