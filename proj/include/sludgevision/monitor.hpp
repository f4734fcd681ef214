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

#include <optional>
#include <string>
#include <vector>

#include "sludgevision/date.hpp"
#include "sludgevision/evalcv.hpp"

namespace svx {

// One model prediction for one image, as stored in predictions CSV files
// (columns: sample_id,day,replicate,svi_ml_per_g,predicted_svi).
struct PredictionRow {
  std::string sample_id;
  Date day;
  int replicate_index = 0;
  std::optional<double> measured_svi;
  double predicted_svi = 0.0;
};

std::vector<PredictionRow> read_predictions_csv(const std::string& path);
void write_predictions_csv(const std::string& path,
                           const std::vector<PredictionRow>& rows);

struct DailyPrediction {
  Date day;
  double mean_svi = 0.0;
  double std_svi = 0.0; // sample std of the day's replicates; 0 for singletons
  int n_images = 0;
  std::optional<double> measured_svi;
};

enum class WarningKind { threshold_crossing, rising_trend };

std::string warning_kind_name(WarningKind kind);

struct WarningEvent {
  Date onset_day;
  // Mean SVI at the onset day for threshold crossings; the fitted slope
  // (mL/g per day) for rising trends.
  double trigger_value = 0.0;
  double threshold = 0.0;
  // The persistence requirement for crossings, the trend window for trends.
  int persistence_days = 0;
  WarningKind kind = WarningKind::threshold_crossing;
};

struct MonitorConfig {
  double threshold = 150.0;    // mL/g; bulking onset
  int persistence = 2;         // consecutive days above threshold
  int trend_window = 4;        // trailing days entering the slope fit
  double trend_slope_min = 10.0; // mL/g per day

  void validate() const;
};

// Mean / sample-std per day, sorted by day ascending. A day's measured value
// is taken from the first row that carries one.
std::vector<DailyPrediction> aggregate_daily(const std::vector<PredictionRow>& rows);

// Rule set:
//  - threshold_crossing at the first day of each maximal run of at least
//    `persistence` consecutive days with mean_svi > threshold (a run breaks
//    on a sub-threshold day or a calendar gap);
//  - rising_trend when the least-squares slope over the trailing
//    trend_window entries exceeds trend_slope_min while the current mean is
//    still at or below threshold; adjacent trend days collapse into one
//    event at the earliest day.
// A persistence longer than the series yields no events.
std::vector<WarningEvent> detect_warnings(const std::vector<DailyPrediction>& series,
                                          const MonitorConfig& config);

std::string monitor_report_json(const std::vector<DailyPrediction>& series,
                                const std::vector<WarningEvent>& warnings,
                                const MonitorConfig& config);
std::string monitor_summary_text(const std::vector<DailyPrediction>& series,
                                 const std::vector<WarningEvent>& warnings,
                                 const MonitorConfig& config);

// Writes the JSON report to `path` and the text summary next to it
// (extension replaced by .txt). Identical inputs produce identical bytes.
void emit_report(const std::string& path, const std::vector<DailyPrediction>& series,
                 const std::vector<WarningEvent>& warnings, const MonitorConfig& config);
// Cross-validation flavor: JSON report plus text summary of the aggregate.
void emit_report(const std::string& path, const CrossValResult& cv,
                 const std::string& model, const std::string& mode);

// Renders mean line, +/- 1 std band, measured markers, threshold line and
// warning markers; PNG or SVG selected by extension. A sidecar JSON at
// path + ".elements.json" inventories the drawn elements for testing.
void emit_plot(const std::string& path, const std::vector<DailyPrediction>& series,
               const std::vector<WarningEvent>& warnings, const MonitorConfig& config);

} // namespace svx
