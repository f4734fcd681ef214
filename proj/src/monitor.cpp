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
#include "sludgevision/monitor.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>

#include "json.hpp"
#include "sludgevision/common.hpp"
#include "sludgevision/io_util.hpp"

namespace svx {

namespace {

constexpr const char* kPredictionsHeader =
    "sample_id,day,replicate,svi_ml_per_g,predicted_svi";

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(trim(cur));
  return fields;
}

double parse_real(const std::string& s, size_t line_no, const char* what) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  SVX_CHECK(ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(value),
            ErrorKind::parse,
            std::string("line ") + std::to_string(line_no) + ": bad " + what +
                " value '" + s + "'");
  return value;
}

int parse_int(const std::string& s, size_t line_no, const char* what) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  SVX_CHECK(ec == std::errc() && ptr == s.data() + s.size(), ErrorKind::parse,
            std::string("line ") + std::to_string(line_no) + ": bad " + what +
                " value '" + s + "'");
  return value;
}

} // namespace

std::vector<PredictionRow> read_predictions_csv(const std::string& path) {
  const std::string content = read_file(path);
  std::istringstream in(content);
  std::string line;
  size_t line_no = 0;
  std::vector<PredictionRow> rows;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (!saw_header) {
      SVX_CHECK(t == kPredictionsHeader, ErrorKind::parse,
                "predictions file '" + path + "' must start with header '" +
                    kPredictionsHeader + "'");
      saw_header = true;
      continue;
    }
    const std::vector<std::string> f = split_csv(t);
    SVX_CHECK(f.size() == 5, ErrorKind::parse,
              "line " + std::to_string(line_no) + ": expected 5 fields, got " +
                  std::to_string(f.size()));
    PredictionRow row;
    row.sample_id = f[0];
    SVX_CHECK(!row.sample_id.empty(), ErrorKind::parse,
              "line " + std::to_string(line_no) + ": empty sample_id");
    try {
      row.day = Date::parse_iso(f[1]);
    } catch (const Error& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    row.replicate_index = parse_int(f[2], line_no, "replicate");
    if (!f[3].empty()) row.measured_svi = parse_real(f[3], line_no, "svi_ml_per_g");
    row.predicted_svi = parse_real(f[4], line_no, "predicted_svi");
    rows.push_back(std::move(row));
  }
  SVX_CHECK(saw_header, ErrorKind::parse, "predictions file '" + path + "' is empty");
  return rows;
}

void write_predictions_csv(const std::string& path,
                           const std::vector<PredictionRow>& rows) {
  std::string out = std::string(kPredictionsHeader) + "\n";
  for (const PredictionRow& r : rows) {
    out += r.sample_id + "," + r.day.to_iso() + "," + std::to_string(r.replicate_index) +
           "," + (r.measured_svi ? format_double(*r.measured_svi) : std::string()) +
           "," + format_double(r.predicted_svi) + "\n";
  }
  write_file_atomic(path, out);
}

void MonitorConfig::validate() const {
  SVX_CHECK(std::isfinite(threshold) && threshold > 0.0, ErrorKind::validation,
            "threshold must be a positive SVI");
  SVX_CHECK(persistence >= 1, ErrorKind::validation, "persistence must be >= 1");
  SVX_CHECK(trend_window >= 2, ErrorKind::validation,
            "trend_window must cover at least 2 days");
  SVX_CHECK(std::isfinite(trend_slope_min) && trend_slope_min >= 0.0,
            ErrorKind::validation, "trend_slope_min must be >= 0");
}

std::string warning_kind_name(WarningKind kind) {
  return kind == WarningKind::threshold_crossing ? "threshold_crossing" : "rising_trend";
}

std::vector<DailyPrediction> aggregate_daily(const std::vector<PredictionRow>& rows) {
  SVX_CHECK(!rows.empty(), ErrorKind::validation, "no predictions to aggregate");
  std::map<Date, std::vector<const PredictionRow*>> by_day;
  for (const PredictionRow& r : rows) by_day[r.day].push_back(&r);

  std::vector<DailyPrediction> series;
  series.reserve(by_day.size());
  for (const auto& [day, group] : by_day) {
    DailyPrediction d;
    d.day = day;
    d.n_images = int(group.size());
    for (const PredictionRow* r : group) d.mean_svi += r->predicted_svi;
    d.mean_svi /= double(group.size());
    if (group.size() > 1) {
      double var = 0.0;
      for (const PredictionRow* r : group) {
        const double diff = r->predicted_svi - d.mean_svi;
        var += diff * diff;
      }
      d.std_svi = std::sqrt(var / double(group.size() - 1));
    }
    for (const PredictionRow* r : group) {
      if (r->measured_svi) {
        d.measured_svi = *r->measured_svi;
        break;
      }
    }
    series.push_back(std::move(d));
  }
  return series;
}

std::vector<WarningEvent> detect_warnings(const std::vector<DailyPrediction>& series,
                                          const MonitorConfig& config) {
  config.validate();
  for (size_t i = 1; i < series.size(); ++i) {
    SVX_CHECK(series[i - 1].day < series[i].day, ErrorKind::validation,
              "daily series must be strictly date-ordered");
  }

  std::vector<WarningEvent> events;
  const size_t n = series.size();

  // Threshold crossings: one event per maximal run of consecutive
  // above-threshold days.
  size_t i = 0;
  while (i < n) {
    if (series[i].mean_svi > config.threshold) {
      size_t j = i;
      while (j + 1 < n && series[j + 1].mean_svi > config.threshold &&
             series[j + 1].day - series[j].day == 1) {
        ++j;
      }
      if (j - i + 1 >= size_t(config.persistence)) {
        events.push_back({series[i].day, series[i].mean_svi, config.threshold,
                          config.persistence, WarningKind::threshold_crossing});
      }
      i = j + 1;
    } else {
      ++i;
    }
  }

  // Rising trends below the threshold, deduplicated over adjacent days.
  const size_t w = size_t(config.trend_window);
  std::vector<char> is_candidate(n, 0);
  std::vector<double> slope_at(n, 0.0);
  for (size_t end = w; end <= n; ++end) {
    const size_t start = end - w;
    const size_t last = end - 1;
    double sx = 0.0, sy = 0.0;
    for (size_t k = start; k < end; ++k) {
      sx += double(series[k].day - series[start].day);
      sy += series[k].mean_svi;
    }
    const double mx = sx / double(w);
    const double my = sy / double(w);
    double sxx = 0.0, sxy = 0.0;
    for (size_t k = start; k < end; ++k) {
      const double dx = double(series[k].day - series[start].day) - mx;
      sxx += dx * dx;
      sxy += dx * (series[k].mean_svi - my);
    }
    const double slope = sxy / sxx;
    if (slope > config.trend_slope_min && series[last].mean_svi <= config.threshold) {
      is_candidate[last] = 1;
      slope_at[last] = slope;
    }
  }
  for (size_t k = 0; k < n; ++k) {
    if (is_candidate[k] && (k == 0 || !is_candidate[k - 1])) {
      events.push_back({series[k].day, slope_at[k], config.threshold,
                        config.trend_window, WarningKind::rising_trend});
    }
  }

  std::sort(events.begin(), events.end(), [](const WarningEvent& a, const WarningEvent& b) {
    if (a.onset_day != b.onset_day) return a.onset_day < b.onset_day;
    return int(a.kind) < int(b.kind);
  });
  return events;
}

std::string monitor_report_json(const std::vector<DailyPrediction>& series,
                                const std::vector<WarningEvent>& warnings,
                                const MonitorConfig& config) {
  nlohmann::json series_json = nlohmann::json::array();
  for (const DailyPrediction& d : series) {
    nlohmann::json row{{"day", d.day.to_iso()},
                       {"mean_svi", d.mean_svi},
                       {"std_svi", d.std_svi},
                       {"n_images", d.n_images}};
    if (d.measured_svi) {
      row["measured_svi"] = *d.measured_svi;
    } else {
      row["measured_svi"] = nullptr;
    }
    series_json.push_back(std::move(row));
  }
  nlohmann::json warnings_json = nlohmann::json::array();
  for (const WarningEvent& e : warnings) {
    warnings_json.push_back({{"onset_day", e.onset_day.to_iso()},
                             {"kind", warning_kind_name(e.kind)},
                             {"trigger_value", e.trigger_value},
                             {"threshold", e.threshold},
                             {"persistence_days", e.persistence_days}});
  }
  nlohmann::json doc{{"series", series_json},
                     {"warnings", warnings_json},
                     {"config",
                      {{"threshold", config.threshold},
                       {"persistence", config.persistence},
                       {"trend_window", config.trend_window},
                       {"trend_slope_min", config.trend_slope_min}}}};
  return doc.dump(2) + "\n";
}

std::string monitor_summary_text(const std::vector<DailyPrediction>& series,
                                 const std::vector<WarningEvent>& warnings,
                                 const MonitorConfig& config) {
  std::string out = "SVI monitoring summary\n";
  char line[256];
  if (series.empty()) {
    out += "  no daily data\n";
  } else {
    double lo = series.front().mean_svi, hi = series.front().mean_svi;
    for (const DailyPrediction& d : series) {
      lo = std::min(lo, d.mean_svi);
      hi = std::max(hi, d.mean_svi);
    }
    std::snprintf(line, sizeof(line), "  days: %zu (%s to %s)\n", series.size(),
                  series.front().day.to_iso().c_str(),
                  series.back().day.to_iso().c_str());
    out += line;
    std::snprintf(line, sizeof(line), "  mean SVI range: %.2f to %.2f mL/g\n", lo, hi);
    out += line;
  }
  std::snprintf(line, sizeof(line),
                "  threshold: %.2f mL/g, persistence: %d days, trend window: %d days\n",
                config.threshold, config.persistence, config.trend_window);
  out += line;
  std::snprintf(line, sizeof(line), "  warnings: %zu\n", warnings.size());
  out += line;
  for (const WarningEvent& e : warnings) {
    std::snprintf(line, sizeof(line), "    %s  %s  trigger %.2f (threshold %.2f)\n",
                  e.onset_day.to_iso().c_str(), warning_kind_name(e.kind).c_str(),
                  e.trigger_value, e.threshold);
    out += line;
  }
  return out;
}

namespace {

std::string summary_path_for(const std::string& path) {
  std::filesystem::path p(path);
  p.replace_extension(".txt");
  return p.string();
}

} // namespace

void emit_report(const std::string& path, const std::vector<DailyPrediction>& series,
                 const std::vector<WarningEvent>& warnings,
                 const MonitorConfig& config) {
  write_file_atomic(path, monitor_report_json(series, warnings, config));
  write_file_atomic(summary_path_for(path), monitor_summary_text(series, warnings, config));
}

void emit_report(const std::string& path, const CrossValResult& cv,
                 const std::string& model, const std::string& mode) {
  write_file_atomic(path, cv.to_json(model, mode));
  std::string out = "cross-validation summary: " + model + " (" + mode + ")\n";
  char line[256];
  std::snprintf(line, sizeof(line), "  folds: %d\n", cv.aggregate.folds);
  out += line;
  auto metric_line = [&](const char* name, const MetricAggregate& m, int decimals) {
    std::snprintf(line, sizeof(line), "  %-5s %.*f +/- %.*f\n", name, decimals, m.mean,
                  decimals, m.stddev);
    out += line;
  };
  metric_line("mae", cv.aggregate.mae, 3);
  metric_line("mape", cv.aggregate.mape, 4);
  metric_line("r2", cv.aggregate.r2, 4);
  metric_line("mtd", cv.aggregate.mtd, 3);
  metric_line("mse", cv.aggregate.mse, 3);
  write_file_atomic(summary_path_for(path), out);
}

} // namespace svx
