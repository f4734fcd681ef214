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
#include <cctype>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "json.hpp"
#include "sludgevision/common.hpp"
#include "sludgevision/io_util.hpp"
#include "sludgevision/monitor.hpp"

namespace svx {

namespace {

constexpr int kPlotWidth = 900;
constexpr int kPlotHeight = 500;
constexpr int kMarginLeft = 70;
constexpr int kMarginRight = 30;
constexpr int kMarginTop = 40;
constexpr int kMarginBottom = 60;

struct PlotScale {
  int64_t day0 = 0;
  double day_span = 1.0;
  double y_lo = 0.0;
  double y_span = 1.0;

  double x(const Date& d) const {
    const double t = double(d.days_since_epoch() - day0) / day_span;
    return kMarginLeft + t * (kPlotWidth - kMarginLeft - kMarginRight);
  }
  double y(double v) const {
    const double t = (v - y_lo) / y_span;
    return kPlotHeight - kMarginBottom - t * (kPlotHeight - kMarginTop - kMarginBottom);
  }
};

PlotScale fit_scale(const std::vector<DailyPrediction>& series,
                    const MonitorConfig& config) {
  PlotScale s;
  s.day0 = series.front().day.days_since_epoch();
  s.day_span = std::max<double>(1.0, double(series.back().day - series.front().day));
  double lo = config.threshold, hi = config.threshold;
  for (const DailyPrediction& d : series) {
    lo = std::min(lo, d.mean_svi - d.std_svi);
    hi = std::max(hi, d.mean_svi + d.std_svi);
    if (d.measured_svi) {
      lo = std::min(lo, *d.measured_svi);
      hi = std::max(hi, *d.measured_svi);
    }
  }
  const double pad = std::max(1.0, 0.08 * (hi - lo));
  s.y_lo = lo - pad;
  s.y_span = (hi + pad) - s.y_lo;
  return s;
}

std::string plot_extension(const std::string& path) {
  const size_t dot = path.find_last_of('.');
  SVX_CHECK(dot != std::string::npos, ErrorKind::validation,
            "plot path '" + path + "' needs a .png or .svg extension");
  std::string ext = path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return char(std::tolower(c)); });
  SVX_CHECK(ext == "png" || ext == "svg", ErrorKind::validation,
            "unsupported plot format '." + ext + "' (use .png or .svg)");
  return ext;
}

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

// ---------------------------------------------------------------------------
// PNG backend (raster drawing)

void draw_dashed_hline(cv::Mat& canvas, int y, int x0, int x1, const cv::Scalar& color) {
  for (int x = x0; x < x1; x += 12) {
    cv::line(canvas, {x, y}, {std::min(x + 6, x1), y}, color, 1, cv::LINE_AA);
  }
}

void render_png(const std::string& path, const std::vector<DailyPrediction>& series,
                const std::vector<WarningEvent>& warnings, const MonitorConfig& config,
                const PlotScale& scale) {
  cv::Mat canvas(kPlotHeight, kPlotWidth, CV_8UC3, cv::Scalar(255, 255, 255));

  const int plot_left = kMarginLeft;
  const int plot_right = kPlotWidth - kMarginRight;
  const int plot_top = kMarginTop;
  const int plot_bottom = kPlotHeight - kMarginBottom;

  // std band
  std::vector<cv::Point> band;
  band.reserve(series.size() * 2);
  for (const DailyPrediction& d : series) {
    band.emplace_back(int(std::lround(scale.x(d.day))),
                      int(std::lround(scale.y(d.mean_svi + d.std_svi))));
  }
  for (auto it = series.rbegin(); it != series.rend(); ++it) {
    band.emplace_back(int(std::lround(scale.x(it->day))),
                      int(std::lround(scale.y(it->mean_svi - it->std_svi))));
  }
  const std::vector<std::vector<cv::Point>> polys{band};
  cv::fillPoly(canvas, polys, cv::Scalar(214, 214, 252));

  // axes + y ticks
  cv::line(canvas, {plot_left, plot_top}, {plot_left, plot_bottom}, {0, 0, 0}, 1);
  cv::line(canvas, {plot_left, plot_bottom}, {plot_right, plot_bottom}, {0, 0, 0}, 1);
  for (int t = 0; t <= 4; ++t) {
    const double v = scale.y_lo + scale.y_span * t / 4.0;
    const int py = int(std::lround(scale.y(v)));
    cv::line(canvas, {plot_left - 4, py}, {plot_left, py}, {0, 0, 0}, 1);
    cv::putText(canvas, fmt(v), {6, py + 4}, cv::FONT_HERSHEY_SIMPLEX, 0.38,
                {60, 60, 60}, 1, cv::LINE_AA);
  }
  const size_t label_step = std::max<size_t>(1, series.size() / 6);
  for (size_t i = 0; i < series.size(); i += label_step) {
    const int px = int(std::lround(scale.x(series[i].day)));
    cv::line(canvas, {px, plot_bottom}, {px, plot_bottom + 4}, {0, 0, 0}, 1);
    cv::putText(canvas, series[i].day.to_iso(), {px - 32, plot_bottom + 20},
                cv::FONT_HERSHEY_SIMPLEX, 0.34, {60, 60, 60}, 1, cv::LINE_AA);
  }
  cv::putText(canvas, "daily SVI (mL/g)", {plot_left, plot_top - 14},
              cv::FONT_HERSHEY_SIMPLEX, 0.5, {0, 0, 0}, 1, cv::LINE_AA);

  // threshold
  draw_dashed_hline(canvas, int(std::lround(scale.y(config.threshold))), plot_left,
                    plot_right, cv::Scalar(96, 96, 96));

  // mean line
  for (size_t i = 1; i < series.size(); ++i) {
    cv::line(canvas,
             {int(std::lround(scale.x(series[i - 1].day))),
              int(std::lround(scale.y(series[i - 1].mean_svi)))},
             {int(std::lround(scale.x(series[i].day))),
              int(std::lround(scale.y(series[i].mean_svi)))},
             cv::Scalar(36, 36, 220), 2, cv::LINE_AA);
  }

  // measured markers
  for (const DailyPrediction& d : series) {
    if (!d.measured_svi) continue;
    cv::circle(canvas,
               {int(std::lround(scale.x(d.day))),
                int(std::lround(scale.y(*d.measured_svi)))},
               3, cv::Scalar(160, 90, 20), cv::FILLED, cv::LINE_AA);
  }

  // warning markers
  for (const WarningEvent& e : warnings) {
    const int px = int(std::lround(scale.x(e.onset_day)));
    const cv::Scalar color = e.kind == WarningKind::threshold_crossing
                                 ? cv::Scalar(30, 140, 255)
                                 : cv::Scalar(180, 60, 160);
    cv::line(canvas, {px, plot_top}, {px, plot_bottom}, color, 1, cv::LINE_AA);
    const cv::Point tip(px, plot_top + 10);
    const std::vector<cv::Point> tri{
        {tip.x - 6, tip.y - 10}, {tip.x + 6, tip.y - 10}, {tip.x, tip.y}};
    const std::vector<std::vector<cv::Point>> tris{tri};
    cv::fillPoly(canvas, tris, color);
  }

  std::vector<unsigned char> bytes;
  SVX_CHECK(cv::imencode(".png", canvas, bytes), ErrorKind::io,
            "PNG encoding failed for '" + path + "'");
  write_file_atomic(path, std::string(bytes.begin(), bytes.end()));
}

// ---------------------------------------------------------------------------
// SVG backend

void render_svg(const std::string& path, const std::vector<DailyPrediction>& series,
                const std::vector<WarningEvent>& warnings, const MonitorConfig& config,
                const PlotScale& scale) {
  std::string svg;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
                "viewBox=\"0 0 %d %d\">\n",
                kPlotWidth, kPlotHeight, kPlotWidth, kPlotHeight);
  svg += buf;
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  svg += "<polygon fill=\"#fcd6d6\" stroke=\"none\" points=\"";
  for (const DailyPrediction& d : series) {
    svg += fmt(scale.x(d.day)) + "," + fmt(scale.y(d.mean_svi + d.std_svi)) + " ";
  }
  for (auto it = series.rbegin(); it != series.rend(); ++it) {
    svg += fmt(scale.x(it->day)) + "," + fmt(scale.y(it->mean_svi - it->std_svi)) + " ";
  }
  svg += "\"/>\n";

  const double y_thresh = scale.y(config.threshold);
  std::snprintf(buf, sizeof(buf),
                "<line x1=\"%d\" y1=\"%.2f\" x2=\"%d\" y2=\"%.2f\" stroke=\"#606060\" "
                "stroke-dasharray=\"6,6\"/>\n",
                kMarginLeft, y_thresh, kPlotWidth - kMarginRight, y_thresh);
  svg += buf;

  svg += "<polyline fill=\"none\" stroke=\"#dc2424\" stroke-width=\"2\" points=\"";
  for (const DailyPrediction& d : series) {
    svg += fmt(scale.x(d.day)) + "," + fmt(scale.y(d.mean_svi)) + " ";
  }
  svg += "\"/>\n";

  for (const DailyPrediction& d : series) {
    if (!d.measured_svi) continue;
    std::snprintf(buf, sizeof(buf),
                  "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"3\" fill=\"#145aa0\"/>\n",
                  scale.x(d.day), scale.y(*d.measured_svi));
    svg += buf;
  }

  for (const WarningEvent& e : warnings) {
    const char* color =
        e.kind == WarningKind::threshold_crossing ? "#ff8c1e" : "#a03cb4";
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%.2f\" y1=\"%d\" x2=\"%.2f\" y2=\"%d\" stroke=\"%s\"/>\n",
                  scale.x(e.onset_day), kMarginTop, scale.x(e.onset_day),
                  kPlotHeight - kMarginBottom, color);
    svg += buf;
  }

  std::snprintf(buf, sizeof(buf),
                "<text x=\"%d\" y=\"%d\" font-family=\"sans-serif\" font-size=\"15\">"
                "daily SVI (mL/g)</text>\n",
                kMarginLeft, kMarginTop - 14);
  svg += buf;
  svg += "</svg>\n";
  write_file_atomic(path, svg);
}

} // namespace

void emit_plot(const std::string& path, const std::vector<DailyPrediction>& series,
               const std::vector<WarningEvent>& warnings, const MonitorConfig& config) {
  config.validate();
  SVX_CHECK(!series.empty(), ErrorKind::validation, "cannot plot an empty series");
  const std::string ext = plot_extension(path);
  const PlotScale scale = fit_scale(series, config);

  if (ext == "png") {
    render_png(path, series, warnings, config, scale);
  } else {
    render_svg(path, series, warnings, config, scale);
  }

  int measured = 0;
  for (const DailyPrediction& d : series) {
    if (d.measured_svi) ++measured;
  }
  nlohmann::json markers = nlohmann::json::array();
  for (const WarningEvent& e : warnings) {
    markers.push_back({{"day", e.onset_day.to_iso()}, {"kind", warning_kind_name(e.kind)}});
  }
  nlohmann::json sidecar{{"format", ext},
                         {"width", kPlotWidth},
                         {"height", kPlotHeight},
                         {"mean_line_points", series.size()},
                         {"std_band", true},
                         {"measured_markers", measured},
                         {"threshold_line", config.threshold},
                         {"warning_markers", markers}};
  write_file_atomic(path + ".elements.json", sidecar.dump(2) + "\n");
}

} // namespace svx
