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
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "sludgevision/common.hpp"
#include "sludgevision/image.hpp"
#include "sludgevision/io_util.hpp"
#include "sludgevision/monitor.hpp"

namespace fs = std::filesystem;

namespace {

std::vector<svx::DailyPrediction> demo_series() {
  std::vector<svx::DailyPrediction> series;
  const svx::Date start(2024, 6, 1);
  const std::vector<double> means{118.0, 122.0, 131.0, 145.0, 158.0, 171.0, 176.0, 168.0};
  for (size_t i = 0; i < means.size(); ++i) {
    svx::DailyPrediction d;
    d.day = start.add_days(int(i));
    d.mean_svi = means[i];
    d.std_svi = 6.0;
    d.n_images = 5;
    if (i % 3 == 0) d.measured_svi = means[i] + 4.0;
    series.push_back(d);
  }
  return series;
}

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "svx_test_plot" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

} // namespace

TEST_CASE("plot: PNG rendering writes a decodable image and a full sidecar") {
  auto dir = fresh_dir("png");
  auto series = demo_series();
  svx::MonitorConfig config;
  auto warnings = svx::detect_warnings(series, config);
  REQUIRE(!warnings.empty());

  const std::string path = (dir / "monitor.png").string();
  svx::emit_plot(path, series, warnings, config);

  auto img = svx::decode_image_file(path);
  CHECK(img.width == 900);
  CHECK(img.height == 500);

  auto sidecar = nlohmann::json::parse(svx::read_file(path + ".elements.json"));
  CHECK(sidecar.at("format") == "png");
  CHECK(sidecar.at("width") == 900);
  CHECK(sidecar.at("height") == 500);
  CHECK(sidecar.at("mean_line_points") == series.size());
  CHECK(sidecar.at("std_band") == true);
  CHECK(sidecar.at("measured_markers") == 3); // days 0, 3, 6
  CHECK(sidecar.at("threshold_line") == config.threshold);
  REQUIRE(sidecar.at("warning_markers").size() == warnings.size());
  CHECK(sidecar.at("warning_markers")[0].contains("day"));
  CHECK(sidecar.at("warning_markers")[0].contains("kind"));
}

TEST_CASE("plot: SVG rendering embeds every element class") {
  auto dir = fresh_dir("svg");
  auto series = demo_series();
  svx::MonitorConfig config;
  auto warnings = svx::detect_warnings(series, config);

  const std::string path = (dir / "monitor.svg").string();
  svx::emit_plot(path, series, warnings, config);

  const std::string svg = svx::read_file(path);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("<polyline") != std::string::npos); // mean line
  CHECK(svg.find("<polygon") != std::string::npos);  // std band
  CHECK(svg.find("stroke-dasharray") != std::string::npos); // threshold
  CHECK(svg.find("<circle") != std::string::npos);   // measured markers
  CHECK(svg.find("daily SVI (mL/g)") != std::string::npos);

  auto sidecar = nlohmann::json::parse(svx::read_file(path + ".elements.json"));
  CHECK(sidecar.at("format") == "svg");

  // Identical inputs render identical bytes.
  svx::emit_plot(path, series, warnings, config);
  CHECK(svx::read_file(path) == svg);
}

TEST_CASE("plot: degenerate and invalid inputs") {
  auto dir = fresh_dir("edge");
  svx::MonitorConfig config;

  // A single-day series has zero date span; the scale guard keeps it finite.
  svx::DailyPrediction only;
  only.day = svx::Date(2024, 6, 1);
  only.mean_svi = 140.0;
  only.n_images = 1;
  const std::string single = (dir / "single.svg").string();
  CHECK_NOTHROW(svx::emit_plot(single, {only}, {}, config));
  auto sidecar = nlohmann::json::parse(svx::read_file(single + ".elements.json"));
  CHECK(sidecar.at("mean_line_points") == 1);
  CHECK(sidecar.at("warning_markers").empty());

  CHECK_THROWS_AS(svx::emit_plot((dir / "x.svg").string(), {}, {}, config),
                  svx::ValidationError);
  CHECK_THROWS_AS(svx::emit_plot((dir / "noext").string(), {only}, {}, config),
                  svx::ValidationError);
  CHECK_THROWS_AS(svx::emit_plot((dir / "x.gif").string(), {only}, {}, config),
                  svx::ValidationError);

  svx::MonitorConfig bad;
  bad.threshold = -5.0;
  CHECK_THROWS_AS(svx::emit_plot((dir / "y.svg").string(), {only}, {}, bad),
                  svx::ValidationError);
}
