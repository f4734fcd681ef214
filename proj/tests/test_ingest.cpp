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
#include <cmath>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "sludgevision/common.hpp"
#include "sludgevision/image.hpp"
#include "sludgevision/ingest.hpp"
#include "sludgevision/io_util.hpp"
#include "sludgevision/rng.hpp"

namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "svx_test_ingest" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Writes a small gray PNG so manifest validation finds a real file.
void put_image(const fs::path& path, int width, int height, float value) {
  svx::Image img;
  img.width = width;
  img.height = height;
  img.channels = 1;
  img.data.assign(size_t(width) * height, value);
  svx::write_png(path.string(), img);
}

svx::DatasetManifest sample_manifest(const fs::path& dir) {
  svx::DatasetManifest m;
  m.width = 64;
  m.height = 48;
  m.base_dir = dir.string();
  int id = 0;
  int day_index = 0;
  for (const char* day : {"2024-03-01", "2024-03-02", "2024-03-03"}) {
    for (int r = 0; r < 2; ++r, ++id) {
      svx::ImageSample s;
      s.sample_id = "img_" + std::to_string(id);
      s.day = svx::parse_iso(day);
      s.replicate_index = r;
      s.image_path = "images/" + s.sample_id + ".png";
      // One SVI label per day; replicates of a day share it.
      s.svi = 100.0 + 17.5 * day_index;
      fs::create_directories(dir / "images");
      put_image(dir / s.image_path, 64, 48, 0.25f + 0.1f * float(r));
      m.samples.push_back(s);
    }
    ++day_index;
  }
  return m;
}

} // namespace

TEST_CASE("ingest: manifest csv round-trip") {
  auto dir = fresh_dir("roundtrip");
  auto m = sample_manifest(dir);
  auto csv = dir / "manifest.csv";
  svx::write_manifest_csv(csv.string(), m);
  auto back = svx::load_manifest(csv.string(), 64, 48, m.normalization);
  REQUIRE(back.samples.size() == m.samples.size());
  for (size_t i = 0; i < m.samples.size(); ++i) {
    CHECK(back.samples[i].sample_id == m.samples[i].sample_id);
    CHECK(back.samples[i].day == m.samples[i].day);
    CHECK(back.samples[i].replicate_index == m.samples[i].replicate_index);
    CHECK(back.samples[i].image_path == m.samples[i].image_path);
    CHECK(back.samples[i].svi == m.samples[i].svi);
  }
  CHECK(back.width == 64);
  CHECK(back.height == 48);
  CHECK(svx::manifest_content_hash(back) == svx::manifest_content_hash(m));
}

TEST_CASE("ingest: loader rejects malformed csv") {
  auto dir = fresh_dir("malformed");
  auto path = dir / "manifest.csv";

  svx::write_file_atomic(path.string(), "wrong,header,row\n");
  CHECK_THROWS_AS(svx::load_manifest(path.string()), svx::ParseError);

  svx::write_file_atomic(path.string(),
                         "sample_id,day,replicate,svi_ml_per_g,image_path\n"
                         "a,2024-01-01,0\n");
  CHECK_THROWS_AS(svx::load_manifest(path.string()), svx::ParseError);

  svx::write_file_atomic(path.string(),
                         "sample_id,day,replicate,svi_ml_per_g,image_path\n"
                         "a,2024-13-40,0,150,images/a.png\n");
  CHECK_THROWS_AS(svx::load_manifest(path.string()), svx::ParseError);

  svx::write_file_atomic(path.string(),
                         "sample_id,day,replicate,svi_ml_per_g,image_path\n"
                         "a,2024-01-01,0,abc,images/a.png\n");
  CHECK_THROWS_AS(svx::load_manifest(path.string()), svx::ParseError);

  svx::write_file_atomic(path.string(),
                         "sample_id,day,replicate,svi_ml_per_g,image_path\n");
  CHECK_THROWS_AS(svx::load_manifest(path.string()), svx::ParseError);

  CHECK_THROWS_AS(svx::load_manifest((dir / "nope.csv").string()), svx::IoError);
}

TEST_CASE("ingest: validation catches duplicates, conflicts, and missing files") {
  auto dir = fresh_dir("validate");
  auto m = sample_manifest(dir);
  CHECK_NOTHROW(m.validate());

  auto dup = m;
  dup.samples[1].sample_id = dup.samples[0].sample_id;
  CHECK_THROWS_AS(dup.validate(), svx::IntegrityError);

  // Two samples of one day disagreeing on the day label's SVI.
  auto conflict = m;
  conflict.samples[1].svi = conflict.samples[0].svi + 40.0;
  conflict.samples[1].day = conflict.samples[0].day;
  CHECK_THROWS_AS(conflict.validate(), svx::IntegrityError);

  // A dangling image path passes in-memory validation but fails loading.
  auto missing = m;
  missing.samples[2].image_path = "images/ghost.png";
  CHECK_NOTHROW(missing.validate());
  auto ghost_csv = (dir / "ghost.csv").string();
  svx::write_manifest_csv(ghost_csv, missing);
  CHECK_THROWS_AS(svx::load_manifest(ghost_csv), svx::IntegrityError);

  auto nonpositive = m;
  nonpositive.samples[0].svi = 0.0;
  // Keep the day consistent: both replicates of the day carry the bad label.
  nonpositive.samples[1].svi = 0.0;
  CHECK_THROWS_AS(nonpositive.validate(), svx::IntegrityError);
}

TEST_CASE("ingest: compute_svi matches the settling formula") {
  CHECK(svx::compute_svi({300.0, 2.0}) == doctest::Approx(150.0).epsilon(1e-15));
  CHECK(svx::compute_svi({250.0, 2.5}) == doctest::Approx(100.0).epsilon(1e-15));
  svx::Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    // Keep k * volume inside the physical 1000 mL/L graduated-cylinder cap.
    double volume = rng.uniform(50.0, 450.0);
    double mlss = rng.uniform(0.8, 6.0);
    double k = rng.uniform(0.5, 2.0);
    // Homogeneity: scaling volume and MLSS together leaves SVI unchanged.
    CHECK(svx::compute_svi({k * volume, k * mlss}) ==
          doctest::Approx(svx::compute_svi({volume, mlss})).epsilon(1e-12));
  }
  CHECK_THROWS_AS(svx::compute_svi({300.0, 0.0}), svx::ValidationError);
  CHECK_THROWS_AS(svx::compute_svi({-1.0, 2.0}), svx::ValidationError);
}

TEST_CASE("ingest: group_by_day is ordered and complete") {
  auto dir = fresh_dir("groups");
  auto m = sample_manifest(dir);
  auto groups = svx::group_by_day(m);
  REQUIRE(groups.size() == 3);
  size_t total = 0;
  for (size_t g = 1; g < groups.size(); ++g) CHECK(groups[g - 1].day < groups[g].day);
  for (const auto& g : groups) {
    total += g.sample_indices.size();
    for (size_t idx : g.sample_indices) CHECK(m.samples[idx].day == g.day);
  }
  CHECK(total == m.samples.size());
}

TEST_CASE("ingest: content hash tracks logical changes only") {
  auto dir = fresh_dir("hash");
  auto m = sample_manifest(dir);
  auto h = svx::manifest_content_hash(m);
  CHECK(h == svx::manifest_content_hash(m));

  auto changed = m;
  changed.samples[0].svi += 1.0;
  CHECK(svx::manifest_content_hash(changed) != h);

  auto resized = m;
  resized.width = 128;
  CHECK(svx::manifest_content_hash(resized) != h);

  // base_dir is location, not content.
  auto moved = m;
  moved.base_dir = (dir / "elsewhere").string();
  CHECK(svx::manifest_content_hash(moved) == h);
}

TEST_CASE("ingest: load_image decodes, resizes, and normalizes range") {
  auto dir = fresh_dir("image");
  put_image(dir / "flat.png", 128, 96, 0.5f);
  svx::Image img = svx::load_image((dir / "flat.png").string(), 64, 48);
  CHECK(img.width == 64);
  CHECK(img.height == 48);
  CHECK(img.channels == 3);
  for (float v : img.data) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  // 8-bit quantization of 0.5 lands within half a step.
  CHECK(std::fabs(img.data[0] - 0.5f) < 1.0f / 255.0f);

  // Aspect-ratio mismatch is refused rather than silently distorted.
  CHECK_THROWS_AS(svx::load_image((dir / "flat.png").string(), 64, 64),
                  svx::ValidationError);
  CHECK_THROWS_AS(svx::load_image((dir / "absent.png").string(), 64, 48), svx::IoError);
}

TEST_CASE("ingest: normalize and denormalize are inverse") {
  svx::Image img;
  img.width = 8;
  img.height = 6;
  img.channels = 3;
  img.data.resize(size_t(8) * 6 * 3);
  svx::Rng rng(7);
  for (auto& v : img.data) v = float(rng.uniform());
  svx::NormalizationStats stats;
  svx::Image norm = svx::normalize(img, stats);
  svx::Image back = svx::denormalize(norm, stats);
  REQUIRE(back.data.size() == img.data.size());
  for (size_t i = 0; i < img.data.size(); ++i)
    CHECK(back.data[i] == doctest::Approx(img.data[i]).epsilon(1e-5));

  // Channel means move to roughly zero under the default stats.
  double mean_r = 0.0;
  size_t n = norm.data.size() / 3;
  for (size_t i = 0; i < n; ++i) mean_r += norm.data[i * 3];
  mean_r /= double(n);
  CHECK(std::fabs(mean_r) < 1.0);
}
