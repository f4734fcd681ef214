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
#include "sludgevision/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "sludgevision/common.hpp"
#include "sludgevision/io_util.hpp"
#include "sludgevision/sha256.hpp"

namespace svx {

namespace {

constexpr const char* kHeader = "sample_id,day,replicate,svi_ml_per_g,image_path";

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

double parse_double_field(const std::string& s, size_t line_no, const char* what) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ParseError("manifest line " + std::to_string(line_no) + ": bad " +
                     std::string(what) + " '" + s + "'");
  }
}

int parse_int_field(const std::string& s, size_t line_no, const char* what) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw ParseError("manifest line " + std::to_string(line_no) + ": bad " +
                     std::string(what) + " '" + s + "'");
  }
  return v;
}

} // namespace

void NormalizationStats::validate() const {
  for (int c = 0; c < 3; ++c) {
    SVX_CHECK(std::isfinite(mean[c]), ErrorKind::validation,
              "normalization mean must be finite");
    SVX_CHECK(std::isfinite(stddev[c]) && stddev[c] > 0.0, ErrorKind::validation,
              "normalization stddev must be positive");
  }
}

std::string DatasetManifest::resolve_path(const ImageSample& s) const {
  std::filesystem::path p(s.image_path);
  if (p.is_absolute() || base_dir.empty()) return s.image_path;
  return (std::filesystem::path(base_dir) / p).string();
}

void DatasetManifest::validate() const {
  SVX_CHECK(width > 0 && height > 0, ErrorKind::validation,
            "manifest resolution must be positive");
  normalization.validate();
  std::unordered_set<std::string> ids;
  std::map<Date, double> day_svi;
  for (const auto& s : samples) {
    SVX_CHECK(!s.sample_id.empty(), ErrorKind::validation, "empty sample_id");
    SVX_CHECK(s.replicate_index >= 0, ErrorKind::validation,
              "negative replicate index for sample " + s.sample_id);
    SVX_CHECK(std::isfinite(s.svi) && s.svi > 0.0, ErrorKind::integrity,
              "sample " + s.sample_id + ": SVI must be positive");
    if (!ids.insert(s.sample_id).second) {
      throw IntegrityError("duplicate sample_id '" + s.sample_id + "'");
    }
    auto [it, inserted] = day_svi.emplace(s.day, s.svi);
    if (!inserted && it->second != s.svi) {
      throw IntegrityError("conflicting SVI labels for day " + s.day.to_iso());
    }
  }
}

DatasetManifest load_manifest(const std::string& path) {
  return load_manifest(path, 512, 384, NormalizationStats{});
}

DatasetManifest load_manifest(const std::string& path, int width, int height,
                              const NormalizationStats& stats) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path + "'");

  DatasetManifest m;
  m.width = width;
  m.height = height;
  m.normalization = stats;
  m.base_dir = std::filesystem::path(path).parent_path().string();

  std::string line;
  size_t line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty()) continue;
    if (!saw_header) {
      if (t != kHeader) {
        throw ParseError("manifest header must be '" + std::string(kHeader) +
                         "', got '" + t + "'");
      }
      saw_header = true;
      continue;
    }
    auto fields = split_csv_line(t);
    if (fields.size() != 5) {
      throw ParseError("manifest line " + std::to_string(line_no) + ": expected 5 fields, got " +
                       std::to_string(fields.size()));
    }
    ImageSample s;
    s.sample_id = fields[0];
    s.day = Date::parse_iso(fields[1]);
    s.replicate_index = parse_int_field(fields[2], line_no, "replicate");
    s.svi = parse_double_field(fields[3], line_no, "svi_ml_per_g");
    s.image_path = fields[4];
    if (s.image_path.empty()) {
      throw ParseError("manifest line " + std::to_string(line_no) + ": empty image_path");
    }
    m.samples.push_back(std::move(s));
  }
  if (!saw_header) throw ParseError("manifest '" + path + "' is empty");
  if (m.samples.empty()) {
    throw ParseError("manifest '" + path + "' has a header but no samples");
  }

  m.validate();
  for (const auto& s : m.samples) {
    std::string resolved = m.resolve_path(s);
    if (!std::filesystem::exists(resolved)) {
      throw IntegrityError("sample " + s.sample_id + ": missing image file '" + resolved + "'");
    }
  }
  return m;
}

void write_manifest_csv(const std::string& path, const DatasetManifest& manifest) {
  std::ostringstream out;
  out << kHeader << "\n";
  for (const auto& s : manifest.samples) {
    out << s.sample_id << ',' << s.day.to_iso() << ',' << s.replicate_index << ','
        << format_double(s.svi) << ',' << s.image_path << "\n";
  }
  write_file_atomic(path, out.str());
}

Image load_image(const std::string& path, int width, int height) {
  SVX_CHECK(width > 0 && height > 0, ErrorKind::validation,
            "target resolution must be positive");
  Image img = decode_image_file(path);
  if (img.channels == 1) img = gray_to_rgb(img);
  SVX_CHECK(img.channels == 3, ErrorKind::validation,
            "expected 1- or 3-channel image: " + path);
  if (static_cast<int64_t>(img.width) * height != static_cast<int64_t>(img.height) * width) {
    throw ValidationError("image '" + path + "' aspect " + std::to_string(img.width) + "x" +
                          std::to_string(img.height) + " does not match target " +
                          std::to_string(width) + "x" + std::to_string(height));
  }
  return resize_image(img, width, height);
}

Image normalize(const Image& img, const NormalizationStats& stats) {
  SVX_CHECK(img.channels == 3, ErrorKind::validation, "normalize expects 3 channels");
  stats.validate();
  Image out = img;
  const size_t n = static_cast<size_t>(img.width) * img.height;
  for (size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      out.data[i * 3 + c] =
          static_cast<float>((img.data[i * 3 + c] - stats.mean[c]) / stats.stddev[c]);
    }
  }
  return out;
}

Image denormalize(const Image& img, const NormalizationStats& stats) {
  SVX_CHECK(img.channels == 3, ErrorKind::validation, "denormalize expects 3 channels");
  stats.validate();
  Image out = img;
  const size_t n = static_cast<size_t>(img.width) * img.height;
  for (size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      out.data[i * 3 + c] =
          static_cast<float>(img.data[i * 3 + c] * stats.stddev[c] + stats.mean[c]);
    }
  }
  return out;
}

double compute_svi(const SettlingRecord& record) {
  SVX_CHECK(std::isfinite(record.settled_volume) && record.settled_volume >= 0.0 &&
                record.settled_volume <= 1000.0,
            ErrorKind::validation, "settled volume must lie in [0, 1000] mL/L");
  SVX_CHECK(std::isfinite(record.mlss) && record.mlss > 0.0, ErrorKind::validation,
            "MLSS must be positive");
  return record.settled_volume / record.mlss;
}

std::vector<DayGroup> group_by_day(const DatasetManifest& manifest) {
  std::map<Date, std::vector<size_t>> by_day;
  for (size_t i = 0; i < manifest.samples.size(); ++i) {
    by_day[manifest.samples[i].day].push_back(i);
  }
  std::vector<DayGroup> groups;
  groups.reserve(by_day.size());
  for (auto& [day, idx] : by_day) {
    groups.push_back(DayGroup{day, std::move(idx)});
  }
  return groups;
}

std::string manifest_content_hash(const DatasetManifest& manifest) {
  Sha256 h;
  const std::string header = std::to_string(manifest.width) + "x" +
                             std::to_string(manifest.height) + "\n";
  h.update(header.data(), header.size());
  for (const ImageSample& s : manifest.samples) {
    const std::string row = s.sample_id + "," + to_iso(s.day) + "," +
                            std::to_string(s.replicate_index) + "," +
                            format_double(s.svi) + "," + s.image_path + "\n";
    h.update(row.data(), row.size());
  }
  return h.hex_digest();
}

} // namespace svx
