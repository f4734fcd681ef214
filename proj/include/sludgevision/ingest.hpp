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

#include <string>
#include <vector>

#include "sludgevision/date.hpp"
#include "sludgevision/image.hpp"

namespace svx {

// Per-channel z-score constants. Defaults are the published ImageNet
// statistics; the run config may override them.
struct NormalizationStats {
  double mean[3] = {0.485, 0.456, 0.406};
  double stddev[3] = {0.229, 0.224, 0.225};
  void validate() const;
};

// One microscopy image with its per-day SVI label.
struct ImageSample {
  std::string sample_id;
  Date day;
  int replicate_index = 0;
  std::string image_path; // absolute, or relative to the manifest directory
  double svi = 0.0;       // mL/g
};

struct DatasetManifest {
  std::vector<ImageSample> samples;
  int width = 512;
  int height = 384;
  NormalizationStats normalization;
  std::string base_dir; // directory of the manifest file; resolves image paths

  std::string resolve_path(const ImageSample& s) const;
  void validate() const;
};

// Raw 30-minute settling test readings.
struct SettlingRecord {
  double settled_volume = 0.0; // mL per L
  double mlss = 0.0;           // g/L
};

struct DayGroup {
  Date day;
  std::vector<size_t> sample_indices; // into DatasetManifest::samples
};

// CSV columns: sample_id,day,replicate,svi_ml_per_g,image_path.
DatasetManifest load_manifest(const std::string& path);
DatasetManifest load_manifest(const std::string& path, int width, int height,
                              const NormalizationStats& stats);
void write_manifest_csv(const std::string& path, const DatasetManifest& manifest);

// Decode + replicate grayscale to RGB + resize to (width, height). The input
// aspect ratio must match the target exactly; values land in [0,1].
Image load_image(const std::string& path, int width, int height);

// Per-channel z-score; input must be 3-channel.
Image normalize(const Image& img, const NormalizationStats& stats);
// Inverse of normalize, for round-trip checks and visualization.
Image denormalize(const Image& img, const NormalizationStats& stats);

// settled volume (mL/L) / MLSS (g/L) -> SVI (mL/g).
double compute_svi(const SettlingRecord& record);

// Partition into day groups, ordered by day ascending.
std::vector<DayGroup> group_by_day(const DatasetManifest& manifest);

// SHA-256 over the logical manifest content (ids, days, labels, paths,
// resolution); stored in checkpoints so a model can be tied to its data.
std::string manifest_content_hash(const DatasetManifest& manifest);

} // namespace svx
