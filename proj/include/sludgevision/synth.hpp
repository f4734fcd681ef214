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

#include <cstdint>
#include <string>

#include "sludgevision/common.hpp"
#include "sludgevision/image.hpp"
#include "sludgevision/ingest.hpp"

namespace svx {

// Monotone map g: [0,1] -> [0,1] from filament density to the SVI range,
// with g(0) = 0 and g(1) = 1.
enum class LabelMapKind { linear, sigmoidal };

struct SynthLabelMap {
  LabelMapKind kind = LabelMapKind::linear;
  // Logistic steepness/midpoint, rescaled so the endpoints land on 0 and 1.
  double sigmoid_steepness = 8.0;
  double sigmoid_midpoint = 0.5;

  void validate() const;
  double g(double density) const;
};

struct SynthParams {
  int width = 512;
  int height = 384;
  IntRange floc_count_range{6, 14};
  RealRange floc_radius_range{4.0, 16.0};
  double filament_density = 0.5; // latent in [0,1]
  RealRange filament_length_range{30.0, 120.0};
  double noise_sigma = 0.02;
  double svi_min = 60.0;
  double svi_max = 400.0;

  void validate() const;
};

// Ground-truth bookkeeping from the renderer, used by property tests.
struct SynthImageStats {
  int floc_count = 0;
  int strand_count = 0;
  double total_strand_length = 0.0;    // px of walked path
  double filament_pixel_fraction = 0.0; // strand-mask coverage in [0,1]
};

struct SynthResult {
  Image image; // 3-channel replicated grayscale, values in [0,1]
  double svi = 0.0;
  SynthImageStats stats;
};

// Bright anisotropic floc bumps plus dark correlated-random-walk filament
// strands over a 0.5 background. Pure function of (params, label_map, seed).
SynthResult generate_image(const SynthParams& params, const SynthLabelMap& label_map,
                           uint64_t seed);

// Writes n_days * images_per_day PNGs plus manifest.csv under out_dir. Each
// day draws one filament density (one SVI); replicates share the label and
// differ in placement noise.
DatasetManifest generate_dataset(int n_days, int images_per_day, uint64_t seed,
                                 const std::string& out_dir);
DatasetManifest generate_dataset(int n_days, int images_per_day, uint64_t seed,
                                 const std::string& out_dir, const SynthParams& base_params,
                                 const SynthLabelMap& label_map);

} // namespace svx
