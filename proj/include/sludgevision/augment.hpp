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

#include "sludgevision/common.hpp"
#include "sludgevision/image.hpp"
#include "sludgevision/rng.hpp"

namespace svx {

// Label-preserving training augmentations. All operate on pre-normalization
// images with values in [0,1] and preserve the input resolution.
struct AugmentPolicy {
  double flip_horizontal = 0.5;
  double flip_vertical = 0.5;
  RealRange rotation_degrees{-180.0, 180.0};
  RealRange brightness_delta{-0.20, 0.20};
  RealRange erase_area_fraction{0.02, 0.20};
  double erase_probability = 0.5;

  void validate() const;
  // Everything off: probabilities 0, degenerate zero intervals.
  static AugmentPolicy identity();
};

// Horizontal then vertical flip, each drawn independently.
Image random_flip(const Image& img, Rng& rng, const AugmentPolicy& policy);
// Uniform angle from rotation_degrees, bilinear about the center with
// reflect padding. An exactly zero draw returns the input unchanged.
Image random_rotate(const Image& img, Rng& rng, const AugmentPolicy& policy);
// out = clamp(img * (1 + delta), 0, 1), delta uniform from brightness_delta.
Image random_brightness(const Image& img, Rng& rng, const AugmentPolicy& policy);
// With erase_probability, fills a random rectangle (area fraction from
// erase_area_fraction, aspect from [1/3, 3], fully inside) with 0.5.
Image random_erase(const Image& img, Rng& rng, const AugmentPolicy& policy);

// flip -> rotate -> brightness -> erase, sharing one rng stream.
Image apply_policy(const Image& img, const AugmentPolicy& policy, Rng& rng);

} // namespace svx
