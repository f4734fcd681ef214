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
#include "sludgevision/augment.hpp"

#include <algorithm>
#include <cmath>

namespace svx {

namespace {

constexpr double kEraseFill = 0.5;
constexpr double kEraseAspectLo = 1.0 / 3.0;
constexpr double kEraseAspectHi = 3.0;

void check_probability(double p, const char* what) {
  SVX_CHECK(std::isfinite(p) && p >= 0.0 && p <= 1.0, ErrorKind::validation,
            std::string(what) + " probability must lie in [0,1]");
}

void check_interval(const RealRange& r, const char* what) {
  SVX_CHECK(std::isfinite(r.lo) && std::isfinite(r.hi) && r.lo <= r.hi,
            ErrorKind::validation, std::string(what) + " interval must be non-empty");
}

Image flip_h(const Image& img) {
  Image out = img;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
      }
    }
  }
  return out;
}

Image flip_v(const Image& img) {
  Image out = img;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        out.at(y, x, c) = img.at(img.height - 1 - y, x, c);
      }
    }
  }
  return out;
}

} // namespace

void AugmentPolicy::validate() const {
  check_probability(flip_horizontal, "flip_horizontal");
  check_probability(flip_vertical, "flip_vertical");
  check_probability(erase_probability, "erase");
  check_interval(rotation_degrees, "rotation_degrees");
  check_interval(brightness_delta, "brightness_delta");
  check_interval(erase_area_fraction, "erase_area_fraction");
  SVX_CHECK(rotation_degrees.lo >= -180.0 && rotation_degrees.hi <= 180.0,
            ErrorKind::validation, "rotation_degrees must lie within [-180, 180]");
  if (erase_probability > 0.0) {
    SVX_CHECK(erase_area_fraction.lo > 0.0 && erase_area_fraction.hi < 1.0,
              ErrorKind::validation, "erase_area_fraction must lie within (0,1)");
  }
}

AugmentPolicy AugmentPolicy::identity() {
  AugmentPolicy p;
  p.flip_horizontal = 0.0;
  p.flip_vertical = 0.0;
  p.rotation_degrees = {0.0, 0.0};
  p.brightness_delta = {0.0, 0.0};
  p.erase_area_fraction = {0.0, 0.0};
  p.erase_probability = 0.0;
  return p;
}

Image random_flip(const Image& img, Rng& rng, const AugmentPolicy& policy) {
  Image out = img;
  if (rng.bernoulli(policy.flip_horizontal)) out = flip_h(out);
  if (rng.bernoulli(policy.flip_vertical)) out = flip_v(out);
  return out;
}

Image random_rotate(const Image& img, Rng& rng, const AugmentPolicy& policy) {
  const double angle = rng.uniform(policy.rotation_degrees.lo, policy.rotation_degrees.hi);
  if (angle == 0.0) return img;
  return rotate_image(img, angle);
}

Image random_brightness(const Image& img, Rng& rng, const AugmentPolicy& policy) {
  const double delta = rng.uniform(policy.brightness_delta.lo, policy.brightness_delta.hi);
  Image out = img;
  const double gain = 1.0 + delta;
  for (float& v : out.data) {
    v = float(std::clamp(double(v) * gain, 0.0, 1.0));
  }
  return out;
}

Image random_erase(const Image& img, Rng& rng, const AugmentPolicy& policy) {
  if (!rng.bernoulli(policy.erase_probability)) return img;
  const double fraction =
      rng.uniform(policy.erase_area_fraction.lo, policy.erase_area_fraction.hi);
  const double aspect = rng.uniform(kEraseAspectLo, kEraseAspectHi);
  const double area = fraction * double(img.width) * double(img.height);
  int rw = int(std::lround(std::sqrt(area * aspect)));
  int rh = int(std::lround(std::sqrt(area / aspect)));
  rw = std::clamp(rw, 1, img.width);
  rh = std::clamp(rh, 1, img.height);
  const int x0 = rng.uniform_int(0, img.width - rw);
  const int y0 = rng.uniform_int(0, img.height - rh);

  Image out = img;
  for (int y = y0; y < y0 + rh; ++y) {
    for (int x = x0; x < x0 + rw; ++x) {
      for (int c = 0; c < img.channels; ++c) out.at(y, x, c) = float(kEraseFill);
    }
  }
  return out;
}

Image apply_policy(const Image& img, const AugmentPolicy& policy, Rng& rng) {
  policy.validate();
  Image out = random_flip(img, rng, policy);
  out = random_rotate(out, rng, policy);
  out = random_brightness(out, rng, policy);
  out = random_erase(out, rng, policy);
  return out;
}

} // namespace svx
