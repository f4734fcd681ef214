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

#include <cstddef>
#include <string>
#include <vector>

namespace svx {

// Float raster, HWC layout, values nominally in [0,1] before z-scoring.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h, int c, float fill = 0.f)
      : width(w), height(h), channels(c), data(size_t(w) * h * c, fill) {}

  float& at(int y, int x, int c) {
    return data[(size_t(y) * width + x) * channels + c];
  }
  float at(int y, int x, int c) const {
    return data[(size_t(y) * width + x) * channels + c];
  }
  size_t pixel_count() const { return size_t(width) * height; }
  bool same_shape(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
};

// Decodes PNG/JPEG into [0,1] floats. Grayscale files come back 1-channel.
Image decode_image_file(const std::string& path);

// Area-averaging downscale; bilinear when upscaling. Identity when sizes match.
Image resize_image(const Image& img, int out_w, int out_h);

// Rotation about the image center, bilinear sampling, reflect padding,
// output shape unchanged.
Image rotate_image(const Image& img, double degrees);

// 8-bit PNG, single channel for 1-channel input and RGB otherwise. Writes
// are atomic (temp file + rename).
void write_png(const std::string& path, const Image& img);

Image gray_to_rgb(const Image& img);

} // namespace svx
