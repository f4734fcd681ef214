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
#include "sludgevision/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <utility>
#include <vector>

#include "sludgevision/common.hpp"
#include "sludgevision/rng.hpp"

namespace svx {

namespace {

constexpr double kBackground = 0.5;
constexpr double kStrandSigmaPx = 1.1;
constexpr double kStrandDepth = 0.35;
constexpr double kStrandMaskThreshold = 0.2;
// Total walked strand length at density 1, as a fraction of the pixel count.
constexpr double kStrandLengthPerArea = 0.075;
constexpr double kWalkTurnSigmaRad = 0.25;

double logistic(double x, double k, double x0) {
  return 1.0 / (1.0 + std::exp(-k * (x - x0)));
}

void stamp_floc(std::vector<double>& img, int w, int h, double cx, double cy,
                double sigma_u, double sigma_v, double theta, double amplitude) {
  const double cos_t = std::cos(theta);
  const double sin_t = std::sin(theta);
  const double extent = 3.0 * std::max(sigma_u, sigma_v);
  const int x0 = std::max(0, int(std::floor(cx - extent)));
  const int x1 = std::min(w - 1, int(std::ceil(cx + extent)));
  const int y0 = std::max(0, int(std::floor(cy - extent)));
  const int y1 = std::min(h - 1, int(std::ceil(cy + extent)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dx = x - cx;
      const double dy = y - cy;
      const double u = cos_t * dx + sin_t * dy;
      const double v = -sin_t * dx + cos_t * dy;
      const double e = 0.5 * (u * u / (sigma_u * sigma_u) + v * v / (sigma_v * sigma_v));
      if (e < 12.0) img[size_t(y) * w + x] += amplitude * std::exp(-e);
    }
  }
}

void stamp_strand_point(std::vector<double>& strand, int w, int h, double px, double py) {
  const double extent = 3.0 * kStrandSigmaPx;
  const int x0 = std::max(0, int(std::floor(px - extent)));
  const int x1 = std::min(w - 1, int(std::ceil(px + extent)));
  const int y0 = std::max(0, int(std::floor(py - extent)));
  const int y1 = std::min(h - 1, int(std::ceil(py + extent)));
  const double inv = 1.0 / (2.0 * kStrandSigmaPx * kStrandSigmaPx);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double d2 = (x - px) * (x - px) + (y - py) * (y - py);
      const double g = std::exp(-d2 * inv);
      double& cell = strand[size_t(y) * w + x];
      if (g > cell) cell = g;
    }
  }
}

double reflect_coord(double p, double hi) {
  // Keeps walks inside [0, hi] by mirroring at the borders.
  if (hi <= 0.0) return 0.0;
  double period = 2.0 * hi;
  double m = std::fmod(p, period);
  if (m < 0.0) m += period;
  return m <= hi ? m : period - m;
}

} // namespace

void SynthLabelMap::validate() const {
  if (kind == LabelMapKind::sigmoidal) {
    SVX_CHECK(std::isfinite(sigmoid_steepness) && sigmoid_steepness > 0.0,
              ErrorKind::validation, "sigmoid steepness must be positive");
    SVX_CHECK(std::isfinite(sigmoid_midpoint), ErrorKind::validation,
              "sigmoid midpoint must be finite");
  }
}

double SynthLabelMap::g(double density) const {
  validate();
  SVX_CHECK(density >= 0.0 && density <= 1.0, ErrorKind::validation,
            "filament density must lie in [0,1]");
  if (kind == LabelMapKind::linear) return density;
  const double lo = logistic(0.0, sigmoid_steepness, sigmoid_midpoint);
  const double hi = logistic(1.0, sigmoid_steepness, sigmoid_midpoint);
  return (logistic(density, sigmoid_steepness, sigmoid_midpoint) - lo) / (hi - lo);
}

void SynthParams::validate() const {
  SVX_CHECK(width > 0 && height > 0, ErrorKind::validation,
            "synth resolution must be positive");
  SVX_CHECK(floc_count_range.lo >= 0 && floc_count_range.hi >= floc_count_range.lo,
            ErrorKind::validation, "floc count range must be non-empty");
  SVX_CHECK(floc_radius_range.lo > 0.0 && floc_radius_range.hi >= floc_radius_range.lo,
            ErrorKind::validation, "floc radius range must be non-empty and positive");
  SVX_CHECK(std::isfinite(filament_density) && filament_density >= 0.0 && filament_density <= 1.0,
            ErrorKind::validation, "filament density must lie in [0,1]");
  SVX_CHECK(filament_length_range.lo > 0.0 &&
                filament_length_range.hi >= filament_length_range.lo,
            ErrorKind::validation, "filament length range must be non-empty and positive");
  SVX_CHECK(std::isfinite(noise_sigma) && noise_sigma >= 0.0, ErrorKind::validation,
            "noise sigma must be non-negative");
  SVX_CHECK(std::isfinite(svi_min) && std::isfinite(svi_max) && svi_min < svi_max,
            ErrorKind::validation, "svi_min must be below svi_max");
}

SynthResult generate_image(const SynthParams& params, const SynthLabelMap& label_map,
                           uint64_t seed) {
  params.validate();
  label_map.validate();

  const int w = params.width;
  const int h = params.height;
  Rng rng(seed);
  SynthResult res;
  res.svi = params.svi_min + (params.svi_max - params.svi_min) * label_map.g(params.filament_density);

  std::vector<double> canvas(size_t(w) * h, kBackground);

  res.stats.floc_count =
      rng.uniform_int(params.floc_count_range.lo, params.floc_count_range.hi);
  for (int i = 0; i < res.stats.floc_count; ++i) {
    const double cx = rng.uniform(0.0, double(w));
    const double cy = rng.uniform(0.0, double(h));
    const double r = rng.uniform(params.floc_radius_range.lo, params.floc_radius_range.hi);
    const double stretch = rng.uniform(1.0, 2.2);
    const double theta = rng.uniform(0.0, std::numbers::pi);
    const double amplitude = rng.uniform(0.15, 0.35);
    stamp_floc(canvas, w, h, cx, cy, r * stretch, r, theta, amplitude);
  }

  // Strands accumulate into a max-combined intensity field so that crossings
  // do not double-darken and coverage tracks walked length.
  std::vector<double> strand(size_t(w) * h, 0.0);
  const double target_length = params.filament_density * kStrandLengthPerArea * double(w) * h;
  double walked = 0.0;
  while (walked < target_length) {
    double remaining = target_length - walked;
    double length = rng.uniform(params.filament_length_range.lo, params.filament_length_range.hi);
    length = std::min(length, remaining);
    double x = rng.uniform(0.0, double(w));
    double y = rng.uniform(0.0, double(h));
    double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const int steps = std::max(1, int(std::lround(length)));
    for (int s = 0; s < steps; ++s) {
      stamp_strand_point(strand, w, h, x, y);
      heading += rng.normal(0.0, kWalkTurnSigmaRad);
      x = reflect_coord(x + std::cos(heading), double(w - 1));
      y = reflect_coord(y + std::sin(heading), double(h - 1));
    }
    walked += steps;
    res.stats.strand_count += 1;
  }
  res.stats.total_strand_length = walked;

  size_t strand_pixels = 0;
  for (size_t i = 0; i < canvas.size(); ++i) {
    if (strand[i] > kStrandMaskThreshold) ++strand_pixels;
    canvas[i] -= kStrandDepth * strand[i];
  }
  res.stats.filament_pixel_fraction = double(strand_pixels) / double(canvas.size());

  Image gray;
  gray.width = w;
  gray.height = h;
  gray.channels = 1;
  gray.data.resize(canvas.size());
  for (size_t i = 0; i < canvas.size(); ++i) {
    double v = canvas[i];
    if (params.noise_sigma > 0.0) v += rng.normal(0.0, params.noise_sigma);
    gray.data[i] = float(std::clamp(v, 0.0, 1.0));
  }
  res.image = gray_to_rgb(gray);
  return res;
}

DatasetManifest generate_dataset(int n_days, int images_per_day, uint64_t seed,
                                 const std::string& out_dir) {
  return generate_dataset(n_days, images_per_day, seed, out_dir, SynthParams{}, SynthLabelMap{});
}

DatasetManifest generate_dataset(int n_days, int images_per_day, uint64_t seed,
                                 const std::string& out_dir, const SynthParams& base_params,
                                 const SynthLabelMap& label_map) {
  SVX_CHECK(n_days >= 1, ErrorKind::validation, "n_days must be >= 1");
  SVX_CHECK(images_per_day >= 1, ErrorKind::validation, "images_per_day must be >= 1");
  base_params.validate();
  label_map.validate();

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "images", ec);
  if (ec) throw IoError("cannot create '" + out_dir + "': " + ec.message());

  // Stratified jittered densities, shuffled across days: guarantees the label
  // range is covered while keeping the day order uninformative.
  Rng day_rng(hash_combine(seed, hash64("synth.days")));
  std::vector<double> densities(static_cast<size_t>(n_days));
  for (int d = 0; d < n_days; ++d) {
    densities[size_t(d)] = (double(d) + day_rng.uniform()) / double(n_days);
  }
  for (int d = n_days - 1; d > 0; --d) {
    const int j = day_rng.uniform_int(0, d);
    std::swap(densities[size_t(d)], densities[size_t(j)]);
  }

  DatasetManifest manifest;
  manifest.width = base_params.width;
  manifest.height = base_params.height;
  manifest.base_dir = out_dir;
  const Date start(2024, 1, 1);

  for (int d = 0; d < n_days; ++d) {
    SynthParams params = base_params;
    params.filament_density = densities[size_t(d)];
    const Date day = start.add_days(d);
    for (int r = 0; r < images_per_day; ++r) {
      char name[64];
      std::snprintf(name, sizeof(name), "d%04d_r%02d", d, r);
      const uint64_t image_seed = hash_combine(hash_combine(seed, hash64("synth.image")),
                                               uint64_t(d) * 1000003u + uint64_t(r));
      SynthResult result = generate_image(params, label_map, image_seed);

      Image gray;
      gray.width = result.image.width;
      gray.height = result.image.height;
      gray.channels = 1;
      gray.data.resize(size_t(gray.width) * gray.height);
      for (size_t i = 0; i < gray.data.size(); ++i) gray.data[i] = result.image.data[i * 3];

      const std::string rel = std::string("images/") + name + ".png";
      write_png((fs::path(out_dir) / rel).string(), gray);

      ImageSample s;
      s.sample_id = name;
      s.day = day;
      s.replicate_index = r;
      s.image_path = rel;
      s.svi = result.svi;
      manifest.samples.push_back(std::move(s));
    }
  }

  manifest.validate();
  write_manifest_csv((fs::path(out_dir) / "manifest.csv").string(), manifest);
  return manifest;
}

} // namespace svx
