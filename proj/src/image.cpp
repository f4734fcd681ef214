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
#include "sludgevision/image.hpp"

#include <filesystem>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "sludgevision/common.hpp"
#include "sludgevision/io_util.hpp"

namespace svx {

namespace {

cv::Mat to_mat(const Image& img) {
  SVX_CHECK(img.channels == 1 || img.channels == 3, ErrorKind::validation,
            "image must have 1 or 3 channels");
  cv::Mat m(img.height, img.width, img.channels == 1 ? CV_32FC1 : CV_32FC3);
  std::memcpy(m.data, img.data.data(), img.data.size() * sizeof(float));
  return m;
}

Image from_mat(const cv::Mat& m) {
  Image img(m.cols, m.rows, m.channels());
  if (m.isContinuous()) {
    std::memcpy(img.data.data(), m.data, img.data.size() * sizeof(float));
  } else {
    for (int y = 0; y < m.rows; ++y)
      std::memcpy(&img.data[size_t(y) * m.cols * m.channels()], m.ptr<float>(y),
                  size_t(m.cols) * m.channels() * sizeof(float));
  }
  return img;
}

} // namespace

Image decode_image_file(const std::string& path) {
  cv::Mat raw = cv::imread(path, cv::IMREAD_UNCHANGED);
  if (raw.empty()) throw IoError("cannot decode image '" + path + "'");
  if (raw.channels() == 4) cv::cvtColor(raw, raw, cv::COLOR_BGRA2BGR);
  if (raw.channels() == 3) cv::cvtColor(raw, raw, cv::COLOR_BGR2RGB);
  cv::Mat f;
  double scale = raw.depth() == CV_16U ? 1.0 / 65535.0 : 1.0 / 255.0;
  if (raw.depth() == CV_32F || raw.depth() == CV_64F) scale = 1.0;
  raw.convertTo(f, CV_32F, scale);
  return from_mat(f);
}

Image resize_image(const Image& img, int out_w, int out_h) {
  SVX_CHECK(out_w > 0 && out_h > 0, ErrorKind::validation, "resize target must be positive");
  if (img.width == out_w && img.height == out_h) return img;
  cv::Mat src = to_mat(img);
  cv::Mat dst;
  bool down = out_w <= img.width && out_h <= img.height;
  cv::resize(src, dst, cv::Size(out_w, out_h), 0, 0,
             down ? cv::INTER_AREA : cv::INTER_LINEAR);
  return from_mat(dst);
}

Image rotate_image(const Image& img, double degrees) {
  cv::Mat src = to_mat(img);
  cv::Point2f center(float(img.width - 1) / 2.f, float(img.height - 1) / 2.f);
  cv::Mat rot = cv::getRotationMatrix2D(center, degrees, 1.0);
  cv::Mat dst;
  cv::warpAffine(src, dst, rot, src.size(), cv::INTER_LINEAR,
                 cv::BORDER_REFLECT_101);
  return from_mat(dst);
}

void write_png(const std::string& path, const Image& img) {
  cv::Mat f = to_mat(img);
  cv::Mat bytes;
  f.convertTo(bytes, img.channels == 1 ? CV_8UC1 : CV_8UC3, 255.0);
  if (img.channels == 3) cv::cvtColor(bytes, bytes, cv::COLOR_RGB2BGR);
  std::vector<uchar> buf;
  if (!cv::imencode(".png", bytes, buf))
    throw IoError("PNG encode failed for '" + path + "'");
  write_file_atomic(path, std::string(buf.begin(), buf.end()));
}

Image gray_to_rgb(const Image& img) {
  if (img.channels == 3) return img;
  SVX_CHECK(img.channels == 1, ErrorKind::validation, "expected 1- or 3-channel image");
  Image out(img.width, img.height, 3);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      float v = img.at(y, x, 0);
      out.at(y, x, 0) = v;
      out.at(y, x, 1) = v;
      out.at(y, x, 2) = v;
    }
  return out;
}

} // namespace svx
