/*
 * Copyright 2026 The pxattack Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#ifndef PXATTACK_IMAGE_HPP_
#define PXATTACK_IMAGE_HPP_

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pxattack/error.hpp"

namespace pxattack {

struct Shape {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;

  std::size_t pixels() const { return height * width; }
  std::size_t size() const { return height * width * channels; }
  bool operator==(const Shape&) const = default;
};

inline std::string to_string(const Shape& s) {
  return std::to_string(s.height) + "x" + std::to_string(s.width) + "x" +
         std::to_string(s.channels);
}

/// H x W x C image with every intensity in [0, 1], row-major (h, w, c).
class ImageTensor {
 public:
  ImageTensor() = default;

  /// Throws kShape on a size mismatch and kOutOfRange if any value leaves
  /// the unit interval (NaN included).
  ImageTensor(Shape shape, std::vector<double> data)
      : shape_(shape), data_(std::move(data)) {
    if (shape_.height == 0 || shape_.width == 0 || shape_.channels == 0) {
      throw Error(ErrorCode::kShape, "image dimensions must be positive");
    }
    if (data_.size() != shape_.size()) {
      throw Error(ErrorCode::kShape,
                  "image data length " + std::to_string(data_.size()) +
                      " does not match shape " + to_string(shape_));
    }
    for (double v : data_) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw Error(ErrorCode::kOutOfRange,
                    "image intensity outside [0, 1]: " + std::to_string(v));
      }
    }
  }

  static ImageTensor filled(Shape shape, double value) {
    return ImageTensor(shape, std::vector<double>(shape.size(), value));
  }

  const Shape& shape() const { return shape_; }
  std::size_t height() const { return shape_.height; }
  std::size_t width() const { return shape_.width; }
  std::size_t channels() const { return shape_.channels; }
  bool empty() const { return data_.empty(); }

  std::span<const double> data() const { return data_; }

  double at(std::size_t row, std::size_t col, std::size_t ch) const {
    return data_[(row * shape_.width + col) * shape_.channels + ch];
  }

  bool operator==(const ImageTensor&) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Per-pixel CIELAB triples for an H x W image.
class LabTensor {
 public:
  using Triple = std::array<double, 3>;

  LabTensor() = default;
  LabTensor(std::size_t height, std::size_t width, std::vector<Triple> data)
      : height_(height), width_(width), data_(std::move(data)) {
    if (data_.size() != height_ * width_) {
      throw Error(ErrorCode::kShape, "lab data length does not match shape");
    }
  }

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::span<const Triple> data() const { return data_; }
  const Triple& at(std::size_t row, std::size_t col) const {
    return data_[row * width_ + col];
  }
  const Triple& operator[](std::size_t pixel) const { return data_[pixel]; }

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<Triple> data_;
};

namespace detail {

inline double srgb_expand(double c) {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

inline double lab_f(double t) {
  constexpr double kDelta = 6.0 / 29.0;
  return t > kDelta * kDelta * kDelta ? std::cbrt(t)
                                      : t / (3.0 * kDelta * kDelta) + 4.0 / 29.0;
}

// Linear sRGB -> XYZ (D65), rows pre-divided by the reference white so that
// (1,1,1) lands exactly on the white point.
struct XyzRows {
  std::array<std::array<double, 3>, 3> m;
};

inline const XyzRows& normalized_xyz_rows() {
  static const XyzRows rows = [] {
    constexpr std::array<std::array<double, 3>, 3> kSrgbToXyz{{
        {0.4124564, 0.3575761, 0.1804375},
        {0.2126729, 0.7151522, 0.0721750},
        {0.0193339, 0.1191920, 0.9503041},
    }};
    XyzRows out{};
    for (std::size_t i = 0; i < 3; ++i) {
      const double sum = kSrgbToXyz[i][0] + kSrgbToXyz[i][1] + kSrgbToXyz[i][2];
      for (std::size_t j = 0; j < 3; ++j) out.m[i][j] = kSrgbToXyz[i][j] / sum;
    }
    return out;
  }();
  return rows;
}

}  // namespace detail

/// sRGB triple in [0,1] -> CIELAB under D65 / 2 degree observer.
inline LabTensor::Triple srgb_pixel_to_lab(double r, double g, double b) {
  const double lin[3] = {detail::srgb_expand(r), detail::srgb_expand(g),
                         detail::srgb_expand(b)};
  const auto& m = detail::normalized_xyz_rows().m;
  double f[3];
  for (std::size_t i = 0; i < 3; ++i) {
    f[i] = detail::lab_f(m[i][0] * lin[0] + m[i][1] * lin[1] + m[i][2] * lin[2]);
  }
  return {116.0 * f[1] - 16.0, 500.0 * (f[0] - f[1]), 200.0 * (f[1] - f[2])};
}

/// Requires C = 3.
inline LabTensor srgb_to_lab(const ImageTensor& img) {
  if (img.channels() != 3) {
    throw Error(ErrorCode::kShape, "srgb_to_lab needs 3 channels, got " +
                                       std::to_string(img.channels()));
  }
  const auto px = img.data();
  std::vector<LabTensor::Triple> out(img.shape().pixels());
  for (std::size_t p = 0; p < out.size(); ++p) {
    out[p] = srgb_pixel_to_lab(px[3 * p], px[3 * p + 1], px[3 * p + 2]);
  }
  return LabTensor(img.height(), img.width(), std::move(out));
}

/// Grayscale images are treated as neutral sRGB (r = g = b).
inline LabTensor image_to_lab(const ImageTensor& img) {
  if (img.channels() == 3) return srgb_to_lab(img);
  if (img.channels() != 1) {
    throw Error(ErrorCode::kShape, "LAB conversion needs 1 or 3 channels, got " +
                                       std::to_string(img.channels()));
  }
  const auto px = img.data();
  std::vector<LabTensor::Triple> out(px.size());
  for (std::size_t p = 0; p < out.size(); ++p) {
    out[p] = srgb_pixel_to_lab(px[p], px[p], px[p]);
  }
  return LabTensor(img.height(), img.width(), std::move(out));
}

}  // namespace pxattack

#endif  // PXATTACK_IMAGE_HPP_
