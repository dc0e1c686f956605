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


#ifndef PXATTACK_METRICS_HPP_
#define PXATTACK_METRICS_HPP_

#include <cmath>
#include <numbers>
#include <vector>

#include "pxattack/error.hpp"
#include "pxattack/image.hpp"
#include "pxattack/superpixel.hpp"

namespace pxattack {

/// Running ICV / CO over a collection of update areas that may come from
/// several segmentations of the same image.
class AreaMetrics {
 public:
  /// Adds every segment of `seg`, each counted `repeats` times (one per
  /// channel when the areas are channel-expanded).
  void add(const LabTensor& lab, const SegmentMap& seg, std::size_t repeats = 1) {
    if (lab.height() != seg.height() || lab.width() != seg.width()) {
      throw Error(ErrorCode::kShape, "LAB image and segment map differ in size");
    }
    add_icv_terms(lab, seg, repeats);
    add_co_terms(seg, repeats);
  }

  void add_compactness(const SegmentMap& seg, std::size_t repeats = 1) { add_co_terms(seg, repeats); }

  double icv() const { return icv_count_ == 0 ? 0.0 : icv_sum_ / static_cast<double>(icv_count_); }
  double compactness() const { return co_weight_ == 0.0 ? 0.0 : co_sum_ / co_weight_; }
  std::size_t area_count() const { return icv_count_; }

 private:
  void add_icv_terms(const LabTensor& lab, const SegmentMap& seg, std::size_t repeats) {
    const auto labels = seg.labels();
    const std::size_t k = seg.segment_count();
    // Means accumulate offsets from each segment's first pixel.
    std::vector<std::size_t> first(k, labels.size());
    std::vector<LabTensor::Triple> mean(k, {0.0, 0.0, 0.0});
    std::vector<std::size_t> size(k, 0);
    for (std::size_t p = 0; p < labels.size(); ++p) {
      const auto s = static_cast<std::size_t>(labels[p]);
      if (first[s] == labels.size()) first[s] = p;
      for (int j = 0; j < 3; ++j) mean[s][j] += lab[p][j] - lab[first[s]][j];
      ++size[s];
    }
    for (std::size_t s = 0; s < k; ++s) {
      for (int j = 0; j < 3; ++j) mean[s][j] = lab[first[s]][j] + mean[s][j] / static_cast<double>(size[s]);
    }
    std::vector<double> sq(k, 0.0);
    for (std::size_t p = 0; p < labels.size(); ++p) {
      const auto s = static_cast<std::size_t>(labels[p]);
      for (int j = 0; j < 3; ++j) {
        const double d = lab[p][j] - mean[s][j];
        sq[s] += d * d;
      }
    }
    for (std::size_t s = 0; s < k; ++s) {
      icv_sum_ += static_cast<double>(repeats) * std::sqrt(sq[s]) / static_cast<double>(size[s]);
    }
    icv_count_ += repeats * k;
  }

  void add_co_terms(const SegmentMap& seg, std::size_t repeats) {
    const std::size_t height = seg.height(), width = seg.width();
    const std::size_t k = seg.segment_count();
    std::vector<std::size_t> size(k, 0), boundary(k, 0);
    for (std::size_t r = 0; r < height; ++r) {
      for (std::size_t c = 0; c < width; ++c) {
        const auto s = seg.at(r, c);
        ++size[static_cast<std::size_t>(s)];
        const bool edge = r == 0 || c == 0 || r + 1 == height || c + 1 == width ||
                          seg.at(r - 1, c) != s || seg.at(r + 1, c) != s ||
                          seg.at(r, c - 1) != s || seg.at(r, c + 1) != s;
        if (edge) ++boundary[static_cast<std::size_t>(s)];
      }
    }
    for (std::size_t s = 0; s < k; ++s) {
      const double area = static_cast<double>(size[s]);
      const double perim = static_cast<double>(boundary[s]);
      const double q = 4.0 * std::numbers::pi * area / (perim * perim);
      co_sum_ += static_cast<double>(repeats) * q * area;
      co_weight_ += static_cast<double>(repeats) * area;
    }
  }

  double icv_sum_ = 0.0;
  std::size_t icv_count_ = 0;
  double co_sum_ = 0.0;
  double co_weight_ = 0.0;
};

/// Intra-cluster variation: mean over segments of
/// sqrt(sum_p |I(p) - mu(s)|^2) / |s| in LAB.
inline double icv(const LabTensor& lab, const SegmentMap& seg) {
  AreaMetrics m;
  m.add(lab, seg);
  return m.icv();
}

/// Area-weighted mean of 4 pi |s| / |R(s)|^2, where R(s) are the pixels of s
/// with a 4-neighbour outside s (the image border counts as outside).
inline double compactness(const SegmentMap& seg) {
  AreaMetrics m;
  m.add_compactness(seg);
  return m.compactness();
}

}  // namespace pxattack

#endif  // PXATTACK_METRICS_HPP_
