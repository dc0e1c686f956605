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


#ifndef PXATTACK_SUPERPIXEL_HPP_
#define PXATTACK_SUPERPIXEL_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "pxattack/error.hpp"
#include "pxattack/image.hpp"
#include "pxattack/rtf.hpp"

namespace pxattack {

/// A partition of the H x W plane into segments with contiguous ids
/// 0..segment_count()-1, each id used at least once.
class SegmentMap {
 public:
  SegmentMap() = default;

  /// Validates that ids are exactly {0, ..., k-1}.
  SegmentMap(std::size_t height, std::size_t width, std::vector<std::int32_t> labels)
      : height_(height), width_(width), labels_(std::move(labels)) {
    if (height_ == 0 || width_ == 0 || labels_.size() != height_ * width_) {
      throw Error(ErrorCode::kShape, "segment labels do not match " +
                                         std::to_string(height_) + "x" + std::to_string(width_));
    }
    std::int32_t max_id = -1;
    for (auto id : labels_) {
      if (id < 0) throw Error(ErrorCode::kOutOfRange, "negative segment id");
      max_id = std::max(max_id, id);
    }
    std::vector<bool> seen(static_cast<std::size_t>(max_id) + 1, false);
    for (auto id : labels_) seen[static_cast<std::size_t>(id)] = true;
    if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
      throw Error(ErrorCode::kOutOfRange, "segment ids are not contiguous");
    }
    count_ = static_cast<std::size_t>(max_id) + 1;
  }

  /// Renumbers arbitrary non-negative labels by first appearance in raster
  /// order, producing a valid map.
  static SegmentMap canonical(std::size_t height, std::size_t width,
                              const std::vector<std::int32_t>& raw) {
    std::map<std::int32_t, std::int32_t> remap;
    std::vector<std::int32_t> labels(raw.size());
    for (std::size_t p = 0; p < raw.size(); ++p) {
      auto [it, inserted] = remap.try_emplace(raw[p], static_cast<std::int32_t>(remap.size()));
      labels[p] = it->second;
    }
    return SegmentMap(height, width, std::move(labels));
  }

  static SegmentMap single(std::size_t height, std::size_t width) {
    return SegmentMap(height, width, std::vector<std::int32_t>(height * width, 0));
  }

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t segment_count() const { return count_; }
  std::span<const std::int32_t> labels() const { return labels_; }
  std::int32_t at(std::size_t row, std::size_t col) const { return labels_[row * width_ + col]; }

  /// Flat pixel indices of every segment, ascending within each segment.
  std::vector<std::vector<std::size_t>> segment_pixels() const {
    std::vector<std::vector<std::size_t>> out(count_);
    for (std::size_t p = 0; p < labels_.size(); ++p) {
      out[static_cast<std::size_t>(labels_[p])].push_back(p);
    }
    return out;
  }

  bool operator==(const SegmentMap&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<std::int32_t> labels_;
  std::size_t count_ = 0;
};

struct SlicParams {
  std::size_t max_segments = 1;
  double alpha = 10.0;
  bool enforce_connectivity = true;
  std::size_t kmeans_iters = 10;
};

struct SeedPoint {
  double row;
  double col;
  bool operator==(const SeedPoint&) const = default;
};

/// Grid of seed centers for a budget of n segments: round(sqrt(n H / W))
/// rows by ceil(n / rows) columns, each seed at the midpoint of its cell,
/// trimmed to the first n seeds in row-major order. Coordinates are
/// continuous: pixel (r, c) covers [r, r+1) x [c, c+1).
inline std::vector<SeedPoint> seed_grid(std::size_t height, std::size_t width, std::size_t n) {
  if (height == 0 || width == 0 || n < 1 || n > height * width) {
    throw Error(ErrorCode::kOutOfRange, "seed_grid needs 1 <= n <= H*W, got n=" + std::to_string(n));
  }
  const double ideal = std::sqrt(static_cast<double>(n) * height / width);
  std::size_t rows = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(ideal)), 1, height);
  std::size_t cols = std::min(width, (n + rows - 1) / rows);
  while (rows * cols < n) {
    ++rows;
    cols = std::min(width, (n + rows - 1) / rows);
  }
  const double cell_h = static_cast<double>(height) / rows;
  const double cell_w = static_cast<double>(width) / cols;
  std::vector<SeedPoint> seeds;
  seeds.reserve(n);
  for (std::size_t i = 0; i < rows && seeds.size() < n; ++i) {
    for (std::size_t j = 0; j < cols && seeds.size() < n; ++j) {
      seeds.push_back({(i + 0.5) * cell_h, (j + 0.5) * cell_w});
    }
  }
  return seeds;
}

namespace detail {

inline constexpr int kRowStep[4] = {-1, 1, 0, 0};
inline constexpr int kColStep[4] = {0, 0, -1, 1};

// 4-connected components of a label image. Component ids are assigned in
// raster order of each component's first pixel.
inline std::vector<std::int32_t> label_components(std::size_t height, std::size_t width,
                                                  std::span<const std::int32_t> labels,
                                                  std::size_t* component_count = nullptr) {
  std::vector<std::int32_t> comp(labels.size(), -1);
  std::vector<std::size_t> stack;
  std::int32_t next = 0;
  for (std::size_t start = 0; start < labels.size(); ++start) {
    if (comp[start] >= 0) continue;
    comp[start] = next;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      const std::size_t r = p / width, c = p % width;
      for (int k = 0; k < 4; ++k) {
        const auto nr = static_cast<std::ptrdiff_t>(r) + kRowStep[k];
        const auto nc = static_cast<std::ptrdiff_t>(c) + kColStep[k];
        if (nr < 0 || nc < 0 || nr >= static_cast<std::ptrdiff_t>(height) ||
            nc >= static_cast<std::ptrdiff_t>(width)) {
          continue;
        }
        const std::size_t q = static_cast<std::size_t>(nr) * width + static_cast<std::size_t>(nc);
        if (comp[q] < 0 && labels[q] == labels[p]) {
          comp[q] = next;
          stack.push_back(q);
        }
      }
    }
    ++next;
  }
  if (component_count != nullptr) *component_count = static_cast<std::size_t>(next);
  return comp;
}

}  // namespace detail

/// Makes every segment 4-connected. Components smaller than min_size are
/// merged into the neighbouring label sharing the most edges with them
/// (ties go to the smaller label); leftover disconnected pieces of one
/// label get their own ids. Output ids follow raster first appearance.
inline SegmentMap enforce_connectivity(const SegmentMap& seg, std::size_t min_size) {
  const std::size_t height = seg.height(), width = seg.width();
  std::vector<std::int32_t> labels(seg.labels().begin(), seg.labels().end());

  for (;;) {
    std::size_t ncomp = 0;
    const auto comp = detail::label_components(height, width, labels, &ncomp);
    std::vector<std::vector<std::size_t>> members(ncomp);
    for (std::size_t p = 0; p < comp.size(); ++p) members[static_cast<std::size_t>(comp[p])].push_back(p);

    std::vector<std::size_t> small;
    for (std::size_t i = 0; i < ncomp; ++i) {
      if (members[i].size() < min_size && members[i].size() < labels.size()) small.push_back(i);
    }
    if (small.empty()) break;
    std::stable_sort(small.begin(), small.end(), [&](std::size_t a, std::size_t b) {
      return members[a].size() < members[b].size();
    });

    bool merged_any = false;
    for (std::size_t ci : small) {
      const std::int32_t own = labels[members[ci].front()];
      std::map<std::int32_t, std::size_t> shared;
      bool grew = false;
      for (std::size_t p : members[ci]) {
        const std::size_t r = p / width, c = p % width;
        for (int k = 0; k < 4; ++k) {
          const auto nr = static_cast<std::ptrdiff_t>(r) + detail::kRowStep[k];
          const auto nc = static_cast<std::ptrdiff_t>(c) + detail::kColStep[k];
          if (nr < 0 || nc < 0 || nr >= static_cast<std::ptrdiff_t>(height) ||
              nc >= static_cast<std::ptrdiff_t>(width)) {
            continue;
          }
          const std::size_t q = static_cast<std::size_t>(nr) * width + static_cast<std::size_t>(nc);
          if (comp[q] == static_cast<std::int32_t>(ci)) continue;
          if (labels[q] == own) {
            grew = true;  // absorbed a neighbour earlier this round
          } else {
            ++shared[labels[q]];
          }
        }
      }
      if (grew || shared.empty()) continue;
      std::int32_t target = shared.begin()->first;
      std::size_t best = shared.begin()->second;
      for (const auto& [label, edges] : shared) {
        if (edges > best) {
          best = edges;
          target = label;
        }
      }
      for (std::size_t p : members[ci]) labels[p] = target;
      merged_any = true;
    }
    if (!merged_any) break;
  }

  const auto comp = detail::label_components(height, width, labels);
  return SegmentMap::canonical(height, width, comp);
}

/// Default minimum component size: ceil(S^2 / 4) with S^2 = H W / n.
inline std::size_t default_min_segment_size(std::size_t height, std::size_t width, std::size_t n) {
  const std::size_t denom = 4 * n;
  return std::max<std::size_t>(1, (height * width + denom - 1) / denom);
}

/// SLIC-style clustering with similarity max(0, d_color + alpha * d_space),
/// d_color the euclidean LAB distance and d_space the euclidean pixel
/// distance, both unnormalized. Candidates for a pixel are the clusters whose
/// centre lies within S (= sqrt(H W / n)) along each axis; pixels with no
/// candidate go to the spatially nearest centre. Ties pick the lower cluster
/// index. Empty clusters are dropped, so segment_count() <= n before
/// connectivity enforcement; split components may add segments after it.
inline SegmentMap slic(const LabTensor& lab, const SlicParams& params) {
  const std::size_t height = lab.height(), width = lab.width();
  if (params.kmeans_iters < 1) throw Error(ErrorCode::kOutOfRange, "kmeans_iters must be >= 1");
  const std::size_t n = params.max_segments;
  const auto seeds = seed_grid(height, width, n);
  const double step = std::sqrt(static_cast<double>(height * width) / static_cast<double>(n));

  struct Cluster {
    double l, a, b, row, col;
  };
  std::vector<Cluster> clusters;
  clusters.reserve(seeds.size());
  for (const auto& s : seeds) {
    const auto r = std::min(height - 1, static_cast<std::size_t>(s.row));
    const auto c = std::min(width - 1, static_cast<std::size_t>(s.col));
    const auto& px = lab.at(r, c);
    clusters.push_back({px[0], px[1], px[2], s.row, s.col});
  }

  const std::size_t npix = height * width;
  std::vector<std::int32_t> assign(npix, -1);
  std::vector<double> best(npix);
  constexpr double kInf = std::numeric_limits<double>::infinity();

  for (std::size_t iter = 0; iter < params.kmeans_iters; ++iter) {
    std::fill(assign.begin(), assign.end(), -1);
    std::fill(best.begin(), best.end(), kInf);
    for (std::size_t k = 0; k < clusters.size(); ++k) {
      const Cluster& cl = clusters[k];
      // pixel centre r + 0.5 within [row - S, row + S]
      const double r_lo = std::ceil(cl.row - step - 0.5);
      const double r_hi = std::floor(cl.row + step - 0.5);
      const double c_lo = std::ceil(cl.col - step - 0.5);
      const double c_hi = std::floor(cl.col + step - 0.5);
      const auto r0 = static_cast<std::ptrdiff_t>(std::max(0.0, r_lo));
      const auto r1 = static_cast<std::ptrdiff_t>(std::min<double>(height - 1.0, r_hi));
      const auto c0 = static_cast<std::ptrdiff_t>(std::max(0.0, c_lo));
      const auto c1 = static_cast<std::ptrdiff_t>(std::min<double>(width - 1.0, c_hi));
      for (std::ptrdiff_t r = r0; r <= r1; ++r) {
        const double dr = r + 0.5 - cl.row;
        for (std::ptrdiff_t c = c0; c <= c1; ++c) {
          const std::size_t p = static_cast<std::size_t>(r) * width + static_cast<std::size_t>(c);
          const auto& px = lab[p];
          const double dl = px[0] - cl.l, da = px[1] - cl.a, db = px[2] - cl.b;
          const double dc = c + 0.5 - cl.col;
          const double sim = std::max(
              0.0, std::sqrt(dl * dl + da * da + db * db) + params.alpha * std::sqrt(dr * dr + dc * dc));
          if (sim < best[p]) {
            best[p] = sim;
            assign[p] = static_cast<std::int32_t>(k);
          }
        }
      }
    }
    for (std::size_t p = 0; p < npix; ++p) {
      if (assign[p] >= 0) continue;
      const double pr = static_cast<double>(p / width) + 0.5;
      const double pc = static_cast<double>(p % width) + 0.5;
      double nearest = kInf;
      for (std::size_t k = 0; k < clusters.size(); ++k) {
        const double dr = pr - clusters[k].row, dc = pc - clusters[k].col;
        const double d = dr * dr + dc * dc;
        if (d < nearest) {
          nearest = d;
          assign[p] = static_cast<std::int32_t>(k);
        }
      }
    }

    std::vector<Cluster> sums(clusters.size(), Cluster{0, 0, 0, 0, 0});
    std::vector<std::size_t> counts(clusters.size(), 0);
    for (std::size_t p = 0; p < npix; ++p) {
      const auto k = static_cast<std::size_t>(assign[p]);
      const auto& px = lab[p];
      sums[k].l += px[0];
      sums[k].a += px[1];
      sums[k].b += px[2];
      sums[k].row += static_cast<double>(p / width) + 0.5;
      sums[k].col += static_cast<double>(p % width) + 0.5;
      ++counts[k];
    }
    for (std::size_t k = 0; k < clusters.size(); ++k) {
      if (counts[k] == 0) continue;
      const double inv = 1.0 / static_cast<double>(counts[k]);
      clusters[k] = {sums[k].l * inv, sums[k].a * inv, sums[k].b * inv, sums[k].row * inv,
                     sums[k].col * inv};
    }
  }

  auto seg = SegmentMap::canonical(height, width, assign);
  if (params.enforce_connectivity) {
    seg = enforce_connectivity(seg, default_min_segment_size(height, width, n));
  }
  return seg;
}

/// Image entry point; 1-channel images are segmented as neutral gray.
inline SegmentMap slic(const ImageTensor& img, const SlicParams& params) {
  return slic(image_to_lab(img), params);
}

inline void save_segment_map(const SegmentMap& seg, const std::filesystem::path& path) {
  RawTensor t;
  t.shape = {seg.height(), seg.width()};
  t.values = std::vector<std::int32_t>(seg.labels().begin(), seg.labels().end());
  save_raw_tensor(t, path);
}

inline SegmentMap load_segment_map(const std::filesystem::path& path) {
  const RawTensor t = load_raw_tensor_any(path);
  if (t.is_f32() || t.shape.size() != 2) {
    throw Error(ErrorCode::kShape, "segment map rtf must be i32 with shape [H,W]");
  }
  return SegmentMap(t.shape[0], t.shape[1], std::get<std::vector<std::int32_t>>(t.values));
}

}  // namespace pxattack

#endif  // PXATTACK_SUPERPIXEL_HPP_
