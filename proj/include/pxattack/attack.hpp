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


#ifndef PXATTACK_ATTACK_HPP_
#define PXATTACK_ATTACK_HPP_

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pxattack/classifier.hpp"
#include "pxattack/error.hpp"
#include "pxattack/image.hpp"
#include "pxattack/rng.hpp"
#include "pxattack/superpixel.hpp"

namespace pxattack {

enum class LossKind { kCw, kCrossEntropy };

/// max_{i != label} p_i - p_label. `label` is a 0-based class index.
inline double cw_loss(std::span<const double> probs, std::size_t label) {
  if (probs.size() < 2) throw Error(ErrorCode::kOutOfRange, "cw_loss needs at least 2 classes");
  if (label >= probs.size()) {
    throw Error(ErrorCode::kOutOfRange, "label " + std::to_string(label) + " out of range for " +
                                            std::to_string(probs.size()) + " classes");
  }
  double other = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (i != label) other = std::max(other, probs[i]);
  }
  return other - probs[label];
}

/// -log p_label, clipped away from log(0).
inline double cross_entropy_loss(std::span<const double> probs, std::size_t label) {
  if (label >= probs.size()) throw Error(ErrorCode::kOutOfRange, "label out of range");
  return -std::log(std::max(probs[label], 1e-300));
}

inline double attack_loss(LossKind kind, std::span<const double> probs, std::size_t label) {
  return kind == LossKind::kCw ? cw_loss(probs, label) : cross_entropy_loss(probs, label);
}

/// Element-wise clamp onto [0, 1]. NaN maps to 0.
inline ImageTensor project(std::span<const double> values, Shape shape) {
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    out[i] = v >= 1.0 ? 1.0 : (v > 0.0 ? v : 0.0);
  }
  return ImageTensor(shape, std::move(out));
}

/// Boundary perturbation epsilon * signs with signs in {-1, +1}.
struct PerturbationState {
  double epsilon = 0.0;
  Shape shape;
  std::vector<std::int8_t> signs;

  static PerturbationState all_plus(Shape shape, double epsilon) {
    return {epsilon, shape, std::vector<std::int8_t>(shape.size(), 1)};
  }

  /// clamp(x_org + epsilon * signs)
  ImageTensor apply(const ImageTensor& x_org) const {
    const auto base = x_org.data();
    std::vector<double> v(base.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = base[i] + epsilon * signs[i];
    return project(v, shape);
  }

  bool operator==(const PerturbationState&) const = default;
};

/// A set of pixels (flat row-major indices) and either one channel or all.
struct UpdateArea {
  std::vector<std::size_t> pixels;
  std::optional<std::size_t> channel;  // nullopt: every channel

  static UpdateArea whole(const Shape& shape) {
    UpdateArea a;
    a.pixels.resize(shape.pixels());
    for (std::size_t p = 0; p < a.pixels.size(); ++p) a.pixels[p] = p;
    return a;
  }

  bool operator==(const UpdateArea&) const = default;
};

inline void flip_in_place(PerturbationState& state, const UpdateArea& area) {
  const std::size_t channels = state.shape.channels;
  if (area.pixels.empty()) throw Error(ErrorCode::kOutOfRange, "update area is empty");
  if (area.channel && *area.channel >= channels) {
    throw Error(ErrorCode::kOutOfRange, "update area channel out of range");
  }
  for (std::size_t p : area.pixels) {
    if (p >= state.shape.pixels()) throw Error(ErrorCode::kOutOfRange, "update area pixel out of range");
  }
  for (std::size_t p : area.pixels) {
    if (area.channel) {
      state.signs[p * channels + *area.channel] *= -1;
    } else {
      for (std::size_t c = 0; c < channels; ++c) state.signs[p * channels + c] *= -1;
    }
  }
}

/// Copy of `state` with signs negated exactly on the area.
inline PerturbationState flip(const PerturbationState& state, const UpdateArea& area) {
  PerturbationState out = state;
  flip_in_place(out, area);
  return out;
}

/// Segment budget n -> segmentation of the original image.
using Segmenter = std::function<SegmentMap(std::size_t n)>;

/// Pending update areas plus the current segment budget n.
class AreaQueue {
 public:
  explicit AreaQueue(std::size_t initial_n = 1) : current_n_(initial_n) {}

  bool empty() const { return pending_.empty(); }
  std::size_t size() const { return pending_.size(); }
  std::size_t current_n() const { return current_n_; }
  const std::vector<UpdateArea>& pending() const { return pending_; }

  void push(UpdateArea area) { pending_.push_back(std::move(area)); }

  /// Removes and returns a uniformly chosen pending area.
  UpdateArea take_random(Rng& rng) {
    if (pending_.empty()) throw Error(ErrorCode::kOutOfRange, "update area queue is empty");
    const auto i = static_cast<std::size_t>(uniform_index(rng, pending_.size()));
    std::swap(pending_[i], pending_.back());
    UpdateArea out = std::move(pending_.back());
    pending_.pop_back();
    return out;
  }

  /// n <- min(n * r, H * W); pending <- segments(n) x channels.
  /// Returns the segmentation used.
  SegmentMap refill(const Shape& shape, std::size_t ratio, const Segmenter& segments) {
    if (!pending_.empty()) throw Error(ErrorCode::kOutOfRange, "refill requires an empty queue");
    current_n_ = std::min(current_n_ * ratio, shape.pixels());
    SegmentMap seg = segments(current_n_);
    auto groups = seg.segment_pixels();
    pending_.reserve(groups.size() * shape.channels);
    for (auto& pixels : groups) {
      for (std::size_t c = 0; c < shape.channels; ++c) pending_.push_back(UpdateArea{pixels, c});
    }
    return seg;
  }

 private:
  std::vector<UpdateArea> pending_;
  std::size_t current_n_;
};

inline UpdateArea next_area(AreaQueue& queue, Rng& rng) { return queue.take_random(rng); }

inline Segmenter slic_segmenter(const ImageTensor& x_org, SlicParams params) {
  auto lab = std::make_shared<const LabTensor>(image_to_lab(x_org));
  return [lab, params](std::size_t n) {
    SlicParams p = params;
    p.max_segments = n;
    return slic(*lab, p);
  };
}

inline SegmentMap refill(AreaQueue& queue, const ImageTensor& x_org, std::size_t ratio,
                         const SlicParams& params) {
  return queue.refill(x_org.shape(), ratio, slic_segmenter(x_org, params));
}

struct IterationRecord {
  std::size_t t = 0;
  double loss = 0.0;       // NaN when the model returned non-finite output
  double best_loss = 0.0;
  bool accepted = false;
  std::size_t queries_used = 0;
};

struct AttackTrace {
  std::vector<IterationRecord> iterations;
  ImageTensor x_best;
  double best_loss = -std::numeric_limits<double>::infinity();
  double best_margin = -std::numeric_limits<double>::infinity();  // CW loss of x_best
  bool success = false;
  std::optional<std::size_t> first_success_iter;
  std::size_t queries = 0;
  std::size_t anomalies = 0;  // candidates rejected for non-finite output
  bool error = false;
  std::string error_message;
  std::vector<std::size_t> budget_schedule;  // n at start and after each refill
  double segmentation_seconds = 0.0;
  double query_seconds = 0.0;
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Query plumbing shared by every attack: projects a candidate, queries the
// model once, and scores the answer.
class CandidateEvaluator {
 public:
  struct Result {
    double loss;    // NaN for non-finite model output
    double margin;  // CW loss, used for the success test
  };

  CandidateEvaluator(Classifier& model, const ImageTensor& x_org, std::size_t label, LossKind loss,
                     AttackTrace& trace)
      : model_(model), x_org_(x_org), label_(label), loss_(loss), trace_(trace) {}

  Result evaluate(const PerturbationState& state) {
    const ImageTensor candidate = state.apply(x_org_);
    const auto start = Clock::now();
    ++trace_.queries;
    std::vector<double> probs = model_.predict(candidate);
    trace_.query_seconds += seconds_since(start);
    if (probs.size() != model_.class_count()) {
      throw Error(ErrorCode::kProtocol, "model returned " + std::to_string(probs.size()) +
                                            " probabilities, expected " +
                                            std::to_string(model_.class_count()));
    }
    const bool finite = std::all_of(probs.begin(), probs.end(), [](double v) { return std::isfinite(v); });
    if (!finite) {
      ++trace_.anomalies;
      const double nan = std::numeric_limits<double>::quiet_NaN();
      return {nan, nan};
    }
    return {attack_loss(loss_, probs, label_), cw_loss(probs, label_)};
  }

 private:
  Classifier& model_;
  const ImageTensor& x_org_;
  std::size_t label_;
  LossKind loss_;
  AttackTrace& trace_;
};

// Common bookkeeping after each query.
inline void record_iteration(AttackTrace& trace, std::size_t t, double loss, bool accepted) {
  trace.iterations.push_back({t, loss, trace.best_loss, accepted, trace.queries});
  if (accepted && trace.best_margin > 0.0 && !trace.first_success_iter) {
    trace.first_success_iter = t;
  }
}

inline void finish_trace(AttackTrace& trace, const ImageTensor& x_org, const PerturbationState& best) {
  trace.x_best = best.apply(x_org);
  trace.success = trace.best_margin > 0.0;
}

}  // namespace detail

struct VersatileSearchConfig {
  double epsilon = 4.0 / 255.0;
  std::size_t max_iters = 1000;
  std::size_t segment_ratio = 4;
  SlicParams slic{};  // max_segments is driven by the schedule
  bool early_stop = true;
  LossKind loss = LossKind::kCw;
};

/// Superpixel Attack's greedy boundary search. Starts from +epsilon
/// everywhere with the whole image as the only pending area; each iteration
/// flips one randomly drawn pending area of the best perturbation, queries
/// the model once and keeps the flip when the loss does not decrease. When
/// the pending set runs out the segment budget grows by `segment_ratio` and
/// the original image is re-segmented, one area per segment and channel.
///
/// `label` is 0-based. If `segments` is empty, SLIC with `config.slic` on
/// x_org is used. Model failures end the run with `error` set and the
/// partial result kept.
inline AttackTrace versatile_search(Classifier& model, const ImageTensor& x_org, std::size_t label,
                                    const VersatileSearchConfig& config, Rng& rng,
                                    Segmenter segments = {}) {
  if (config.segment_ratio < 1) throw Error(ErrorCode::kOutOfRange, "segment ratio must be >= 1");
  if (!segments) segments = slic_segmenter(x_org, config.slic);
  const Shape shape = x_org.shape();

  AttackTrace trace;
  PerturbationState best = PerturbationState::all_plus(shape, config.epsilon);
  AreaQueue queue(1);
  queue.push(UpdateArea::whole(shape));
  trace.budget_schedule.push_back(queue.current_n());
  detail::CandidateEvaluator evaluator(model, x_org, label, config.loss, trace);

  for (std::size_t t = 1; t <= config.max_iters; ++t) {
    if (queue.empty()) {
      const auto start = detail::Clock::now();
      queue.refill(shape, config.segment_ratio, segments);
      trace.segmentation_seconds += detail::seconds_since(start);
      trace.budget_schedule.push_back(queue.current_n());
    }
    const UpdateArea area = next_area(queue, rng);
    PerturbationState candidate = best;
    flip_in_place(candidate, area);

    detail::CandidateEvaluator::Result r;
    try {
      r = evaluator.evaluate(candidate);
    } catch (const std::exception& e) {
      trace.error = true;
      trace.error_message = e.what();
      break;
    }
    const bool accepted = !std::isnan(r.loss) && r.loss >= trace.best_loss;
    if (accepted) {
      trace.best_loss = r.loss;
      trace.best_margin = r.margin;
      best = std::move(candidate);
    }
    detail::record_iteration(trace, t, r.loss, accepted);
    if (config.early_stop && trace.best_margin > 0.0) break;
  }
  detail::finish_trace(trace, x_org, best);
  return trace;
}

}  // namespace pxattack

#endif  // PXATTACK_ATTACK_HPP_
