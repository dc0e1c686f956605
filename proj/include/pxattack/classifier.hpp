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


#ifndef PXATTACK_CLASSIFIER_HPP_
#define PXATTACK_CLASSIFIER_HPP_

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"
#include "pxattack/error.hpp"
#include "pxattack/image.hpp"
#include "pxattack/rtf.hpp"

namespace pxattack {

/// Query-only view of a classifier. Every predict() call counts as exactly
/// one query, whether or not it succeeds.
class Classifier {
 public:
  Classifier() = default;
  // A copy gets its own counter, starting at zero.
  Classifier(const Classifier&) : queries_(0) {}
  Classifier& operator=(const Classifier&) { return *this; }
  virtual ~Classifier() = default;

  std::vector<double> predict(const ImageTensor& x) {
    queries_.fetch_add(1, std::memory_order_relaxed);
    return do_predict(x);
  }

  virtual std::size_t class_count() const = 0;
  std::uint64_t query_count() const { return queries_.load(std::memory_order_relaxed); }

 protected:
  virtual std::vector<double> do_predict(const ImageTensor& x) = 0;

 private:
  std::atomic<std::uint64_t> queries_{0};
};

/// Wraps a callable; handy for tests and adapters.
class FunctionClassifier final : public Classifier {
 public:
  using Fn = std::function<std::vector<double>(const ImageTensor&)>;
  FunctionClassifier(std::size_t classes, Fn fn) : classes_(classes), fn_(std::move(fn)) {}
  std::size_t class_count() const override { return classes_; }

 protected:
  std::vector<double> do_predict(const ImageTensor& x) override { return fn_(x); }

 private:
  std::size_t classes_;
  Fn fn_;
};

inline std::vector<double> softmax(std::span<const double> logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - top);
    total += out[i];
  }
  for (auto& v : out) v /= total;
  return out;
}

/// Index of the largest entry, lowest index on ties.
inline std::size_t argmax(std::span<const double> values) {
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

// ---------------------------------------------------------------------------
// Toy models
// ---------------------------------------------------------------------------

namespace toy {

struct Dense {
  std::size_t out = 0, in = 0;
  std::vector<double> weight;  // [out][in]
  std::vector<double> bias;    // [out]
};

/// Square-kernel convolution over HWC activations.
struct Conv {
  std::size_t out = 0, kernel = 0, in = 0, stride = 1, pad = 0;
  std::vector<double> weight;  // [out][kernel][kernel][in]
  std::vector<double> bias;    // [out]
};

struct Relu {};
struct GlobalAvgPool {};

using Layer = std::variant<Dense, Conv, Relu, GlobalAvgPool>;

}  // namespace toy

/// In-process classifier: a stack of dense / conv / relu / pooling layers
/// followed by softmax. "linear" is one dense layer, "mlp" alternates dense
/// and relu, "cnn" is an explicit layer list.
class ToyModel final : public Classifier {
 public:
  enum class Kind { kLinear, kMlp, kCnn };

  ToyModel(Kind kind, Shape input, std::vector<toy::Layer> layers)
      : kind_(kind), input_(input), layers_(std::move(layers)) {
    classes_ = check_chain();
  }

  static ToyModel linear(Shape input, std::vector<double> weight, std::vector<double> bias) {
    toy::Dense d{bias.size(), input.size(), std::move(weight), std::move(bias)};
    return ToyModel(Kind::kLinear, input, {std::move(d)});
  }

  Kind kind() const { return kind_; }
  const Shape& input_shape() const { return input_; }
  const std::vector<toy::Layer>& layers() const { return layers_; }
  std::size_t class_count() const override { return classes_; }

  std::vector<double> logits(const ImageTensor& x) const {
    if (x.shape() != input_) {
      throw Error(ErrorCode::kShape, "model expects " + to_string(input_) + ", got " +
                                         to_string(x.shape()));
    }
    std::vector<double> act(x.data().begin(), x.data().end());
    Shape cur = input_;
    std::vector<double> next;
    for (const auto& layer : layers_) {
      if (const auto* d = std::get_if<toy::Dense>(&layer)) {
        next.assign(d->out, 0.0);
        for (std::size_t o = 0; o < d->out; ++o) {
          const double* w = d->weight.data() + o * d->in;
          double acc = d->bias[o];
          for (std::size_t i = 0; i < d->in; ++i) acc += w[i] * act[i];
          next[o] = acc;
        }
        cur = Shape{1, 1, d->out};
        act.swap(next);
      } else if (const auto* c = std::get_if<toy::Conv>(&layer)) {
        const Shape out = conv_output(cur, *c);
        next.assign(out.size(), 0.0);
        run_conv(*c, cur, out, act, next);
        cur = out;
        act.swap(next);
      } else if (std::holds_alternative<toy::Relu>(layer)) {
        for (auto& v : act) v = std::max(0.0, v);
      } else {
        next.assign(cur.channels, 0.0);
        for (std::size_t p = 0; p < cur.pixels(); ++p) {
          for (std::size_t ch = 0; ch < cur.channels; ++ch) next[ch] += act[p * cur.channels + ch];
        }
        for (auto& v : next) v /= static_cast<double>(cur.pixels());
        cur = Shape{1, 1, cur.channels};
        act.swap(next);
      }
    }
    return act;
  }

 protected:
  std::vector<double> do_predict(const ImageTensor& x) override { return softmax(logits(x)); }

 private:
  static Shape conv_output(const Shape& in, const toy::Conv& c) {
    const auto extent = [&](std::size_t n) -> std::size_t {
      const std::size_t padded = n + 2 * c.pad;
      if (padded < c.kernel) return 0;
      return (padded - c.kernel) / c.stride + 1;
    };
    return Shape{extent(in.height), extent(in.width), c.out};
  }

  static void run_conv(const toy::Conv& c, const Shape& in, const Shape& out,
                       const std::vector<double>& src, std::vector<double>& dst) {
    const std::size_t k = c.kernel, cin = c.in;
    for (std::size_t oh = 0; oh < out.height; ++oh) {
      for (std::size_t ow = 0; ow < out.width; ++ow) {
        double* acc = dst.data() + (oh * out.width + ow) * c.out;
        for (std::size_t o = 0; o < c.out; ++o) acc[o] = c.bias[o];
        for (std::size_t kh = 0; kh < k; ++kh) {
          const auto ih = static_cast<std::ptrdiff_t>(oh * c.stride + kh) - static_cast<std::ptrdiff_t>(c.pad);
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(in.height)) continue;
          for (std::size_t kw = 0; kw < k; ++kw) {
            const auto iw = static_cast<std::ptrdiff_t>(ow * c.stride + kw) - static_cast<std::ptrdiff_t>(c.pad);
            if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(in.width)) continue;
            const double* x = src.data() + (static_cast<std::size_t>(ih) * in.width + static_cast<std::size_t>(iw)) * cin;
            for (std::size_t o = 0; o < c.out; ++o) {
              const double* w = c.weight.data() + ((o * k + kh) * k + kw) * cin;
              double s = 0.0;
              for (std::size_t i = 0; i < cin; ++i) s += w[i] * x[i];
              acc[o] += s;
            }
          }
        }
      }
    }
  }

  std::size_t check_chain() const {
    if (input_.size() == 0) throw Error(ErrorCode::kShape, "model input shape is empty");
    if (layers_.empty()) throw Error(ErrorCode::kShape, "model has no layers");
    Shape cur = input_;
    bool flat = false;
    for (const auto& layer : layers_) {
      if (const auto* d = std::get_if<toy::Dense>(&layer)) {
        if (d->in != cur.size() || d->weight.size() != d->out * d->in || d->bias.size() != d->out ||
            d->out == 0) {
          throw Error(ErrorCode::kShape, "dense layer does not chain: expects " +
                                             std::to_string(d->in) + " inputs, has " +
                                             std::to_string(cur.size()));
        }
        cur = Shape{1, 1, d->out};
        flat = true;
      } else if (const auto* c = std::get_if<toy::Conv>(&layer)) {
        if (flat || c->in != cur.channels || c->kernel == 0 || c->stride == 0 || c->out == 0 ||
            c->weight.size() != c->out * c->kernel * c->kernel * c->in || c->bias.size() != c->out) {
          throw Error(ErrorCode::kShape, "conv layer does not chain");
        }
        cur = conv_output(cur, *c);
        if (cur.size() == 0) throw Error(ErrorCode::kShape, "conv output is empty");
      } else if (std::holds_alternative<toy::GlobalAvgPool>(layer)) {
        cur = Shape{1, 1, cur.channels};
        flat = true;
      }
    }
    if (cur.size() < 2) throw Error(ErrorCode::kShape, "model must output at least 2 classes");
    return cur.size();
  }

  Kind kind_;
  Shape input_;
  std::vector<toy::Layer> layers_;
  std::size_t classes_ = 0;
};

// ---------------------------------------------------------------------------
// Toy weights format: one JSON header line
//   {"kind":"linear"|"mlp"|"cnn","shapes":[[..],..],"Y":k,"input":[H,W,C]}
// ("cnn" adds "layers":[{"op":"conv","stride":s,"pad":p},{"op":"relu"},
//  {"op":"gap"},{"op":"dense"},...]) then the little-endian f32 tensors
// listed in "shapes", concatenated in order. Dense weights are [out,in],
// conv weights [out,k,k,in]; each is followed by its bias [out].
// ---------------------------------------------------------------------------

namespace detail {

inline std::string_view kind_name(ToyModel::Kind kind) {
  switch (kind) {
    case ToyModel::Kind::kLinear: return "linear";
    case ToyModel::Kind::kMlp: return "mlp";
    case ToyModel::Kind::kCnn: return "cnn";
  }
  return "linear";
}

}  // namespace detail

inline std::string encode_toy_model(const ToyModel& model) {
  nlohmann::ordered_json header;
  header["kind"] = detail::kind_name(model.kind());
  nlohmann::json shapes = nlohmann::json::array();
  nlohmann::json ops = nlohmann::json::array();
  std::string payload;
  const auto put = [&](const std::vector<double>& values) {
    for (double v : values) detail::append_le(payload, static_cast<float>(v));
  };
  for (const auto& layer : model.layers()) {
    if (const auto* d = std::get_if<toy::Dense>(&layer)) {
      shapes.push_back({d->out, d->in});
      shapes.push_back({d->out});
      ops.push_back({{"op", "dense"}});
      put(d->weight);
      put(d->bias);
    } else if (const auto* c = std::get_if<toy::Conv>(&layer)) {
      shapes.push_back({c->out, c->kernel, c->kernel, c->in});
      shapes.push_back({c->out});
      ops.push_back({{"op", "conv"}, {"stride", c->stride}, {"pad", c->pad}});
      put(c->weight);
      put(c->bias);
    } else if (std::holds_alternative<toy::Relu>(layer)) {
      ops.push_back({{"op", "relu"}});
    } else {
      ops.push_back({{"op", "gap"}});
    }
  }
  header["shapes"] = shapes;
  header["Y"] = model.class_count();
  const auto& in = model.input_shape();
  header["input"] = {in.height, in.width, in.channels};
  if (model.kind() == ToyModel::Kind::kCnn) header["layers"] = ops;
  std::string out = header.dump();
  out.push_back('\n');
  out += payload;
  return out;
}

inline ToyModel decode_toy_model(const std::string& bytes) {
  const auto newline = bytes.find('\n');
  if (newline == std::string::npos) throw Error(ErrorCode::kMalformed, "toy model header missing");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(0, newline));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformed, std::string("toy model header: ") + e.what());
  }
  std::vector<std::vector<std::size_t>> shapes;
  std::string kind_str;
  std::size_t declared_classes = 0;
  Shape input;
  try {
    kind_str = header.at("kind").get<std::string>();
    shapes = header.at("shapes").get<std::vector<std::vector<std::size_t>>>();
    declared_classes = header.at("Y").get<std::size_t>();
    const auto in = header.at("input").get<std::vector<std::size_t>>();
    if (in.size() != 3) throw Error(ErrorCode::kMalformed, "input must be [H,W,C]");
    input = Shape{in[0], in[1], in[2]};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformed, std::string("toy model header: ") + e.what());
  }

  std::size_t total = 0;
  for (const auto& s : shapes) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    total += n;
  }
  const std::size_t payload = bytes.size() - newline - 1;
  if (payload != 4 * total) {
    throw Error(ErrorCode::kPayloadLength, "toy model payload has " + std::to_string(payload) +
                                               " bytes, header implies " + std::to_string(4 * total));
  }
  const char* cursor = bytes.data() + newline + 1;
  std::size_t next_shape = 0;
  const auto take = [&](std::size_t rank) {
    if (next_shape >= shapes.size() || shapes[next_shape].size() != rank) {
      throw Error(ErrorCode::kShape, "toy model shapes do not match layer list");
    }
    const auto& s = shapes[next_shape++];
    std::size_t n = 1;
    for (auto d : s) n *= d;
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = detail::read_le<float>(cursor + 4 * i);
    cursor += 4 * n;
    return std::make_pair(s, values);
  };
  const auto take_dense = [&]() {
    auto [ws, w] = take(2);
    auto [bs, b] = take(1);
    if (bs[0] != ws[0]) throw Error(ErrorCode::kShape, "dense bias length mismatch");
    return toy::Dense{ws[0], ws[1], std::move(w), std::move(b)};
  };

  std::vector<toy::Layer> layers;
  ToyModel::Kind kind;
  if (kind_str == "linear" || kind_str == "mlp") {
    kind = kind_str == "linear" ? ToyModel::Kind::kLinear : ToyModel::Kind::kMlp;
    if (shapes.size() % 2 != 0 || shapes.empty()) {
      throw Error(ErrorCode::kShape, "dense models need weight/bias pairs");
    }
    if (kind == ToyModel::Kind::kLinear && shapes.size() != 2) {
      throw Error(ErrorCode::kShape, "linear model has exactly one weight/bias pair");
    }
    while (next_shape < shapes.size()) {
      if (!layers.empty()) layers.emplace_back(toy::Relu{});
      layers.emplace_back(take_dense());
    }
  } else if (kind_str == "cnn") {
    kind = ToyModel::Kind::kCnn;
    if (!header.contains("layers") || !header["layers"].is_array()) {
      throw Error(ErrorCode::kMalformed, "cnn model needs a layers list");
    }
    for (const auto& op : header["layers"]) {
      const auto name = op.value("op", std::string{});
      if (name == "dense") {
        layers.emplace_back(take_dense());
      } else if (name == "conv") {
        auto [ws, w] = take(4);
        auto [bs, b] = take(1);
        if (ws[1] != ws[2] || bs[0] != ws[0]) throw Error(ErrorCode::kShape, "conv shapes invalid");
        layers.emplace_back(toy::Conv{ws[0], ws[1], ws[3], op.value("stride", std::size_t{1}),
                                      op.value("pad", std::size_t{0}), std::move(w), std::move(b)});
      } else if (name == "relu") {
        layers.emplace_back(toy::Relu{});
      } else if (name == "gap") {
        layers.emplace_back(toy::GlobalAvgPool{});
      } else {
        throw Error(ErrorCode::kMalformed, "unknown layer op '" + name + "'");
      }
    }
    if (next_shape != shapes.size()) throw Error(ErrorCode::kShape, "unused tensors in toy model");
  } else {
    throw Error(ErrorCode::kMalformed, "unknown toy model kind '" + kind_str + "'");
  }
  ToyModel model(kind, input, std::move(layers));
  if (model.class_count() != declared_classes) {
    throw Error(ErrorCode::kShape, "toy model outputs " + std::to_string(model.class_count()) +
                                       " classes but header declares Y=" +
                                       std::to_string(declared_classes));
  }
  return model;
}

inline ToyModel load_toy_model(const std::filesystem::path& path) {
  return decode_toy_model(detail::read_file(path));
}

inline void save_toy_model(const ToyModel& model, const std::filesystem::path& path) {
  detail::write_file(path, encode_toy_model(model));
}

}  // namespace pxattack

#endif  // PXATTACK_CLASSIFIER_HPP_
