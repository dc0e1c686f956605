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


#ifndef PXATTACK_RTF_HPP_
#define PXATTACK_RTF_HPP_

// Raw tensor format: a one-line JSON header
//   {"shape":[d0,d1,...],"dtype":"f32"|"i32"}\n
// followed by prod(shape) little-endian 4-byte elements, row-major, and
// nothing else.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "pxattack/error.hpp"
#include "pxattack/image.hpp"

namespace pxattack {

struct RawTensor {
  std::vector<std::size_t> shape;
  std::variant<std::vector<float>, std::vector<std::int32_t>> values;

  std::size_t element_count() const {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }
  bool is_f32() const { return values.index() == 0; }
};

namespace detail {

template <typename T>
void append_le(std::string& out, T value) {
  static_assert(sizeof(T) == 4);
  auto bits = std::bit_cast<std::uint32_t>(value);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
  char buf[4];
  std::memcpy(buf, &bits, 4);
  out.append(buf, 4);
}

template <typename T>
T read_le(const char* p) {
  std::uint32_t bits;
  std::memcpy(&bits, p, 4);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
  return std::bit_cast<T>(bits);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "short write to " + path.string());
}

}  // namespace detail

inline std::string encode_rtf(const RawTensor& t) {
  nlohmann::ordered_json header;
  header["shape"] = t.shape;
  header["dtype"] = t.is_f32() ? "f32" : "i32";
  std::string out = header.dump();
  out.push_back('\n');
  std::visit(
      [&](const auto& vals) {
        if (vals.size() != t.element_count()) {
          throw Error(ErrorCode::kShape, "tensor values do not match its shape");
        }
        out.reserve(out.size() + 4 * vals.size());
        for (auto v : vals) detail::append_le(out, v);
      },
      t.values);
  return out;
}

inline RawTensor decode_rtf(const std::string& bytes) {
  const auto newline = bytes.find('\n');
  if (newline == std::string::npos) {
    throw Error(ErrorCode::kMalformed, "rtf header is not newline-terminated");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(0, newline));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformed, std::string("rtf header: ") + e.what());
  }
  if (!header.is_object() || !header.contains("shape") || !header.contains("dtype") ||
      !header["shape"].is_array() || !header["dtype"].is_string()) {
    throw Error(ErrorCode::kMalformed, "rtf header needs shape and dtype");
  }
  RawTensor t;
  for (const auto& d : header["shape"]) {
    if (!d.is_number_integer() || d.get<std::int64_t>() <= 0) {
      throw Error(ErrorCode::kMalformed, "rtf shape entries must be positive integers");
    }
    t.shape.push_back(d.get<std::size_t>());
  }
  if (t.shape.empty()) throw Error(ErrorCode::kMalformed, "rtf shape is empty");
  const auto dtype = header["dtype"].get<std::string>();
  if (dtype != "f32" && dtype != "i32") throw Error(ErrorCode::kMalformed, "unknown rtf dtype " + dtype);
  const std::size_t count = t.element_count();
  const std::size_t payload = bytes.size() - newline - 1;
  if (payload != 4 * count) {
    throw Error(ErrorCode::kPayloadLength,
                "rtf payload has " + std::to_string(payload) + " bytes, expected " +
                    std::to_string(4 * count));
  }
  const char* p = bytes.data() + newline + 1;
  if (dtype == "f32") {
    std::vector<float> v(count);
    for (std::size_t i = 0; i < count; ++i) v[i] = detail::read_le<float>(p + 4 * i);
    t.values = std::move(v);
  } else {
    std::vector<std::int32_t> v(count);
    for (std::size_t i = 0; i < count; ++i) v[i] = detail::read_le<std::int32_t>(p + 4 * i);
    t.values = std::move(v);
  }
  return t;
}

inline void save_raw_tensor(const RawTensor& t, const std::filesystem::path& path) {
  detail::write_file(path, encode_rtf(t));
}

inline RawTensor load_raw_tensor_any(const std::filesystem::path& path) {
  return decode_rtf(detail::read_file(path));
}

/// Values are narrowed to f32 on disk.
inline void save_raw_tensor(const ImageTensor& img, const std::filesystem::path& path) {
  RawTensor t;
  t.shape = {img.height(), img.width(), img.channels()};
  std::vector<float> v(img.data().begin(), img.data().end());
  t.values = std::move(v);
  save_raw_tensor(t, path);
}

inline ImageTensor image_from_raw(const RawTensor& t) {
  if (!t.is_f32() || t.shape.size() != 3) {
    throw Error(ErrorCode::kShape, "image rtf must be f32 with shape [H,W,C]");
  }
  const auto& v = std::get<std::vector<float>>(t.values);
  return ImageTensor(Shape{t.shape[0], t.shape[1], t.shape[2]},
                     std::vector<double>(v.begin(), v.end()));
}

inline ImageTensor load_raw_tensor(const std::filesystem::path& path) {
  return image_from_raw(load_raw_tensor_any(path));
}

}  // namespace pxattack

#endif  // PXATTACK_RTF_HPP_
