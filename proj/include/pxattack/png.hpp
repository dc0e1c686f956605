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


#ifndef PXATTACK_PNG_HPP_
#define PXATTACK_PNG_HPP_

#include <png.h>

#include <csetjmp>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "pxattack/error.hpp"
#include "pxattack/image.hpp"
#include "pxattack/rtf.hpp"

namespace pxattack {

namespace detail {

struct PngMemoryReader {
  const unsigned char* data;
  std::size_t size;
  std::size_t offset;
};

inline void png_read_from_memory(png_structp png, png_bytep out, png_size_t len) {
  auto* src = static_cast<PngMemoryReader*>(png_get_io_ptr(png));
  if (src->offset + len > src->size) png_error(png, "unexpected end of data");
  std::memcpy(out, src->data + src->offset, len);
  src->offset += len;
}

struct PngDecoded {
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int bit_depth = 0;
  int color_type = 0;
  std::vector<unsigned char> pixels;  // raw rows, big-endian for 16-bit
  std::size_t row_bytes = 0;
};

// Returns an empty string on success, otherwise the libpng message. Kept free
// of non-trivially-destructible locals between setjmp and longjmp.
inline std::string decode_png_rows(const std::string& bytes, PngDecoded& out) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) return "png_create_read_struct failed";
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return "png_create_info_struct failed";
  }
  PngMemoryReader reader{reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), 0};
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return "corrupt PNG data";
  }
  png_set_read_fn(png, &reader, png_read_from_memory);
  png_read_info(png, info);
  out.width = png_get_image_width(png, info);
  out.height = png_get_image_height(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  out.color_type = png_get_color_type(png, info);
  if ((out.color_type != PNG_COLOR_TYPE_RGB && out.color_type != PNG_COLOR_TYPE_RGB_ALPHA) ||
      (out.bit_depth != 8 && out.bit_depth != 16)) {
    png_destroy_read_struct(&png, &info, nullptr);
    return {};
  }
  if (png_get_interlace_type(png, info) != PNG_INTERLACE_NONE) {
    png_set_interlace_handling(png);
  }
  png_read_update_info(png, info);
  out.row_bytes = png_get_rowbytes(png, info);
  out.pixels.resize(out.row_bytes * out.height);
  rows.resize(out.height);
  for (png_uint_32 r = 0; r < out.height; ++r) rows[r] = out.pixels.data() + r * out.row_bytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return {};
}

}  // namespace detail

/// Loads an 8- or 16-bit RGB/RGBA PNG. Alpha is dropped; the result has C = 3.
/// Errors: kIo (unreadable), kMalformed (not a PNG / corrupt),
/// kUnsupportedFormat (gray, palette, or other bit depths).
inline ImageTensor load_png(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file(path);
  if (bytes.size() < 8 ||
      png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0) {
    throw Error(ErrorCode::kMalformed, path.string() + " is not a PNG file");
  }
  detail::PngDecoded decoded;
  if (auto msg = detail::decode_png_rows(bytes, decoded); !msg.empty()) {
    throw Error(ErrorCode::kMalformed, path.string() + ": " + msg);
  }
  if (decoded.pixels.empty()) {
    throw Error(ErrorCode::kUnsupportedFormat,
                path.string() + ": color type " + std::to_string(decoded.color_type) +
                    " at bit depth " + std::to_string(decoded.bit_depth) +
                    " (need 8/16-bit RGB or RGBA)");
  }
  const std::size_t src_channels = decoded.color_type == PNG_COLOR_TYPE_RGB ? 3 : 4;
  const bool wide = decoded.bit_depth == 16;
  const double max_value = wide ? 65535.0 : 255.0;
  Shape shape{decoded.height, decoded.width, 3};
  std::vector<double> data(shape.size());
  for (std::size_t r = 0; r < shape.height; ++r) {
    const unsigned char* row = decoded.pixels.data() + r * decoded.row_bytes;
    for (std::size_t c = 0; c < shape.width; ++c) {
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const std::size_t sample = c * src_channels + ch;
        const unsigned value =
            wide ? (unsigned{row[2 * sample]} << 8) | row[2 * sample + 1] : row[sample];
        data[(r * shape.width + c) * 3 + ch] = value / max_value;
      }
    }
  }
  return ImageTensor(shape, std::move(data));
}

/// Dispatches on extension: ".rtf" loads a raw tensor, anything else a PNG.
inline ImageTensor load_image(const std::filesystem::path& path) {
  if (path.extension() == ".rtf") return load_raw_tensor(path);
  return load_png(path);
}

}  // namespace pxattack

#endif  // PXATTACK_PNG_HPP_
