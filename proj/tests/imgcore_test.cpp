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


#include <gtest/gtest.h>
#include <zlib.h>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "pxattack/error.hpp"
#include "pxattack/image.hpp"
#include "pxattack/png.hpp"
#include "pxattack/rtf.hpp"
#include "test_util.hpp"

namespace pxattack {
namespace {

// Minimal PNG encoder built directly on zlib, so the decoder under test is
// checked against bytes it did not produce.
void put_u32(std::string& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<char>((v >> s) & 0xff));
}

void put_chunk(std::string& out, const char* type, const std::string& body) {
  put_u32(out, static_cast<std::uint32_t>(body.size()));
  std::string tagged = std::string(type, 4) + body;
  out += tagged;
  put_u32(out, static_cast<std::uint32_t>(
                   crc32(0, reinterpret_cast<const Bytef*>(tagged.data()), static_cast<uInt>(tagged.size()))));
}

std::string make_png(std::uint32_t w, std::uint32_t h, int depth, int color_type,
                     const std::vector<std::uint16_t>& samples) {
  const int per_pixel = color_type == 2 ? 3 : color_type == 6 ? 4 : color_type == 0 ? 1 : 2;
  std::string raw;
  std::size_t i = 0;
  for (std::uint32_t r = 0; r < h; ++r) {
    raw.push_back(0);
    for (std::uint32_t c = 0; c < w * static_cast<std::uint32_t>(per_pixel); ++c) {
      const auto v = samples[i++];
      if (depth == 16) raw.push_back(static_cast<char>(v >> 8));
      raw.push_back(static_cast<char>(v & 0xff));
    }
  }
  uLongf packed_len = compressBound(static_cast<uLong>(raw.size()));
  std::string packed(packed_len, '\0');
  compress(reinterpret_cast<Bytef*>(packed.data()), &packed_len,
           reinterpret_cast<const Bytef*>(raw.data()), static_cast<uLong>(raw.size()));
  packed.resize(packed_len);

  std::string out = "\x89PNG\r\n\x1a\n";
  std::string ihdr;
  put_u32(ihdr, w);
  put_u32(ihdr, h);
  ihdr.push_back(static_cast<char>(depth));
  ihdr.push_back(static_cast<char>(color_type));
  ihdr.append(3, '\0');
  put_chunk(out, "IHDR", ihdr);
  put_chunk(out, "IDAT", packed);
  put_chunk(out, "IEND", "");
  return out;
}

class ImgcoreFiles : public ::testing::Test {
 protected:
  std::filesystem::path write(const std::string& name, const std::string& bytes) {
    auto p = dir_.path() / name;
    std::ofstream(p, std::ios::binary) << bytes;
    return p;
  }
  test::TempDir dir_{"imgcore"};
};

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::kIo;
}

TEST_F(ImgcoreFiles, WhitePixelIsOne) {
  const auto img = load_png(write("w.png", make_png(1, 1, 8, 2, {255, 255, 255})));
  EXPECT_EQ(img.shape(), (Shape{1, 1, 3}));
  for (double v : img.data()) EXPECT_EQ(v, 1.0);
}

TEST_F(ImgcoreFiles, BlackPixelIsZero) {
  const auto img = load_png(write("b.png", make_png(1, 1, 8, 2, {0, 0, 0})));
  for (double v : img.data()) EXPECT_EQ(v, 0.0);
}

TEST_F(ImgcoreFiles, SixteenBitDividesByMax) {
  const auto img = load_png(write("s.png", make_png(2, 1, 16, 2, {65535, 0, 32768, 1, 2, 3})));
  EXPECT_EQ(img.shape(), (Shape{1, 2, 3}));
  EXPECT_EQ(img.at(0, 0, 0), 1.0);
  EXPECT_EQ(img.at(0, 0, 2), 32768.0 / 65535.0);
  EXPECT_EQ(img.at(0, 1, 2), 3.0 / 65535.0);
}

TEST_F(ImgcoreFiles, AlphaIsDropped) {
  const auto img = load_png(write("a.png", make_png(1, 2, 8, 6, {10, 20, 30, 0, 40, 50, 60, 128})));
  EXPECT_EQ(img.shape(), (Shape{2, 1, 3}));
  EXPECT_EQ(img.at(0, 0, 0), 10.0 / 255.0);
  EXPECT_EQ(img.at(1, 0, 2), 60.0 / 255.0);
}

TEST_F(ImgcoreFiles, GrayIsUnsupported) {
  auto p = write("g.png", make_png(1, 1, 8, 0, {7}));
  EXPECT_EQ(code_of([&] { load_png(p); }), ErrorCode::kUnsupportedFormat);
}

TEST_F(ImgcoreFiles, MissingAndCorruptAreDistinct) {
  EXPECT_EQ(code_of([&] { load_png(dir_.path() / "nope.png"); }), ErrorCode::kIo);
  auto bad = write("bad.png", "not a png at all");
  EXPECT_EQ(code_of([&] { load_png(bad); }), ErrorCode::kMalformed);
  auto good = make_png(2, 2, 8, 2, std::vector<std::uint16_t>(12, 9));
  auto cut = write("cut.png", good.substr(0, good.size() - 20));
  EXPECT_EQ(code_of([&] { load_png(cut); }), ErrorCode::kMalformed);
}

TEST(Imgcore, KnownPngFixture) {
  // Table decoded with an independent reader when the fixture was written.
  const std::uint8_t table[2][2][3] = {{{255, 0, 0}, {0, 255, 0}}, {{0, 0, 255}, {12, 200, 77}}};
  const auto img = load_png(test::fixture("imgcore/known_2x2.png"));
  ASSERT_EQ(img.shape(), (Shape{2, 2, 3}));
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t ch = 0; ch < 3; ++ch) EXPECT_EQ(img.at(r, c, ch), table[r][c][ch] / 255.0);
}

TEST(Imgcore, LabReferencePoints) {
  const auto white = srgb_pixel_to_lab(1, 1, 1);
  EXPECT_NEAR(white[0], 100.0, 1e-9);
  EXPECT_NEAR(white[1], 0.0, 1e-9);
  EXPECT_NEAR(white[2], 0.0, 1e-9);
  const auto black = srgb_pixel_to_lab(0, 0, 0);
  for (double v : black) EXPECT_NEAR(v, 0.0, 1e-12);
  const auto gray = srgb_pixel_to_lab(0.5, 0.5, 0.5);
  EXPECT_NEAR(gray[0], 53.38896474111432, 1e-9);
  EXPECT_NEAR(gray[1], 0.0, 1e-9);
  EXPECT_NEAR(gray[2], 0.0, 1e-9);
  const auto red = srgb_pixel_to_lab(1, 0, 0);
  EXPECT_NEAR(red[0], 53.24079183328088, 1e-9);
  EXPECT_NEAR(red[1], 80.09246954480042, 1e-9);
  EXPECT_NEAR(red[2], 67.20319253649727, 1e-9);
  const auto mixed = srgb_pixel_to_lab(0.2, 0.6, 0.9);
  EXPECT_NEAR(mixed[0], 60.92973190824277, 1e-9);
  EXPECT_NEAR(mixed[1], -3.0568385039733137, 1e-9);
  EXPECT_NEAR(mixed[2], -46.84190034989966, 1e-9);
}

TEST(Imgcore, NeutralGraysAreNeutralAndMonotone) {
  double prev = -1.0;
  for (int i = 0; i <= 1000; ++i) {
    const double g = i / 1000.0;
    const auto lab = srgb_pixel_to_lab(g, g, g);
    EXPECT_NEAR(lab[1], 0.0, 1e-9) << g;
    EXPECT_NEAR(lab[2], 0.0, 1e-9) << g;
    EXPECT_GT(lab[0], prev) << g;
    prev = lab[0];
  }
}

TEST(Imgcore, LabRequiresThreeChannels) {
  const auto img = ImageTensor::filled({2, 2, 1}, 0.5);
  EXPECT_EQ(code_of([&] { srgb_to_lab(img); }), ErrorCode::kShape);
  const auto lab = srgb_to_lab(ImageTensor::filled({2, 3, 3}, 0.5));
  EXPECT_EQ(lab.height(), 2u);
  EXPECT_EQ(lab.width(), 3u);
}

TEST(Imgcore, TensorRejectsOutOfRange) {
  EXPECT_EQ(code_of([] { ImageTensor({1, 1, 1}, {1.5}); }), ErrorCode::kOutOfRange);
  EXPECT_EQ(code_of([] { ImageTensor({1, 1, 1}, {std::nan("")}); }), ErrorCode::kOutOfRange);
  EXPECT_EQ(code_of([] { ImageTensor({1, 1, 2}, {0.5}); }), ErrorCode::kShape);
}

TEST_F(ImgcoreFiles, RawTensorRoundTripProperty) {
  Rng rng(7);
  for (int trial = 0; trial < 40; ++trial) {
    const Shape s{1 + uniform_index(rng, 9), 1 + uniform_index(rng, 9), 1 + uniform_index(rng, 4)};
    auto img = test::random_image(s, rng);
    // Quantize to f32 first so the file payload represents the values exactly.
    std::vector<double> v(img.data().begin(), img.data().end());
    for (auto& x : v) x = static_cast<float>(x);
    img = ImageTensor(s, v);
    const auto p = dir_.path() / "t.rtf";
    save_raw_tensor(img, p);
    const auto bytes = detail::read_file(p);
    const auto back = load_raw_tensor(p);
    EXPECT_EQ(back, img);
    save_raw_tensor(back, p);
    EXPECT_EQ(detail::read_file(p), bytes);
  }
}

TEST_F(ImgcoreFiles, PayloadLengthMismatch) {
  const std::string header = "{\"shape\":[2,2,3],\"dtype\":\"f32\"}\n";
  auto p47 = write("short.rtf", header + std::string(47, '\0'));
  EXPECT_EQ(code_of([&] { load_raw_tensor(p47); }), ErrorCode::kPayloadLength);
  auto p49 = write("long.rtf", header + std::string(49, '\0'));
  EXPECT_EQ(code_of([&] { load_raw_tensor(p49); }), ErrorCode::kPayloadLength);
  auto ok = write("ok.rtf", header + std::string(48, '\0'));
  EXPECT_EQ(load_raw_tensor(ok), ImageTensor::filled({2, 2, 3}, 0.0));
}

TEST_F(ImgcoreFiles, MalformedHeaders) {
  for (const std::string bad : {"no newline", "{not json}\n", "{\"shape\":[2],\"dtype\":\"f64\"}\n",
                                "{\"dtype\":\"f32\"}\n", "{\"shape\":[],\"dtype\":\"f32\"}\n"}) {
    auto p = write("m.rtf", bad);
    EXPECT_EQ(code_of([&] { load_raw_tensor_any(p); }), ErrorCode::kMalformed) << bad;
  }
}

TEST(Imgcore, KnownRawFixture) {
  const auto img = load_raw_tensor(test::fixture("imgcore/known_1x2x3.rtf"));
  ASSERT_EQ(img.shape(), (Shape{1, 2, 3}));
  const double expect[] = {0.0, 0.25, 0.5, 0.75, 1.0, 0.125};
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(img.data()[i], expect[i]);
}

TEST(Imgcore, LoadImageDispatchesOnExtension) {
  EXPECT_EQ(load_image(test::fixture("imgcore/known_1x2x3.rtf")).shape(), (Shape{1, 2, 3}));
  EXPECT_EQ(load_image(test::fixture("imgcore/known_2x2.png")).shape(), (Shape{2, 2, 3}));
}

}  // namespace
}  // namespace pxattack
