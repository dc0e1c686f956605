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


#ifndef PXATTACK_PROTOCOL_HPP_
#define PXATTACK_PROTOCOL_HPP_

// Line-delimited JSON protocol between an attack and an external model:
//   request:  {"id":<uint64>,"shape":[H,W,C],"data":"<base64 LE f32 row-major>"}\n
//   response: {"id":<same>,"probs":[p1,...,pY]}\n
//   error:    {"id":<same>,"error":"<message>"}\n

#include <openssl/evp.h>

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pxattack/error.hpp"
#include "pxattack/image.hpp"
#include "pxattack/rtf.hpp"

namespace pxattack::protocol {

inline std::string base64_encode(const std::string& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

inline std::string base64_decode(const std::string& text) {
  if (text.size() % 4 != 0) throw Error(ErrorCode::kProtocol, "base64 length not a multiple of 4");
  std::string out(3 * (text.size() / 4), '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw Error(ErrorCode::kProtocol, "invalid base64 payload");
  // EVP_DecodeBlock keeps the zero bytes implied by '=' padding.
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

struct Request {
  std::uint64_t id = 0;
  Shape shape;
  std::vector<float> data;
};

struct Response {
  std::uint64_t id = 0;
  std::optional<std::vector<double>> probs;
  std::optional<std::string> error;
};

inline std::string encode_request(std::uint64_t id, const ImageTensor& image) {
  std::string raw;
  raw.reserve(4 * image.data().size());
  for (double v : image.data()) detail::append_le(raw, static_cast<float>(v));
  nlohmann::ordered_json j;
  j["id"] = id;
  j["shape"] = {image.height(), image.width(), image.channels()};
  j["data"] = base64_encode(raw);
  return j.dump() + "\n";
}

namespace detail {

inline std::uint64_t message_id(const nlohmann::json& j) {
  const auto& id = j.at("id");
  if (!id.is_number_unsigned()) throw Error(ErrorCode::kProtocol, "message id must be an unsigned integer");
  return id.get<std::uint64_t>();
}

}  // namespace detail

inline Request decode_request(const std::string& line) {
  Request req;
  try {
    const auto j = nlohmann::json::parse(line);
    req.id = detail::message_id(j);
    const auto shape = j.at("shape").get<std::vector<std::size_t>>();
    if (shape.size() != 3) throw Error(ErrorCode::kProtocol, "shape must be [H,W,C]");
    req.shape = Shape{shape[0], shape[1], shape[2]};
    const std::string raw = base64_decode(j.at("data").get<std::string>());
    if (raw.size() != 4 * req.shape.size()) {
      throw Error(ErrorCode::kProtocol, "request " + std::to_string(req.id) + " carries " +
                                            std::to_string(raw.size()) + " bytes for shape " +
                                            to_string(req.shape));
    }
    req.data.resize(req.shape.size());
    for (std::size_t i = 0; i < req.data.size(); ++i) req.data[i] = pxattack::detail::read_le<float>(raw.data() + 4 * i);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kProtocol, std::string("malformed request: ") + e.what());
  }
  return req;
}

inline ImageTensor request_image(const Request& req) {
  return ImageTensor(req.shape, std::vector<double>(req.data.begin(), req.data.end()));
}

inline std::string encode_response(std::uint64_t id, const std::vector<double>& probs) {
  nlohmann::ordered_json j;
  j["id"] = id;
  j["probs"] = probs;
  return j.dump() + "\n";
}

inline std::string encode_error(std::uint64_t id, const std::string& message) {
  nlohmann::ordered_json j;
  j["id"] = id;
  j["error"] = message;
  return j.dump() + "\n";
}

inline Response decode_response(const std::string& line) {
  Response r;
  try {
    const auto j = nlohmann::json::parse(line);
    r.id = detail::message_id(j);
    if (j.contains("error")) {
      r.error = j["error"].is_string() ? j["error"].get<std::string>() : j["error"].dump();
    } else {
      std::vector<double> probs;
      for (const auto& v : j.at("probs")) {
        // JSON has no NaN/Inf; servers emit null for them.
        probs.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
      }
      r.probs = std::move(probs);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kProtocol, std::string("malformed response: ") + e.what());
  }
  return r;
}

}  // namespace pxattack::protocol

#endif  // PXATTACK_PROTOCOL_HPP_
