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

#ifndef PXATTACK_ERROR_HPP_
#define PXATTACK_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace pxattack {

enum class ErrorCode {
  kIo,                // file could not be opened, read or written
  kUnsupportedFormat, // e.g. PNG color type we do not ingest
  kShape,             // tensor shapes disagree or are invalid
  kMalformed,         // header or document does not parse
  kPayloadLength,     // payload byte count disagrees with the header
  kOutOfRange,        // argument outside its documented domain
  kProtocol,          // external model violated the wire protocol
  kTimeout,           // external model did not answer in time
  kTransport,         // spawn/connect/pipe failure
  kModel,             // model reported an error for a request
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo: return "io";
    case ErrorCode::kUnsupportedFormat: return "unsupported_format";
    case ErrorCode::kShape: return "shape";
    case ErrorCode::kMalformed: return "malformed";
    case ErrorCode::kPayloadLength: return "payload_length";
    case ErrorCode::kOutOfRange: return "out_of_range";
    case ErrorCode::kProtocol: return "protocol";
    case ErrorCode::kTimeout: return "timeout";
    case ErrorCode::kTransport: return "transport";
    case ErrorCode::kModel: return "model";
  }
  return "unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers can branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace pxattack

#endif  // PXATTACK_ERROR_HPP_
