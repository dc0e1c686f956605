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


// Reference model server for the line-delimited JSON protocol. Serves a toy
// weights file over stdin/stdout (default) or HTTP POST. The remaining flags
// turn it into misbehaving fixtures for adapter tests.

#include <cstdlib>
#include <limits>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "httplib.h"
#include "json.hpp"
#include "pxattack/classifier.hpp"
#include "pxattack/protocol.hpp"

namespace {

struct ServerOptions {
  std::string model_path;
  std::size_t uniform_classes = 0;
  bool wrong_length = false;
  bool emit_nan = false;
  std::size_t crash_after = 0;
  std::size_t error_every = 0;
  bool stale_first = false;
};

class Handler {
 public:
  explicit Handler(const ServerOptions& opts) : opts_(opts) {
    if (!opts_.model_path.empty()) model_ = std::make_unique<pxattack::ToyModel>(pxattack::load_toy_model(opts_.model_path));
  }

  // Returns one or more response lines for a request line.
  std::string handle(const std::string& line) {
    ++served_;
    if (opts_.crash_after > 0 && served_ > opts_.crash_after) std::_Exit(3);
    std::uint64_t id = 0;
    try {
      id = nlohmann::json::parse(line).value("id", std::uint64_t{0});
    } catch (const std::exception&) {
    }
    try {
      const auto req = pxattack::protocol::decode_request(line);
      if (opts_.error_every > 0 && served_ % opts_.error_every == 0) {
        return pxattack::protocol::encode_error(id, "injected failure");
      }
      std::vector<double> probs;
      if (opts_.uniform_classes > 0) {
        probs.assign(opts_.uniform_classes, 1.0 / static_cast<double>(opts_.uniform_classes));
      } else if (model_) {
        probs = model_->predict(pxattack::protocol::request_image(req));
      } else {
        return pxattack::protocol::encode_error(id, "no model loaded");
      }
      if (opts_.wrong_length) probs.push_back(0.0);
      if (opts_.emit_nan) probs[0] = std::numeric_limits<double>::quiet_NaN();
      std::string out;
      if (opts_.stale_first && id > 1) out += pxattack::protocol::encode_response(id - 1, probs);
      return out + pxattack::protocol::encode_response(id, probs);
    } catch (const std::exception& e) {
      return pxattack::protocol::encode_error(id, e.what());
    }
  }

 private:
  ServerOptions opts_;
  std::unique_ptr<pxattack::ToyModel> model_;
  std::size_t served_ = 0;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reference model server (toy weights, JSON line protocol)"};
  ServerOptions opts;
  int http_port = 0;
  std::string http_host = "127.0.0.1";
  app.add_option("--model", opts.model_path, "Toy weights file")->check(CLI::ExistingFile);
  app.add_option("--uniform", opts.uniform_classes, "Answer every request with a uniform vector over Y classes");
  app.add_option("--http", http_port, "Serve HTTP POST on this port instead of stdio");
  app.add_option("--host", http_host, "HTTP bind address");
  app.add_flag("--wrong-length", opts.wrong_length, "Append an extra probability (protocol violation)");
  app.add_flag("--nan", opts.emit_nan, "Report NaN for class 1");
  app.add_option("--crash-after", opts.crash_after, "Exit abruptly after serving this many requests");
  app.add_option("--error-every", opts.error_every, "Answer every k-th request with an error");
  app.add_flag("--stale-first", opts.stale_first, "Send a stale response before each real one");
  CLI11_PARSE(app, argc, argv);

  Handler handler(opts);
  if (http_port > 0) {
    httplib::Server server;
    std::mutex mutex;
    server.Post("/", [&](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mutex);
      res.set_content(handler.handle(req.body), "application/json");
    });
    return server.listen(http_host, http_port) ? 0 : 1;
  }

  std::ios::sync_with_stdio(false);
  std::string line;
  while (std::getline(std::cin, line)) {
    if (line.empty()) continue;
    std::cout << handler.handle(line) << std::flush;
  }
  return 0;
}
