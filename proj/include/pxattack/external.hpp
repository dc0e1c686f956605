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


#ifndef PXATTACK_EXTERNAL_HPP_
#define PXATTACK_EXTERNAL_HPP_

#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <utility>

#include "httplib.h"
#include "pxattack/classifier.hpp"
#include "pxattack/error.hpp"
#include "pxattack/protocol.hpp"

namespace pxattack {

/// Moves one request line to a model and returns response lines.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send(const std::string& line) = 0;
  /// Next response line (without the trailing newline).
  virtual std::string receive(std::chrono::milliseconds timeout) = 0;
};

/// Child process speaking the protocol on stdin/stdout (a socketpair, so
/// writes to a dead child fail with EPIPE instead of raising SIGPIPE).
class ProcessTransport final : public Transport {
 public:
  explicit ProcessTransport(const std::string& command) {
    int fds[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) != 0) {
      throw Error(ErrorCode::kTransport, std::string("socketpair: ") + std::strerror(errno));
    }
    const pid_t pid = ::fork();
    if (pid < 0) {
      ::close(fds[0]);
      ::close(fds[1]);
      throw Error(ErrorCode::kTransport, std::string("fork: ") + std::strerror(errno));
    }
    if (pid == 0) {
      ::close(fds[0]);
      ::dup2(fds[1], STDIN_FILENO);
      ::dup2(fds[1], STDOUT_FILENO);
      if (fds[1] > STDOUT_FILENO) ::close(fds[1]);
      ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(fds[1]);
    fd_ = fds[0];
    pid_ = pid;
  }

  ProcessTransport(const ProcessTransport&) = delete;
  ProcessTransport& operator=(const ProcessTransport&) = delete;

  ~ProcessTransport() override {
    if (fd_ >= 0) ::close(fd_);
    if (pid_ > 0) {
      for (int i = 0; i < 100; ++i) {
        if (::waitpid(pid_, nullptr, WNOHANG) != 0) return;
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
      }
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, nullptr, 0);
    }
  }

  void send(const std::string& line) override {
    std::size_t sent = 0;
    while (sent < line.size()) {
      const ssize_t n = ::send(fd_, line.data() + sent, line.size() - sent, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw Error(ErrorCode::kTransport, std::string("model process write failed: ") + std::strerror(errno));
      }
      sent += static_cast<std::size_t>(n);
    }
  }

  std::string receive(std::chrono::milliseconds timeout) override {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      if (const auto pos = buffer_.find('\n'); pos != std::string::npos) {
        std::string line = buffer_.substr(0, pos);
        buffer_.erase(0, pos + 1);
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) throw Error(ErrorCode::kTimeout, "model process did not answer in time");
      pollfd pfd{fd_, POLLIN, 0};
      const int ready = ::poll(&pfd, 1, static_cast<int>(left.count()));
      if (ready < 0) {
        if (errno == EINTR) continue;
        throw Error(ErrorCode::kTransport, std::string("poll: ") + std::strerror(errno));
      }
      if (ready == 0) continue;
      char chunk[65536];
      const ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw Error(ErrorCode::kTransport, std::string("model process read failed: ") + std::strerror(errno));
      }
      if (n == 0) throw Error(ErrorCode::kTransport, "model process closed its output");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  int fd_ = -1;
  pid_t pid_ = -1;
  std::string buffer_;
};

/// One HTTP POST per message; the body is the request line, the reply body
/// the response line. Transport failures are retried once.
class HttpTransport final : public Transport {
 public:
  explicit HttpTransport(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos || url.substr(0, scheme_end) != "http") {
      throw Error(ErrorCode::kTransport, "only http:// URLs are supported: " + url);
    }
    const auto path_start = url.find('/', scheme_end + 3);
    host_ = url.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
  }

  void send(const std::string& line) override { pending_ = line; }

  std::string receive(std::chrono::milliseconds timeout) override {
    httplib::Client client(host_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout).count();
    client.set_read_timeout(std::max<long long>(1, secs), 0);
    client.set_connection_timeout(std::max<long long>(1, secs), 0);
    for (int attempt = 0; attempt < 2; ++attempt) {
      auto res = client.Post(path_, pending_, "application/json");
      if (!res) {
        if (attempt == 0) continue;
        const auto err = res.error();
        throw Error(err == httplib::Error::Read ? ErrorCode::kTimeout : ErrorCode::kTransport,
                    "HTTP request to " + host_ + path_ + " failed: " + httplib::to_string(err));
      }
      if (res->status != 200) {
        throw Error(ErrorCode::kProtocol, "HTTP status " + std::to_string(res->status));
      }
      std::string body = res->body;
      while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
      return body;
    }
    throw Error(ErrorCode::kTransport, "unreachable");
  }

 private:
  std::string host_;
  std::string path_;
  std::string pending_;
};

/// Classifier behind a Transport. At most one request is outstanding per
/// connection; ids increase by one per query and stale responses (lower id)
/// are skipped.
class ExternalClassifier final : public Classifier {
 public:
  ExternalClassifier(std::unique_ptr<Transport> transport, std::chrono::milliseconds timeout,
                     std::size_t classes = 0)
      : transport_(std::move(transport)), timeout_(timeout), classes_(classes) {}

  std::size_t class_count() const override {
    std::lock_guard lock(mutex_);
    return classes_;
  }

  std::uint64_t last_request_id() const {
    std::lock_guard lock(mutex_);
    return next_id_ - 1;
  }

 protected:
  std::vector<double> do_predict(const ImageTensor& x) override {
    std::lock_guard lock(mutex_);
    const std::uint64_t id = next_id_++;
    transport_->send(protocol::encode_request(id, x));
    for (;;) {
      const protocol::Response r = protocol::decode_response(transport_->receive(timeout_));
      if (r.id < id) continue;
      if (r.id > id) {
        throw Error(ErrorCode::kProtocol, "id mismatch: sent request " + std::to_string(id) +
                                              ", got response " + std::to_string(r.id));
      }
      if (r.error) throw Error(ErrorCode::kModel, "request " + std::to_string(id) + ": " + *r.error);
      return validate(id, *r.probs);
    }
  }

 private:
  std::vector<double> validate(std::uint64_t id, std::vector<double> probs) {
    if (classes_ == 0) {
      if (probs.size() < 2) {
        throw Error(ErrorCode::kProtocol, "request " + std::to_string(id) + ": fewer than 2 probabilities");
      }
      classes_ = probs.size();
    }
    if (probs.size() != classes_) {
      throw Error(ErrorCode::kProtocol, "request " + std::to_string(id) + ": expected " +
                                            std::to_string(classes_) + " probabilities, got " +
                                            std::to_string(probs.size()));
    }
    double sum = 0.0;
    bool finite = true;
    for (double p : probs) {
      if (!std::isfinite(p)) {
        finite = false;
        continue;
      }
      if (p < 0.0) throw Error(ErrorCode::kProtocol, "request " + std::to_string(id) + ": negative probability");
      sum += p;
    }
    // Non-finite vectors are passed on; the attack rejects them as anomalies.
    if (finite && std::abs(sum - 1.0) > 1e-5) {
      throw Error(ErrorCode::kProtocol, "request " + std::to_string(id) + ": probabilities sum to " +
                                            std::to_string(sum));
    }
    return probs;
  }

  std::unique_ptr<Transport> transport_;
  std::chrono::milliseconds timeout_;
  mutable std::mutex mutex_;
  std::size_t classes_;
  std::uint64_t next_id_ = 1;
};

/// `target` is either an http:// URL or a shell command to spawn. Other
/// URL schemes are rejected.
inline std::unique_ptr<ExternalClassifier> connect_external(
    const std::string& target, std::chrono::milliseconds timeout = std::chrono::seconds(30),
    std::size_t classes = 0) {
  std::unique_ptr<Transport> transport;
  const auto scheme = target.find("://");
  if (scheme != std::string::npos && target.find_first_of(" \t") == std::string::npos) {
    transport = std::make_unique<HttpTransport>(target);
  } else {
    transport = std::make_unique<ProcessTransport>(target);
  }
  return std::make_unique<ExternalClassifier>(std::move(transport), timeout, classes);
}

}  // namespace pxattack

#endif  // PXATTACK_EXTERNAL_HPP_
