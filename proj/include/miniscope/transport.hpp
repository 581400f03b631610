// Copyright 2026 The Miniscope Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "miniscope/catalog.hpp"

namespace miniscope {

struct HttpRequest {
  HttpMethod method = HttpMethod::kGet;
  std::string path;
  std::vector<std::pair<std::string, std::string>> query;
  std::string body;

  /// Path plus percent-encoded query string.
  std::string target() const;
};

struct HttpResponse {
  /// 0 when the request never produced an HTTP response.
  int status = 0;
  std::string body;
  std::string error;
};

std::string percent_encode(std::string_view s);

class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse send(const HttpRequest& request) = 0;
};

struct Endpoint {
  std::string scheme;
  std::string host;
  int port = 0;
  std::string prefix;

  std::string origin() const;
};

/// Parses "http(s)://host[:port][/prefix]"; throws std::invalid_argument.
Endpoint parse_endpoint(const std::string& url);
bool is_loopback_host(const std::string& host);

/// Blocking HTTP(S) client; one connection per request, so one instance may
/// be shared between threads.
class HttpTransport : public Transport {
 public:
  explicit HttpTransport(const std::string& base_url,
                         std::chrono::milliseconds timeout =
                             std::chrono::seconds(5));

  HttpResponse send(const HttpRequest& request) override;

 private:
  Endpoint endpoint_;
  std::chrono::milliseconds timeout_;
};

/// Records every request and forwards it to `inner`; with no inner
/// transport every request fails without touching the network.
class RecordingTransport : public Transport {
 public:
  explicit RecordingTransport(std::shared_ptr<Transport> inner = nullptr)
      : inner_(std::move(inner)) {}

  HttpResponse send(const HttpRequest& request) override;

  std::vector<HttpRequest> requests() const;
  std::size_t count() const;

 private:
  std::shared_ptr<Transport> inner_;
  mutable std::mutex mu_;
  std::vector<HttpRequest> requests_;
};

/// Enforces a minimum spacing between consecutive requests.
class RateLimiter {
 public:
  using Clock = std::chrono::steady_clock;
  using NowFn = std::function<Clock::time_point()>;
  using SleepFn = std::function<void(Clock::duration)>;

  explicit RateLimiter(std::chrono::milliseconds min_interval,
                       NowFn now = nullptr, SleepFn sleep = nullptr);

  void wait();

 private:
  std::chrono::milliseconds min_interval_;
  NowFn now_;
  SleepFn sleep_;
  std::mutex mu_;
  bool has_last_ = false;
  Clock::time_point last_;
};

/// Serializes one mini-app's requests through a RateLimiter and counts them.
class ThrottledTransport : public Transport {
 public:
  ThrottledTransport(Transport& inner, std::chrono::milliseconds min_interval,
                     RateLimiter::NowFn now = nullptr,
                     RateLimiter::SleepFn sleep = nullptr)
      : inner_(inner), limiter_(min_interval, std::move(now), std::move(sleep)) {}

  HttpResponse send(const HttpRequest& request) override;
  std::size_t calls() const { return calls_; }

 private:
  Transport& inner_;
  RateLimiter limiter_;
  std::mutex mu_;
  std::size_t calls_ = 0;
};

}  // namespace miniscope
