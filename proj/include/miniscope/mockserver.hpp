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

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <nlohmann/json.hpp>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "miniscope/catalog.hpp"
#include "miniscope/transport.hpp"

namespace httplib {
class Server;
}

namespace miniscope {

enum class MockErrc { kInvalidScenario, kBindFailure };

class MockError : public std::runtime_error {
 public:
  MockError(MockErrc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  MockErrc code() const noexcept { return code_; }

 private:
  MockErrc code_;
};

struct MockApp {
  std::string secret;
  /// Empty means whitelisting is off.
  std::vector<std::string> whitelist;
  /// Features not listed are enabled.
  std::map<std::string, bool> features;
  std::map<std::string, nlohmann::json> fixtures;
  /// Remaining calls per API (including the token endpoint); absent means
  /// unlimited.
  std::map<std::string, std::int64_t> quotas;
  bool user_limited = false;
  /// Only owned apps may execute Modify routes.
  bool owned = false;
  std::map<std::string, std::int64_t> monthly_limits;

  bool operator==(const MockApp&) const = default;
};

struct MockScenario {
  std::int64_t token_ttl = 7200;
  std::map<std::string, MockApp> apps;

  void validate() const;
  nlohmann::json to_json() const;
  static MockScenario from_json(const nlohmann::json& j);
  static MockScenario load_file(const std::string& path);
  bool operator==(const MockScenario&) const = default;
};

class MockClock {
 public:
  virtual ~MockClock() = default;
  /// Seconds since the Unix epoch.
  virtual std::int64_t now() const = 0;
};

class SystemClock : public MockClock {
 public:
  std::int64_t now() const override;
};

class ManualClock : public MockClock {
 public:
  explicit ManualClock(std::int64_t start = 1700000000) : now_(start) {}
  std::int64_t now() const override { return now_.load(); }
  void set(std::int64_t t) { now_ = t; }
  void advance(std::int64_t seconds) { now_ += seconds; }

 private:
  std::atomic<std::int64_t> now_;
};

struct MockRequest {
  HttpMethod method = HttpMethod::kGet;
  std::string path;
  /// Query parameters merged with top-level fields of a JSON body.
  std::map<std::string, std::string> params;
  std::string caller_ip = "127.0.0.1";
  /// Raw query and body, used only for the record digest.
  std::string raw_query;
  std::string body;
};

struct RequestRecord {
  std::int64_t timestamp = 0;
  std::string method;
  std::string path;
  std::string digest;
  /// token, get, modify or other.
  std::string classification;
  std::string app_id;
  std::string api;
  int errcode = 0;
};

nlohmann::json to_json(const RequestRecord& r);

/// Pure decision core shared by the HTTP service and unit tests.
class MockEngine {
 public:
  MockEngine(MockScenario scenario, const ApiCatalog& catalog,
             std::shared_ptr<MockClock> clock = nullptr);

  nlohmann::json evaluate(const MockRequest& request);

  std::vector<RequestRecord> records() const;
  std::size_t count(std::string_view classification) const;
  /// Restores the scenario's initial state and clears the log.
  void reset();
  const ApiCatalog& catalog() const { return catalog_; }

 private:
  struct IssuedToken {
    std::string app_id;
    std::int64_t issued_at = 0;
  };

  nlohmann::json token_route(const MockRequest& req, RequestRecord& rec);
  nlohmann::json api_route(const ApiSpec& api, const MockRequest& req,
                           RequestRecord& rec);
  bool whitelisted(const MockApp& app, const std::string& ip) const;
  static bool take_quota(std::map<std::string, std::int64_t>& quotas,
                         const std::string& api);

  const MockScenario initial_;
  MockScenario state_;
  ApiCatalog catalog_;
  std::shared_ptr<MockClock> clock_;
  mutable std::mutex mu_;
  std::map<std::string, IssuedToken> tokens_;
  std::uint64_t token_counter_ = 0;
  // (app, api, year*12+month) -> calls
  std::map<std::tuple<std::string, std::string, std::int64_t>, std::int64_t>
      monthly_usage_;
  std::vector<RequestRecord> records_;
};

nlohmann::json error_body(int code);

/// Calls the engine directly, skipping HTTP.
class InProcessTransport : public Transport {
 public:
  explicit InProcessTransport(MockEngine& engine,
                              std::string caller_ip = "127.0.0.1")
      : engine_(engine), caller_ip_(std::move(caller_ip)) {}

  HttpResponse send(const HttpRequest& request) override;

 private:
  MockEngine& engine_;
  std::string caller_ip_;
};

/// HTTP front end. The caller IP is the peer address unless the request
/// carries X-Mock-Caller-IP. Admin routes: GET /__admin/records,
/// POST /__admin/reset.
class MockServer {
 public:
  explicit MockServer(std::shared_ptr<MockEngine> engine);
  ~MockServer();
  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  /// Binds (port 0 picks a free port) and serves on a background thread.
  /// Throws MockError(kBindFailure).
  void start(const std::string& host = "127.0.0.1", int port = 0);
  /// Blocks until stop() is called from another thread.
  void run(const std::string& host, int port);
  void stop();

  int port() const { return port_; }
  std::string base_url() const;
  MockEngine& engine() { return *engine_; }

 private:
  void install_routes();

  std::shared_ptr<MockEngine> engine_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::string host_;
  int port_ = 0;
};

}  // namespace miniscope
