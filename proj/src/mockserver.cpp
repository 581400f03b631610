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

#include "miniscope/mockserver.hpp"

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <cstdio>

#include "miniscope/errcodes.hpp"
#include "miniscope/util.hpp"

namespace miniscope {

using nlohmann::json;

namespace {

[[noreturn]] void bad_scenario(const std::string& what) {
  throw MockError(MockErrc::kInvalidScenario, "invalid scenario: " + what);
}

// Days since 1970-01-01 to (year * 12 + month - 1), proleptic Gregorian.
std::int64_t month_index(std::int64_t epoch_seconds) {
  std::int64_t z = epoch_seconds / 86400;
  if (epoch_seconds % 86400 < 0) --z;
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const std::int64_t doe = z - era * 146097;
  const std::int64_t yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const std::int64_t mp = (5 * doy + 2) / 153;
  const std::int64_t m = mp < 10 ? mp + 3 : mp - 9;
  const std::int64_t y = yoe + era * 400 + (m <= 2 ? 1 : 0);
  return y * 12 + (m - 1);
}

std::string param(const MockRequest& req, const std::string& name) {
  auto it = req.params.find(name);
  return it == req.params.end() ? std::string() : it->second;
}

}  // namespace

json error_body(int code) {
  return json{{"errcode", code}, {"errmsg", std::string(errc::message(code))}};
}

void MockScenario::validate() const {
  if (token_ttl <= 0) bad_scenario("token_ttl must be positive");
  for (const auto& [id, app] : apps) {
    if (id.empty()) bad_scenario("empty app id");
    if (app.secret.size() != 32) bad_scenario(id + ": secret must be 32 chars");
    for (const auto& [api, q] : app.quotas) {
      if (q < 0) bad_scenario(id + ": negative quota for " + api);
    }
    for (const auto& [api, q] : app.monthly_limits) {
      if (q < 0) bad_scenario(id + ": negative monthly limit for " + api);
    }
    for (const auto& [api, fx] : app.fixtures) {
      if (!fx.is_object()) bad_scenario(id + ": fixture for " + api);
    }
  }
}

json MockScenario::to_json() const {
  json apps_json = json::object();
  for (const auto& [id, app] : apps) {
    json a;
    a["secret"] = app.secret;
    a["whitelist"] = app.whitelist;
    a["features"] = app.features;
    a["fixtures"] = app.fixtures;
    a["quotas"] = app.quotas;
    if (app.user_limited) a["user_limited"] = true;
    if (app.owned) a["owned"] = true;
    if (!app.monthly_limits.empty()) a["monthly_limits"] = app.monthly_limits;
    apps_json[id] = std::move(a);
  }
  return json{{"token_ttl", token_ttl}, {"apps", std::move(apps_json)}};
}

MockScenario MockScenario::from_json(const json& j) {
  MockScenario s;
  try {
    if (!j.is_object()) bad_scenario("top level must be an object");
    s.token_ttl = j.value("token_ttl", std::int64_t{7200});
    if (j.contains("apps")) {
      for (const auto& [id, a] : j.at("apps").items()) {
        MockApp app;
        app.secret = a.at("secret").get<std::string>();
        app.whitelist = a.value("whitelist", std::vector<std::string>{});
        app.features = a.value("features", std::map<std::string, bool>{});
        if (a.contains("fixtures")) {
          for (const auto& [api, fx] : a.at("fixtures").items()) {
            app.fixtures[api] = fx;
          }
        }
        app.quotas = a.value("quotas", std::map<std::string, std::int64_t>{});
        app.user_limited = a.value("user_limited", false);
        app.owned = a.value("owned", false);
        app.monthly_limits =
            a.value("monthly_limits", std::map<std::string, std::int64_t>{});
        s.apps.emplace(id, std::move(app));
      }
    }
  } catch (const json::exception& e) {
    bad_scenario(e.what());
  }
  s.validate();
  return s;
}

MockScenario MockScenario::load_file(const std::string& path) {
  json j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) bad_scenario(path + ": not JSON");
  return from_json(j);
}

std::int64_t SystemClock::now() const {
  using namespace std::chrono;
  return duration_cast<seconds>(system_clock::now().time_since_epoch())
      .count();
}

json to_json(const RequestRecord& r) {
  return json{{"timestamp", r.timestamp},  {"method", r.method},
              {"path", r.path},            {"digest", r.digest},
              {"classification", r.classification},
              {"app_id", r.app_id},        {"api", r.api},
              {"errcode", r.errcode}};
}

MockEngine::MockEngine(MockScenario scenario, const ApiCatalog& catalog,
                       std::shared_ptr<MockClock> clock)
    : initial_(std::move(scenario)),
      state_(initial_),
      catalog_(catalog),
      clock_(clock ? std::move(clock) : std::make_shared<SystemClock>()) {
  initial_.validate();
}

bool MockEngine::whitelisted(const MockApp& app, const std::string& ip) const {
  return app.whitelist.empty() ||
         std::find(app.whitelist.begin(), app.whitelist.end(), ip) !=
             app.whitelist.end();
}

bool MockEngine::take_quota(std::map<std::string, std::int64_t>& quotas,
                            const std::string& api) {
  auto it = quotas.find(api);
  if (it == quotas.end()) return true;
  if (it->second <= 0) return false;
  --it->second;
  return true;
}

json MockEngine::evaluate(const MockRequest& req) {
  std::lock_guard lock(mu_);
  RequestRecord rec;
  rec.timestamp = clock_->now();
  rec.method = std::string(to_string(req.method));
  rec.path = req.path;
  rec.digest = sha256_hex(rec.method + " " + req.path + "?" + req.raw_query +
                          "\n" + req.body);
  json out;
  const ApiSpec* api = catalog_.find_by_path(req.path);
  if (api == nullptr) {
    rec.classification = "other";
    out = error_body(errc::kInvalidUrl);
  } else if (api->name == catalog_.token_endpoint().name) {
    rec.classification = "token";
    rec.api = api->name;
    out = token_route(req, rec);
  } else {
    rec.classification = api->kind == ApiKind::kGet ? "get" : "modify";
    rec.api = api->name;
    out = api_route(*api, req, rec);
  }
  rec.errcode = out.value("errcode", 0);
  records_.push_back(std::move(rec));
  return out;
}

json MockEngine::token_route(const MockRequest& req, RequestRecord& rec) {
  const std::string app_id = param(req, "appid");
  rec.app_id = app_id;
  auto it = state_.apps.find(app_id);
  if (it != state_.apps.end() && !whitelisted(it->second, req.caller_ip)) {
    return error_body(errc::kIpNotWhitelisted);
  }
  if (param(req, "grant_type") != "client_credential") {
    return error_body(errc::kInvalidGrantType);
  }
  if (it == state_.apps.end() || param(req, "secret") != it->second.secret) {
    return error_body(errc::kInvalidCredential);
  }
  MockApp& app = it->second;
  if (app.user_limited) return error_body(errc::kUserLimited);
  if (!take_quota(app.quotas, catalog_.token_endpoint().name)) {
    return error_body(errc::kQuotaExceeded);
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(++token_counter_));
  std::string token = sha256_hex(app_id + ":" + buf).substr(0, 48);
  tokens_[token] = IssuedToken{app_id, clock_->now()};
  return json{{"access_token", token}, {"expires_in", state_.token_ttl}};
}

json MockEngine::api_route(const ApiSpec& api, const MockRequest& req,
                           RequestRecord& rec) {
  MockApp* app = nullptr;
  std::string app_id;
  if (api.needs(ProvenanceType::kAccessToken)) {
    const std::string token = param(req, "access_token");
    if (token.empty()) return error_body(errc::kAccessTokenMissing);
    auto t = tokens_.find(token);
    if (t == tokens_.end()) return error_body(errc::kInvalidAccessToken);
    app_id = t->second.app_id;
    rec.app_id = app_id;
    app = &state_.apps.at(app_id);
    if (!whitelisted(*app, req.caller_ip)) {
      return error_body(errc::kIpNotWhitelisted);
    }
    if (clock_->now() >= t->second.issued_at + state_.token_ttl) {
      return error_body(errc::kTokenExpired);
    }
  } else {
    app_id = param(req, "appid");
    rec.app_id = app_id;
    auto it = state_.apps.find(app_id);
    if (it != state_.apps.end() && !whitelisted(it->second, req.caller_ip)) {
      return error_body(errc::kIpNotWhitelisted);
    }
    std::string secret = param(req, "appsecret");
    if (secret.empty()) secret = param(req, "secret");
    if (it == state_.apps.end() || secret != it->second.secret) {
      return error_body(errc::kInvalidCredential);
    }
    app = &it->second;
  }
  if (!take_quota(app->quotas, api.name)) {
    return error_body(errc::kQuotaExceeded);
  }
  if (!api.feature.empty()) {
    auto f = app->features.find(api.feature);
    if (f != app->features.end() && !f->second) {
      return error_body(errc::kFeatureBlocked);
    }
  }
  if (api.kind == ApiKind::kModify) {
    if (!app->owned) return error_body(errc::kModifyRefused);
    auto lim = app->monthly_limits.find(api.name);
    if (lim != app->monthly_limits.end()) {
      auto& used =
          monthly_usage_[{app_id, api.name, month_index(clock_->now())}];
      if (used >= lim->second) return error_body(errc::kQuotaExceeded);
      ++used;
    }
  }
  json out = json::object();
  if (auto fx = app->fixtures.find(api.name); fx != app->fixtures.end()) {
    out = fx->second;
  }
  out["errcode"] = errc::kOk;
  out["errmsg"] = "ok";
  return out;
}

std::vector<RequestRecord> MockEngine::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

std::size_t MockEngine::count(std::string_view classification) const {
  std::lock_guard lock(mu_);
  return static_cast<std::size_t>(
      std::count_if(records_.begin(), records_.end(), [&](const auto& r) {
        return r.classification == classification;
      }));
}

void MockEngine::reset() {
  std::lock_guard lock(mu_);
  state_ = initial_;
  tokens_.clear();
  monthly_usage_.clear();
  records_.clear();
}

namespace {

void merge_body_params(const std::string& body,
                       std::map<std::string, std::string>& params) {
  if (body.empty()) return;
  json doc = json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) return;
  for (const auto& [k, v] : doc.items()) {
    if (params.count(k)) continue;
    params[k] = v.is_string() ? v.get<std::string>() : v.dump();
  }
}

}  // namespace

HttpResponse InProcessTransport::send(const HttpRequest& request) {
  MockRequest req;
  req.method = request.method;
  req.path = request.path;
  for (const auto& [k, v] : request.query) req.params.emplace(k, v);
  merge_body_params(request.body, req.params);
  req.caller_ip = caller_ip_;
  std::string target = request.target();
  auto q = target.find('?');
  if (q != std::string::npos) req.raw_query = target.substr(q + 1);
  req.body = request.body;
  HttpResponse resp;
  resp.status = 200;
  resp.body = engine_.evaluate(req).dump();
  return resp;
}

MockServer::MockServer(std::shared_ptr<MockEngine> engine)
    : engine_(std::move(engine)), server_(std::make_unique<httplib::Server>()) {
  // httplib's default also sets SO_REUSEPORT, which lets a second server
  // share a busy port instead of failing to bind.
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR,
                 reinterpret_cast<const void*>(&yes), sizeof(yes));
  });
  install_routes();
}

MockServer::~MockServer() { stop(); }

void MockServer::install_routes() {
  server_->Get("/__admin/records",
               [this](const httplib::Request&, httplib::Response& res) {
                 json arr = json::array();
                 for (const auto& r : engine_->records()) {
                   arr.push_back(to_json(r));
                 }
                 res.set_content(arr.dump(), "application/json");
               });
  server_->Post("/__admin/reset",
                [this](const httplib::Request&, httplib::Response& res) {
                  engine_->reset();
                  res.set_content(R"({"errcode":0,"errmsg":"ok"})",
                                  "application/json");
                });
  auto handler = [this](const httplib::Request& hreq, httplib::Response& res) {
    MockRequest req;
    req.method = hreq.method == "POST" ? HttpMethod::kPost : HttpMethod::kGet;
    req.path = hreq.path;
    for (const auto& [k, v] : hreq.params) req.params.emplace(k, v);
    merge_body_params(hreq.body, req.params);
    req.caller_ip = hreq.has_header("X-Mock-Caller-IP")
                        ? hreq.get_header_value("X-Mock-Caller-IP")
                        : hreq.remote_addr;
    auto q = hreq.target.find('?');
    if (q != std::string::npos) req.raw_query = hreq.target.substr(q + 1);
    req.body = hreq.body;
    res.set_content(engine_->evaluate(req).dump(), "application/json");
  };
  server_->Get(".*", handler);
  server_->Post(".*", handler);
}

void MockServer::start(const std::string& host, int port) {
  host_ = host;
  if (port == 0) {
    port_ = server_->bind_to_any_port(host);
  } else {
    port_ = server_->bind_to_port(host, port) ? port : -1;
  }
  if (port_ <= 0) {
    throw MockError(MockErrc::kBindFailure,
                    "cannot bind " + host + ":" + std::to_string(port));
  }
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

void MockServer::run(const std::string& host, int port) {
  host_ = host;
  if (port == 0) {
    port_ = server_->bind_to_any_port(host);
  } else {
    port_ = server_->bind_to_port(host, port) ? port : -1;
  }
  if (port_ <= 0) {
    throw MockError(MockErrc::kBindFailure,
                    "cannot bind " + host + ":" + std::to_string(port));
  }
  server_->listen_after_bind();
}

void MockServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::string MockServer::base_url() const {
  return "http://" + host_ + ":" + std::to_string(port_);
}

}  // namespace miniscope
