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

#include "miniscope/transport.hpp"

#include <httplib.h>

#include <stdexcept>
#include <thread>

namespace miniscope {

std::string percent_encode(std::string_view s) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  out.reserve(s.size());
  for (unsigned char c : s) {
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
        (c >= '0' && c <= '9') || c == '-' || c == '_' || c == '.' ||
        c == '~') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 0xF]);
    }
  }
  return out;
}

std::string HttpRequest::target() const {
  std::string out = path;
  char sep = '?';
  for (const auto& [k, v] : query) {
    out.push_back(sep);
    out += percent_encode(k);
    out.push_back('=');
    out += percent_encode(v);
    sep = '&';
  }
  return out;
}

std::string Endpoint::origin() const {
  return scheme + "://" + host + ":" + std::to_string(port);
}

Endpoint parse_endpoint(const std::string& url) {
  Endpoint ep;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw std::invalid_argument("endpoint '" + url + "' lacks a scheme");
  }
  ep.scheme = url.substr(0, scheme_end);
  if (ep.scheme != "http" && ep.scheme != "https") {
    throw std::invalid_argument("endpoint scheme must be http or https");
  }
  std::string rest = url.substr(scheme_end + 3);
  const auto slash = rest.find('/');
  if (slash != std::string::npos) {
    ep.prefix = rest.substr(slash);
    rest = rest.substr(0, slash);
    while (!ep.prefix.empty() && ep.prefix.back() == '/') ep.prefix.pop_back();
  }
  ep.port = ep.scheme == "https" ? 443 : 80;
  if (!rest.empty() && rest.front() == '[') {
    const auto close = rest.find(']');
    if (close == std::string::npos) {
      throw std::invalid_argument("bad IPv6 literal in endpoint");
    }
    ep.host = rest.substr(1, close - 1);
    rest = rest.substr(close + 1);
    if (!rest.empty() && rest.front() == ':') {
      ep.port = std::stoi(rest.substr(1));
    }
  } else {
    const auto colon = rest.rfind(':');
    if (colon != std::string::npos) {
      ep.host = rest.substr(0, colon);
      try {
        ep.port = std::stoi(rest.substr(colon + 1));
      } catch (const std::exception&) {
        throw std::invalid_argument("bad port in endpoint '" + url + "'");
      }
    } else {
      ep.host = rest;
    }
  }
  if (ep.host.empty()) throw std::invalid_argument("endpoint has no host");
  if (ep.port <= 0 || ep.port > 65535) {
    throw std::invalid_argument("endpoint port out of range");
  }
  return ep;
}

bool is_loopback_host(const std::string& host) {
  return host == "localhost" || host == "::1" || host.rfind("127.", 0) == 0;
}

HttpTransport::HttpTransport(const std::string& base_url,
                             std::chrono::milliseconds timeout)
    : endpoint_(parse_endpoint(base_url)), timeout_(timeout) {}

HttpResponse HttpTransport::send(const HttpRequest& request) {
  httplib::Client client(endpoint_.origin());
  const auto secs = timeout_.count() / 1000;
  const auto usecs = (timeout_.count() % 1000) * 1000;
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  client.set_keep_alive(false);

  HttpRequest prefixed = request;
  prefixed.path = endpoint_.prefix + request.path;
  const std::string target = prefixed.target();
  httplib::Result res =
      request.method == HttpMethod::kGet
          ? client.Get(target)
          : client.Post(target, request.body, "application/json");
  HttpResponse out;
  if (!res) {
    out.error = httplib::to_string(res.error());
    return out;
  }
  out.status = res->status;
  out.body = res->body;
  return out;
}

HttpResponse RecordingTransport::send(const HttpRequest& request) {
  {
    std::lock_guard lock(mu_);
    requests_.push_back(request);
  }
  if (!inner_) return HttpResponse{0, {}, "network disabled"};
  return inner_->send(request);
}

std::vector<HttpRequest> RecordingTransport::requests() const {
  std::lock_guard lock(mu_);
  return requests_;
}

std::size_t RecordingTransport::count() const {
  std::lock_guard lock(mu_);
  return requests_.size();
}

RateLimiter::RateLimiter(std::chrono::milliseconds min_interval, NowFn now,
                         SleepFn sleep)
    : min_interval_(min_interval),
      now_(now ? std::move(now) : NowFn([] { return Clock::now(); })),
      sleep_(sleep ? std::move(sleep) : SleepFn([](Clock::duration d) {
        std::this_thread::sleep_for(d);
      })) {}

void RateLimiter::wait() {
  std::lock_guard lock(mu_);
  if (has_last_ && min_interval_.count() > 0) {
    const auto ready = last_ + min_interval_;
    const auto now = now_();
    if (now < ready) sleep_(ready - now);
  }
  last_ = now_();
  has_last_ = true;
}

HttpResponse ThrottledTransport::send(const HttpRequest& request) {
  std::lock_guard lock(mu_);
  limiter_.wait();
  ++calls_;
  return inner_.send(request);
}

}  // namespace miniscope
