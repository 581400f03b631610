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

#include <cstdint>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "miniscope/platform.hpp"

namespace miniscope {

enum class ApiKind { kGet, kModify };
enum class HttpMethod { kGet, kPost };
enum class Severity { kNone = 0, kLow = 1, kMedium = 2, kHigh = 3 };

std::string_view to_string(ApiKind k);
std::string_view to_string(HttpMethod m);
std::string_view to_string(Severity s);
Severity severity_from_string(std::string_view s);

/// Consequence flags [A]..[E]: read mini-app data, send arbitrary messages,
/// data tampering, malicious redirects, resource exhaustion.
class ImpactFlags {
 public:
  enum Flag : std::uint8_t {
    kReadData = 1 << 0,
    kSendMessages = 1 << 1,
    kTampering = 1 << 2,
    kRedirects = 1 << 3,
    kExhaustion = 1 << 4,
  };

  constexpr ImpactFlags() = default;
  constexpr explicit ImpactFlags(std::uint8_t bits) : bits_(bits & 0x1F) {}

  /// Parses letters such as "ACE" (order-insensitive).
  static ImpactFlags from_letters(std::string_view letters);
  /// Canonical letter string, e.g. "ACE".
  std::string letters() const;

  constexpr bool has(Flag f) const { return (bits_ & f) != 0; }
  constexpr bool has_letter(char c) const {
    return c >= 'A' && c <= 'E' && (bits_ & (1 << (c - 'A')));
  }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr std::uint8_t bits() const { return bits_; }
  constexpr ImpactFlags operator|(ImpactFlags o) const {
    return ImpactFlags(static_cast<std::uint8_t>(bits_ | o.bits_));
  }
  ImpactFlags& operator|=(ImpactFlags o) {
    bits_ = static_cast<std::uint8_t>(bits_ | o.bits_);
    return *this;
  }
  constexpr bool operator==(const ImpactFlags&) const = default;

 private:
  std::uint8_t bits_ = 0;
};

enum class ProvenanceType {
  kAccessToken,
  kAppId,
  kAppSecret,
  kFromGetResponse,
  kCodeExtracted,
  kAttackerControlled,
};

std::string_view to_string(ProvenanceType t);

/// Tags a CODE_EXTRACTED parameter may carry.
inline constexpr std::string_view kExtractCloudEnvId = "cloud_env_id";
inline constexpr std::string_view kExtractCloudFunctionName =
    "cloud_function_name";
inline constexpr std::string_view kExtractOpenIdInCode = "openid_in_code";

struct Provenance {
  ProvenanceType type = ProvenanceType::kAttackerControlled;
  std::string api;        // kFromGetResponse
  std::string json_path;  // kFromGetResponse
  std::string extractor;  // kCodeExtracted

  std::string describe() const;
  bool operator==(const Provenance&) const = default;
};

/// A required parameter. `sources` are alternatives: the parameter is
/// available when any one of them resolves.
struct ParamRequirement {
  std::string name;
  std::vector<Provenance> sources;

  bool operator==(const ParamRequirement&) const = default;
};

struct ApiSpec {
  std::string name;
  Platform platform = Platform::kWechatLike;
  std::string category;
  std::string endpoint_path;
  HttpMethod http_method = HttpMethod::kGet;
  ApiKind kind = ApiKind::kGet;
  std::vector<ParamRequirement> params;
  ImpactFlags impact_flags;
  Severity severity = Severity::kNone;
  bool probe_allowed = false;
  /// Mini-app feature gating the API on the server ("nearby", "logistics").
  std::string feature;

  bool needs(ProvenanceType t) const;
  bool operator==(const ApiSpec&) const = default;
};

/// Endpoint recognized by static string matching only (no callability).
struct DirectInvocationPattern {
  std::string name;
  std::string category;
  std::string endpoint_path;

  bool operator==(const DirectInvocationPattern&) const = default;
};

enum class CatalogErrc {
  kSchemaError,
  kUnknownReference,
  kCyclicDependency,
  kModifyProbeAllowed,
  kUnknownApi,
};

std::string_view to_string(CatalogErrc code);

class CatalogError : public std::runtime_error {
 public:
  CatalogError(CatalogErrc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  CatalogErrc code() const noexcept { return code_; }

 private:
  CatalogErrc code_;
};

class ApiCatalog {
 public:
  ApiCatalog() = default;
  /// Validates every invariant; throws CatalogError.
  ApiCatalog(Platform platform, ApiSpec token_endpoint,
             std::vector<ApiSpec> apis,
             std::vector<DirectInvocationPattern> direct_only = {});

  Platform platform() const { return platform_; }
  const ApiSpec& token_endpoint() const { return token_endpoint_; }
  /// Catalog order.
  const std::vector<ApiSpec>& apis() const { return apis_; }
  const std::vector<DirectInvocationPattern>& direct_only() const {
    return direct_only_;
  }

  const ApiSpec* find(std::string_view name) const;
  const ApiSpec& at(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;
  /// The API served at `path`, including the token endpoint.
  const ApiSpec* find_by_path(std::string_view path) const;

  /// Every endpoint usable for direct-invocation matching: token endpoint,
  /// catalog APIs and match-only patterns.
  std::vector<DirectInvocationPattern> invocation_patterns() const;
  bool knows_invocation_name(std::string_view name) const;

  std::size_t count(ApiKind kind) const;

  bool operator==(const ApiCatalog&) const = default;

 private:
  Platform platform_ = Platform::kWechatLike;
  ApiSpec token_endpoint_;
  std::vector<ApiSpec> apis_;
  std::vector<DirectInvocationPattern> direct_only_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

ApiCatalog load_catalog(std::string_view document);
ApiCatalog load_catalog_file(const std::string& path);
nlohmann::json catalog_to_json(const ApiCatalog& catalog);

/// Get APIs whose responses feed `api_name`, transitively, dependencies
/// first (ties broken by catalog order).
std::vector<std::string> dependency_closure(const ApiCatalog& catalog,
                                            std::string_view api_name);

/// Get APIs that appear in the dependency closure of some catalog API.
std::vector<std::string> feeding_get_apis(const ApiCatalog& catalog);

/// Path to a shipped data file ("catalog/wechat.json", "rules/baidu.json").
std::string shipped_data_path(std::string_view relative);

}  // namespace miniscope
