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
#include <cstdint>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "miniscope/catalog.hpp"
#include "miniscope/scanner.hpp"
#include "miniscope/transport.hpp"

namespace miniscope {

enum class TokenClass {
  kTokenIssued,
  kInvalidCredential,
  kIpNotWhitelisted,
  kUserLimited,
  kQuotaExceeded,
  kTransportError,
};

std::string_view to_string(TokenClass c);
TokenClass token_class_from_string(std::string_view s);

struct ProbeOutcome {
  TokenClass classification = TokenClass::kTransportError;
  std::optional<std::string> access_token;
  std::optional<std::int64_t> expires_in;
  int raw_code = 0;
  std::string raw_message;
};

/// Total mapping from a token-endpoint response to a classification. Bodies
/// that are not JSON objects, and unrecognized codes, are kTransportError.
TokenClass classify_response(int status, std::string_view body);
ProbeOutcome interpret_token_response(const HttpResponse& response);

/// True when the token endpoint confirmed the app ID/secret pair, even if
/// no token could be handed out (token quota exhausted).
bool pair_validated(const ProbeOutcome& outcome);

enum class WhitelistCheck { kWhitelistedElsewhere, kNotWhitelisted, kIndeterminate };
std::string_view to_string(WhitelistCheck w);

struct ProbePolicy {
  bool allow_get_probing = true;
  std::set<std::string> get_allowlist;
  int per_api_call_budget = 1;
  std::chrono::milliseconds min_interval{200};
  std::string dummy_secret;

  /// All probe-allowed Get APIs, budget 1, 200 ms spacing and a random
  /// 32-character dummy secret derived from `seed`.
  static ProbePolicy defaults_for(const ApiCatalog& catalog,
                                  std::uint64_t seed);
  /// Throws std::invalid_argument when an invariant is broken.
  void validate(const ApiCatalog& catalog) const;
};

std::string make_dummy_secret(std::uint64_t seed);

/// Exactly one request to the catalog's token endpoint.
ProbeOutcome acquire_token(std::string_view app_id, std::string_view secret,
                           const ApiCatalog& catalog, Transport& transport);
ProbeOutcome acquire_token(const CredentialPair& pair,
                           const ApiCatalog& catalog, Transport& transport);

/// Requests a token with the policy's dummy secret. The server checks the
/// whitelist before the credentials, so the error tells the two apart.
WhitelistCheck check_whitelist(std::string_view app_id,
                               const ApiCatalog& catalog,
                               const ProbePolicy& policy,
                               Transport& transport);

struct GetObservation {
  std::string api_name;
  bool succeeded = false;
  /// Only json paths some catalog entry consumes.
  std::map<std::string, std::vector<std::string>> extracted;
  int raw_code = 0;
  int attempts = 0;
};

struct ProbeCredentials {
  std::string access_token;
  std::string app_id;
  std::string app_secret;
};

/// Values at a dotted path; a "[]" suffix fans out over an array, e.g.
/// "list[].openid". Strings are returned as-is, numbers in JSON form.
std::vector<std::string> extract_json_path(const nlohmann::json& doc,
                                           std::string_view path);

/// Calls allowlisted Get APIs that feed some other API's parameters, in
/// dependency order, never more than `per_api_call_budget` times each.
std::vector<GetObservation> probe_get_apis(const ProbeCredentials& creds,
                                           const ScanFinding& finding,
                                           const ApiCatalog& catalog,
                                           const ProbePolicy& policy,
                                           Transport& transport);

enum class Verdict { kCallable, kNotCallable, kUnknown };
std::string_view to_string(Verdict v);
Verdict verdict_from_string(std::string_view s);

struct CallabilityVerdict {
  std::string api_name;
  Verdict verdict = Verdict::kNotCallable;
  std::map<std::string, std::string> resolved_params;
  std::vector<std::string> missing_params;
};

struct ResolutionContext {
  bool token_issued = false;
  bool pair_validated = false;
  /// CODE_EXTRACTED tags with at least one value in the package.
  std::set<std::string> code_extractables;
};

std::set<std::string> extractable_tags(const ScanFinding& finding);

/// Least fixpoint over parameter provenance. A FROM_GET_RESPONSE source
/// resolves when its observation extracted a value at the path and the
/// source API is itself callable. A Get API whose own probe the server
/// refused is not callable and lists "refused:<code>" as missing. UNKNOWN
/// marks APIs whose only gaps hinge on Get APIs that were never probed.
std::vector<CallabilityVerdict> resolve_callability(
    const ApiCatalog& catalog, const ResolutionContext& context,
    const std::vector<GetObservation>& observations);

std::vector<CallabilityVerdict> resolve_callability(
    const ApiCatalog& catalog, const std::optional<ProbeOutcome>& token_outcome,
    const std::vector<GetObservation>& observations,
    const ScanFinding& finding);

}  // namespace miniscope
