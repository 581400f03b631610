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

#include "miniscope/prober.hpp"

#include <algorithm>
#include <stdexcept>

#include "miniscope/errcodes.hpp"
#include "miniscope/util.hpp"

namespace miniscope {

using nlohmann::json;

std::string_view to_string(TokenClass c) {
  switch (c) {
    case TokenClass::kTokenIssued:
      return "TOKEN_ISSUED";
    case TokenClass::kInvalidCredential:
      return "INVALID_CREDENTIAL";
    case TokenClass::kIpNotWhitelisted:
      return "IP_NOT_WHITELISTED";
    case TokenClass::kUserLimited:
      return "USER_LIMITED";
    case TokenClass::kQuotaExceeded:
      return "QUOTA_EXCEEDED";
    case TokenClass::kTransportError:
      return "TRANSPORT_ERROR";
  }
  return "TRANSPORT_ERROR";
}

TokenClass token_class_from_string(std::string_view s) {
  for (auto c : {TokenClass::kTokenIssued, TokenClass::kInvalidCredential,
                 TokenClass::kIpNotWhitelisted, TokenClass::kUserLimited,
                 TokenClass::kQuotaExceeded, TokenClass::kTransportError}) {
    if (to_string(c) == s) return c;
  }
  throw std::invalid_argument("unknown token classification: " +
                              std::string(s));
}

std::string_view to_string(WhitelistCheck w) {
  switch (w) {
    case WhitelistCheck::kWhitelistedElsewhere:
      return "WHITELISTED_ELSEWHERE";
    case WhitelistCheck::kNotWhitelisted:
      return "NOT_WHITELISTED";
    case WhitelistCheck::kIndeterminate:
      return "INDETERMINATE";
  }
  return "INDETERMINATE";
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::kCallable:
      return "CALLABLE";
    case Verdict::kNotCallable:
      return "NOT_CALLABLE";
    case Verdict::kUnknown:
      return "UNKNOWN";
  }
  return "NOT_CALLABLE";
}

Verdict verdict_from_string(std::string_view s) {
  for (auto v : {Verdict::kCallable, Verdict::kNotCallable, Verdict::kUnknown}) {
    if (to_string(v) == s) return v;
  }
  throw std::invalid_argument("unknown verdict: " + std::string(s));
}

namespace {

std::optional<json> parse_object(std::string_view body) {
  json doc = json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded() || !doc.is_object()) return std::nullopt;
  return doc;
}

// Integer errcode, 0 when absent; nullopt when present but not an integer.
std::optional<int> errcode_of(const json& doc) {
  auto it = doc.find("errcode");
  if (it == doc.end()) return 0;
  if (!it->is_number_integer()) return std::nullopt;
  auto v = it->get<std::int64_t>();
  if (v < INT32_MIN || v > INT32_MAX) return std::nullopt;
  return static_cast<int>(v);
}

bool has_token(const json& doc) {
  auto it = doc.find("access_token");
  return it != doc.end() && it->is_string() && !it->get<std::string>().empty();
}

}  // namespace

TokenClass classify_response(int status, std::string_view body) {
  (void)status;  // the platform reports errors in the body, not the status
  auto doc = parse_object(body);
  if (!doc) return TokenClass::kTransportError;
  auto code = errcode_of(*doc);
  if (!code) return TokenClass::kTransportError;
  switch (*code) {
    case errc::kOk:
      return has_token(*doc) ? TokenClass::kTokenIssued
                             : TokenClass::kTransportError;
    case errc::kInvalidCredential:
      return TokenClass::kInvalidCredential;
    case errc::kIpNotWhitelisted:
      return TokenClass::kIpNotWhitelisted;
    case errc::kUserLimited:
      return TokenClass::kUserLimited;
    case errc::kQuotaExceeded:
      return TokenClass::kQuotaExceeded;
    default:
      return TokenClass::kTransportError;
  }
}

ProbeOutcome interpret_token_response(const HttpResponse& response) {
  ProbeOutcome out;
  if (response.status == 0) {
    out.classification = TokenClass::kTransportError;
    out.raw_code = errc::kTransportFailure;
    out.raw_message = response.error.empty() ? "no response" : response.error;
    return out;
  }
  out.classification = classify_response(response.status, response.body);
  auto doc = parse_object(response.body);
  if (!doc) {
    out.raw_code = errc::kTransportFailure;
    out.raw_message = "unparseable body";
    return out;
  }
  out.raw_code = errcode_of(*doc).value_or(errc::kTransportFailure);
  if (auto it = doc->find("errmsg"); it != doc->end() && it->is_string()) {
    out.raw_message = it->get<std::string>();
  }
  if (out.classification == TokenClass::kTokenIssued) {
    out.access_token = (*doc)["access_token"].get<std::string>();
    if (auto it = doc->find("expires_in");
        it != doc->end() && it->is_number_integer()) {
      out.expires_in = it->get<std::int64_t>();
    }
  }
  return out;
}

bool pair_validated(const ProbeOutcome& outcome) {
  return outcome.classification == TokenClass::kTokenIssued ||
         outcome.classification == TokenClass::kQuotaExceeded;
}

std::string make_dummy_secret(std::uint64_t seed) {
  static constexpr char kHex[] = "0123456789abcdef";
  SeededRng rng(seed ^ 0x5eed5ec7e7ULL);
  std::string s(32, '0');
  for (auto& c : s) c = kHex[rng.below(16)];
  return s;
}

ProbePolicy ProbePolicy::defaults_for(const ApiCatalog& catalog,
                                      std::uint64_t seed) {
  ProbePolicy p;
  for (const auto& api : catalog.apis()) {
    if (api.kind == ApiKind::kGet && api.probe_allowed) {
      p.get_allowlist.insert(api.name);
    }
  }
  p.dummy_secret = make_dummy_secret(seed);
  return p;
}

void ProbePolicy::validate(const ApiCatalog& catalog) const {
  if (per_api_call_budget < 1) {
    throw std::invalid_argument("per_api_call_budget must be at least 1");
  }
  if (min_interval.count() < 0) {
    throw std::invalid_argument("min_interval must not be negative");
  }
  if (dummy_secret.size() != 32) {
    throw std::invalid_argument("dummy_secret must have 32 characters");
  }
  for (const auto& name : get_allowlist) {
    const ApiSpec* api = catalog.find(name);
    if (api == nullptr) {
      throw std::invalid_argument("allowlisted API not in catalog: " + name);
    }
    if (api->kind != ApiKind::kGet) {
      throw std::invalid_argument("Modify API in Get allowlist: " + name);
    }
    if (!api->probe_allowed) {
      throw std::invalid_argument("API is not probe-allowed: " + name);
    }
  }
}

ProbeOutcome acquire_token(std::string_view app_id, std::string_view secret,
                           const ApiCatalog& catalog, Transport& transport) {
  HttpRequest req;
  req.method = HttpMethod::kGet;
  req.path = catalog.token_endpoint().endpoint_path;
  req.query = {{"grant_type", "client_credential"},
               {"appid", std::string(app_id)},
               {"secret", std::string(secret)}};
  return interpret_token_response(transport.send(req));
}

ProbeOutcome acquire_token(const CredentialPair& pair,
                           const ApiCatalog& catalog, Transport& transport) {
  return acquire_token(pair.app_id.value, pair.app_secret.value, catalog,
                       transport);
}

WhitelistCheck check_whitelist(std::string_view app_id,
                               const ApiCatalog& catalog,
                               const ProbePolicy& policy,
                               Transport& transport) {
  auto outcome = acquire_token(app_id, policy.dummy_secret, catalog, transport);
  switch (outcome.classification) {
    case TokenClass::kIpNotWhitelisted:
      return WhitelistCheck::kWhitelistedElsewhere;
    case TokenClass::kInvalidCredential:
      return WhitelistCheck::kNotWhitelisted;
    default:
      return WhitelistCheck::kIndeterminate;
  }
}

namespace {

std::string scalar_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

void collect(const json& node, const std::vector<std::string_view>& segs,
             std::size_t i, std::vector<std::string>& out) {
  if (i == segs.size()) {
    if (node.is_array()) {
      for (const auto& e : node) {
        if (e.is_primitive() && !e.is_null()) out.push_back(scalar_text(e));
      }
    } else if (node.is_primitive() && !node.is_null()) {
      out.push_back(scalar_text(node));
    }
    return;
  }
  std::string_view seg = segs[i];
  bool fan_out = ends_with(seg, "[]");
  if (fan_out) seg.remove_suffix(2);
  if (!node.is_object()) return;
  auto it = node.find(std::string(seg));
  if (it == node.end()) return;
  if (!fan_out) {
    collect(*it, segs, i + 1, out);
    return;
  }
  if (!it->is_array()) return;
  for (const auto& element : *it) collect(element, segs, i + 1, out);
}

}  // namespace

std::vector<std::string> extract_json_path(const json& doc,
                                           std::string_view path) {
  std::vector<std::string_view> segs;
  std::size_t start = 0;
  while (start <= path.size()) {
    auto dot = path.find('.', start);
    if (dot == std::string_view::npos) dot = path.size();
    segs.push_back(path.substr(start, dot - start));
    start = dot + 1;
  }
  std::vector<std::string> out;
  if (path.empty()) return out;
  collect(doc, segs, 0, out);
  return out;
}

std::vector<GetObservation> probe_get_apis(const ProbeCredentials& creds,
                                           const ScanFinding& finding,
                                           const ApiCatalog& catalog,
                                           const ProbePolicy& policy,
                                           Transport& transport) {
  std::vector<GetObservation> observations;
  if (!policy.allow_get_probing || creds.access_token.empty()) {
    return observations;
  }
  std::map<std::string, std::set<std::string>> consumed;
  for (const auto& api : catalog.apis()) {
    for (const auto& param : api.params) {
      for (const auto& src : param.sources) {
        if (src.type == ProvenanceType::kFromGetResponse) {
          consumed[src.api].insert(src.json_path);
        }
      }
    }
  }
  std::map<std::string, std::vector<std::string>> code_values = {
      {std::string(kExtractCloudEnvId), finding.cloud_env_ids},
      {std::string(kExtractCloudFunctionName), finding.cloud_function_names},
      {std::string(kExtractOpenIdInCode), finding.openids_in_code},
  };
  auto observed = [&](const std::string& api) -> const GetObservation* {
    for (const auto& o : observations) {
      if (o.api_name == api) return &o;
    }
    return nullptr;
  };

  for (const auto& name : feeding_get_apis(catalog)) {
    const ApiSpec& api = catalog.at(name);
    if (api.kind != ApiKind::kGet || !api.probe_allowed ||
        !policy.get_allowlist.count(name)) {
      continue;
    }
    GetObservation obs;
    obs.api_name = name;

    std::vector<std::pair<std::string, std::string>> args;
    bool fillable = true;
    for (const auto& param : api.params) {
      std::optional<std::string> value;
      for (const auto& src : param.sources) {
        switch (src.type) {
          case ProvenanceType::kAccessToken:
            value = creds.access_token;
            break;
          case ProvenanceType::kAppId:
            if (!creds.app_id.empty()) value = creds.app_id;
            break;
          case ProvenanceType::kAppSecret:
            if (!creds.app_secret.empty()) value = creds.app_secret;
            break;
          case ProvenanceType::kFromGetResponse:
            if (const auto* o = observed(src.api)) {
              auto it = o->extracted.find(src.json_path);
              if (it != o->extracted.end() && !it->second.empty()) {
                value = it->second.front();
              }
            }
            break;
          case ProvenanceType::kCodeExtracted: {
            auto it = code_values.find(src.extractor);
            if (it != code_values.end() && !it->second.empty()) {
              value = it->second.front();
            }
            break;
          }
          case ProvenanceType::kAttackerControlled:
            value = "0";
            break;
        }
        if (value) break;
      }
      if (!value) {
        fillable = false;
        break;
      }
      args.emplace_back(param.name, *value);
    }
    if (!fillable) {
      obs.raw_code = errc::kNotAttempted;
      observations.push_back(std::move(obs));
      continue;
    }

    HttpRequest req;
    req.method = api.http_method;
    req.path = api.endpoint_path;
    json body = json::object();
    for (auto& [k, v] : args) {
      if (api.http_method == HttpMethod::kGet || k == "access_token") {
        req.query.emplace_back(k, v);
      } else {
        body[k] = v;
      }
    }
    if (api.http_method == HttpMethod::kPost) req.body = body.dump();

    std::optional<json> doc;
    obs.raw_code = errc::kTransportFailure;
    for (int attempt = 0; attempt < policy.per_api_call_budget; ++attempt) {
      ++obs.attempts;
      HttpResponse resp = transport.send(req);
      if (resp.status == 0) continue;
      doc = parse_object(resp.body);
      if (!doc) continue;
      obs.raw_code = errcode_of(*doc).value_or(errc::kTransportFailure);
      break;
    }
    obs.succeeded = doc.has_value() && obs.raw_code == errc::kOk;
    if (obs.succeeded) {
      for (const auto& path : consumed[name]) {
        auto values = extract_json_path(*doc, path);
        if (!values.empty()) obs.extracted[path] = std::move(values);
      }
    }
    observations.push_back(std::move(obs));
  }
  return observations;
}

std::set<std::string> extractable_tags(const ScanFinding& finding) {
  std::set<std::string> tags;
  if (!finding.cloud_env_ids.empty()) tags.emplace(kExtractCloudEnvId);
  if (!finding.cloud_function_names.empty()) {
    tags.emplace(kExtractCloudFunctionName);
  }
  if (!finding.openids_in_code.empty()) tags.emplace(kExtractOpenIdInCode);
  return tags;
}

std::vector<CallabilityVerdict> resolve_callability(
    const ApiCatalog& catalog, const ResolutionContext& context,
    const std::vector<GetObservation>& observations) {
  const auto& apis = catalog.apis();
  std::map<std::string, const GetObservation*> by_api;
  for (const auto& o : observations) by_api[o.api_name] = &o;

  auto has_values = [&](const Provenance& src) {
    auto it = by_api.find(src.api);
    if (it == by_api.end()) return false;
    auto v = it->second->extracted.find(src.json_path);
    return v != it->second->extracted.end() && !v->second.empty();
  };

  // A Get API the server itself refused (feature blocked, quota, ...) is
  // not callable whatever its parameters say.
  std::vector<int> refused(apis.size(), 0);
  for (std::size_t i = 0; i < apis.size(); ++i) {
    auto it = by_api.find(apis[i].name);
    if (it != by_api.end() && !it->second->succeeded &&
        it->second->raw_code > 0) {
      refused[i] = it->second->raw_code;
    }
  }

  std::vector<bool> callable(apis.size(), false);
  auto source_resolves = [&](const Provenance& src) {
    switch (src.type) {
      case ProvenanceType::kAccessToken:
        return context.token_issued;
      case ProvenanceType::kAppId:
      case ProvenanceType::kAppSecret:
        return context.pair_validated;
      case ProvenanceType::kFromGetResponse:
        return has_values(src) && callable[catalog.index_of(src.api)];
      case ProvenanceType::kCodeExtracted:
        return context.code_extractables.count(src.extractor) > 0;
      case ProvenanceType::kAttackerControlled:
        return true;
    }
    return false;
  };

  // Jacobi rounds from all-false; the step is monotone, so this reaches
  // the least fixpoint.
  for (std::size_t round = 0; round <= apis.size(); ++round) {
    std::vector<bool> next(apis.size(), false);
    for (std::size_t i = 0; i < apis.size(); ++i) {
      next[i] = refused[i] == 0 && std::all_of(
          apis[i].params.begin(), apis[i].params.end(),
          [&](const ParamRequirement& p) {
            return std::any_of(p.sources.begin(), p.sources.end(),
                               source_resolves);
          });
    }
    if (next == callable) break;
    callable = std::move(next);
  }

  std::vector<CallabilityVerdict> verdicts;
  verdicts.reserve(apis.size());
  for (std::size_t i = 0; i < apis.size(); ++i) {
    const ApiSpec& api = apis[i];
    CallabilityVerdict v;
    v.api_name = api.name;
    bool hinges_on_unprobed = refused[i] == 0;
    for (const auto& p : api.params) {
      auto hit = std::find_if(p.sources.begin(), p.sources.end(),
                              source_resolves);
      if (hit != p.sources.end()) {
        v.resolved_params[p.name] = hit->describe();
        continue;
      }
      v.missing_params.push_back(p.name);
      bool unprobed_alt = std::any_of(
          p.sources.begin(), p.sources.end(), [&](const Provenance& s) {
            return s.type == ProvenanceType::kFromGetResponse &&
                   by_api.find(s.api) == by_api.end();
          });
      if (!unprobed_alt) hinges_on_unprobed = false;
    }
    if (refused[i] != 0) {
      v.missing_params.push_back("refused:" + std::to_string(refused[i]));
    }
    if (v.missing_params.empty()) {
      v.verdict = Verdict::kCallable;
    } else {
      v.verdict = hinges_on_unprobed ? Verdict::kUnknown : Verdict::kNotCallable;
    }
    verdicts.push_back(std::move(v));
  }
  return verdicts;
}

std::vector<CallabilityVerdict> resolve_callability(
    const ApiCatalog& catalog, const std::optional<ProbeOutcome>& token_outcome,
    const std::vector<GetObservation>& observations,
    const ScanFinding& finding) {
  ResolutionContext ctx;
  if (token_outcome) {
    ctx.token_issued =
        token_outcome->classification == TokenClass::kTokenIssued;
    ctx.pair_validated = pair_validated(*token_outcome);
  }
  ctx.code_extractables = extractable_tags(finding);
  return resolve_callability(catalog, ctx, observations);
}

}  // namespace miniscope
