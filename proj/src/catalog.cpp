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

#include "miniscope/catalog.hpp"

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <queue>
#include <set>

#include "miniscope/util.hpp"

namespace miniscope {

using nlohmann::json;

std::string_view to_string(ApiKind k) {
  return k == ApiKind::kGet ? "Get" : "Modify";
}

std::string_view to_string(HttpMethod m) {
  return m == HttpMethod::kGet ? "GET" : "POST";
}

std::string_view to_string(Severity s) {
  switch (s) {
    case Severity::kHigh:
      return "High";
    case Severity::kMedium:
      return "Medium";
    case Severity::kLow:
      return "Low";
    case Severity::kNone:
      return "None";
  }
  return "None";
}

Severity severity_from_string(std::string_view s) {
  if (s == "High") return Severity::kHigh;
  if (s == "Medium") return Severity::kMedium;
  if (s == "Low") return Severity::kLow;
  if (s == "None") return Severity::kNone;
  throw CatalogError(CatalogErrc::kSchemaError,
                     "unknown severity '" + std::string(s) + "'");
}

ImpactFlags ImpactFlags::from_letters(std::string_view letters) {
  std::uint8_t bits = 0;
  for (char c : letters) {
    if (c < 'A' || c > 'E') {
      throw CatalogError(CatalogErrc::kSchemaError,
                         std::string("unknown impact flag '") + c + "'");
    }
    bits = static_cast<std::uint8_t>(bits | (1 << (c - 'A')));
  }
  return ImpactFlags(bits);
}

std::string ImpactFlags::letters() const {
  std::string out;
  for (char c = 'A'; c <= 'E'; ++c) {
    if (has_letter(c)) out.push_back(c);
  }
  return out;
}

std::string_view to_string(ProvenanceType t) {
  switch (t) {
    case ProvenanceType::kAccessToken:
      return "ACCESS_TOKEN";
    case ProvenanceType::kAppId:
      return "APP_ID";
    case ProvenanceType::kAppSecret:
      return "APP_SECRET";
    case ProvenanceType::kFromGetResponse:
      return "FROM_GET_RESPONSE";
    case ProvenanceType::kCodeExtracted:
      return "CODE_EXTRACTED";
    case ProvenanceType::kAttackerControlled:
      return "ATTACKER_CONTROLLED";
  }
  return "ATTACKER_CONTROLLED";
}

std::string Provenance::describe() const {
  std::string out(to_string(type));
  if (type == ProvenanceType::kFromGetResponse) {
    out += "(" + api + ":" + json_path + ")";
  } else if (type == ProvenanceType::kCodeExtracted) {
    out += "(" + extractor + ")";
  }
  return out;
}

bool ApiSpec::needs(ProvenanceType t) const {
  for (const auto& p : params) {
    for (const auto& s : p.sources) {
      if (s.type == t) return true;
    }
  }
  return false;
}

std::string_view to_string(CatalogErrc code) {
  switch (code) {
    case CatalogErrc::kSchemaError:
      return "SchemaError";
    case CatalogErrc::kUnknownReference:
      return "UnknownReference";
    case CatalogErrc::kCyclicDependency:
      return "CyclicDependency";
    case CatalogErrc::kModifyProbeAllowed:
      return "ModifyProbeAllowed";
    case CatalogErrc::kUnknownApi:
      return "UnknownApi";
  }
  return "Unknown";
}

namespace {

[[noreturn]] void schema(const std::string& what) {
  throw CatalogError(CatalogErrc::kSchemaError, what);
}

bool is_extractor_tag(std::string_view tag) {
  return tag == kExtractCloudEnvId || tag == kExtractCloudFunctionName ||
         tag == kExtractOpenIdInCode;
}

bool single_source_of(const ParamRequirement& p, ProvenanceType t) {
  return p.sources.size() == 1 && p.sources.front().type == t;
}

void validate_token_endpoint(const ApiSpec& token) {
  if (token.name.empty()) schema("token_endpoint needs a name");
  bool has_id = false, has_secret = false;
  for (const auto& p : token.params) {
    if (single_source_of(p, ProvenanceType::kAppId)) {
      has_id = true;
    } else if (single_source_of(p, ProvenanceType::kAppSecret)) {
      has_secret = true;
    } else {
      schema("token_endpoint params must be APP_ID and APP_SECRET only");
    }
  }
  if (!has_id || !has_secret || token.params.size() != 2) {
    schema("token_endpoint needs exactly APP_ID + APP_SECRET");
  }
}

}  // namespace

ApiCatalog::ApiCatalog(Platform platform, ApiSpec token_endpoint,
                       std::vector<ApiSpec> apis,
                       std::vector<DirectInvocationPattern> direct_only)
    : platform_(platform),
      token_endpoint_(std::move(token_endpoint)),
      apis_(std::move(apis)),
      direct_only_(std::move(direct_only)) {
  validate_token_endpoint(token_endpoint_);
  std::set<std::string, std::less<>> paths{token_endpoint_.endpoint_path};
  std::set<std::string, std::less<>> all_names{token_endpoint_.name};
  for (std::size_t i = 0; i < apis_.size(); ++i) {
    const ApiSpec& api = apis_[i];
    if (api.name.empty()) schema("api without a name");
    if (!index_.emplace(api.name, i).second ||
        !all_names.insert(api.name).second) {
      schema("duplicate api '" + api.name + "'");
    }
    if (api.endpoint_path.empty() || api.endpoint_path.front() != '/') {
      schema("api '" + api.name + "' endpoint_path must start with '/'");
    }
    if (!paths.insert(api.endpoint_path).second) {
      schema("endpoint_path '" + api.endpoint_path + "' used twice");
    }
    if (api.severity == Severity::kNone) {
      schema("api '" + api.name + "' needs a severity");
    }
    if (api.kind == ApiKind::kModify && api.probe_allowed) {
      throw CatalogError(CatalogErrc::kModifyProbeAllowed,
                         "Modify api '" + api.name +
                             "' must have probe_allowed=false");
    }
  }
  for (const auto& d : direct_only_) {
    if (d.name.empty() || d.endpoint_path.empty()) {
      schema("direct invocation pattern needs name and endpoint_path");
    }
    if (!all_names.insert(d.name).second) {
      schema("duplicate api '" + d.name + "'");
    }
  }

  for (const ApiSpec& api : apis_) {
    for (const auto& p : api.params) {
      if (p.name.empty() || p.sources.empty()) {
        schema("api '" + api.name + "' has a param without sources");
      }
      for (const auto& s : p.sources) {
        if (s.type == ProvenanceType::kFromGetResponse) {
          const ApiSpec* ref = find(s.api);
          if (ref == nullptr) {
            throw CatalogError(CatalogErrc::kUnknownReference,
                               "api '" + api.name + "' references unknown '" +
                                   s.api + "'");
          }
          if (ref->kind != ApiKind::kGet) {
            schema("api '" + api.name + "' depends on non-Get '" + s.api +
                   "'");
          }
          if (s.json_path.empty()) schema("FROM_GET_RESPONSE needs json_path");
        } else if (s.type == ProvenanceType::kCodeExtracted) {
          if (!is_extractor_tag(s.extractor)) {
            schema("unknown extractor tag '" + s.extractor + "'");
          }
        }
      }
    }
  }

  // Cycle check over FROM_GET_RESPONSE edges.
  enum class Mark { kWhite, kGrey, kBlack };
  std::vector<Mark> mark(apis_.size(), Mark::kWhite);
  std::function<void(std::size_t)> visit = [&](std::size_t i) {
    mark[i] = Mark::kGrey;
    for (const auto& p : apis_[i].params) {
      for (const auto& s : p.sources) {
        if (s.type != ProvenanceType::kFromGetResponse) continue;
        const std::size_t j = index_of(s.api);
        if (mark[j] == Mark::kGrey) {
          throw CatalogError(CatalogErrc::kCyclicDependency,
                             "dependency cycle through '" + apis_[i].name +
                                 "' and '" + apis_[j].name + "'");
        }
        if (mark[j] == Mark::kWhite) visit(j);
      }
    }
    mark[i] = Mark::kBlack;
  };
  for (std::size_t i = 0; i < apis_.size(); ++i) {
    if (mark[i] == Mark::kWhite) visit(i);
  }
}

const ApiSpec* ApiCatalog::find(std::string_view name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &apis_[it->second];
}

const ApiSpec& ApiCatalog::at(std::string_view name) const {
  const ApiSpec* api = find(name);
  if (api == nullptr) {
    throw CatalogError(CatalogErrc::kUnknownApi,
                       "unknown api '" + std::string(name) + "'");
  }
  return *api;
}

std::size_t ApiCatalog::index_of(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw CatalogError(CatalogErrc::kUnknownApi,
                       "unknown api '" + std::string(name) + "'");
  }
  return it->second;
}

const ApiSpec* ApiCatalog::find_by_path(std::string_view path) const {
  if (path == token_endpoint_.endpoint_path) return &token_endpoint_;
  for (const auto& api : apis_) {
    if (api.endpoint_path == path) return &api;
  }
  return nullptr;
}

std::vector<DirectInvocationPattern> ApiCatalog::invocation_patterns() const {
  std::vector<DirectInvocationPattern> out;
  out.push_back({token_endpoint_.name, token_endpoint_.category,
                 token_endpoint_.endpoint_path});
  for (const auto& api : apis_) {
    out.push_back({api.name, api.category, api.endpoint_path});
  }
  out.insert(out.end(), direct_only_.begin(), direct_only_.end());
  return out;
}

bool ApiCatalog::knows_invocation_name(std::string_view name) const {
  if (name == token_endpoint_.name || find(name) != nullptr) return true;
  return std::any_of(direct_only_.begin(), direct_only_.end(),
                     [&](const auto& d) { return d.name == name; });
}

std::size_t ApiCatalog::count(ApiKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(apis_.begin(), apis_.end(),
                    [&](const ApiSpec& a) { return a.kind == kind; }));
}

namespace {

template <typename T>
T required(const json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) schema(where + ": missing '" + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    schema(where + ": wrong type for '" + key + "'");
  }
}

Provenance parse_provenance(const json& j, const std::string& where) {
  if (!j.is_object()) schema(where + ": provenance must be an object");
  Provenance p;
  const auto type = required<std::string>(j, "type", where);
  if (type == "ACCESS_TOKEN") {
    p.type = ProvenanceType::kAccessToken;
  } else if (type == "APP_ID") {
    p.type = ProvenanceType::kAppId;
  } else if (type == "APP_SECRET") {
    p.type = ProvenanceType::kAppSecret;
  } else if (type == "FROM_GET_RESPONSE") {
    p.type = ProvenanceType::kFromGetResponse;
    p.api = required<std::string>(j, "api", where);
    p.json_path = required<std::string>(j, "json_path", where);
  } else if (type == "CODE_EXTRACTED") {
    p.type = ProvenanceType::kCodeExtracted;
    p.extractor = required<std::string>(j, "extractor", where);
  } else if (type == "ATTACKER_CONTROLLED") {
    p.type = ProvenanceType::kAttackerControlled;
  } else {
    schema(where + ": unknown provenance type '" + type + "'");
  }
  return p;
}

ApiSpec parse_api(const json& j, Platform platform, bool token) {
  if (!j.is_object()) schema("api entries must be objects");
  ApiSpec api;
  api.name = required<std::string>(j, "name", "api");
  const std::string where = "api '" + api.name + "'";
  api.platform = platform;
  api.category = j.value("category", std::string{});
  api.endpoint_path = required<std::string>(j, "endpoint_path", where);
  const auto method = j.value("http_method", std::string("GET"));
  if (method == "GET") {
    api.http_method = HttpMethod::kGet;
  } else if (method == "POST") {
    api.http_method = HttpMethod::kPost;
  } else {
    schema(where + ": http_method must be GET or POST");
  }
  const auto kind = token ? j.value("kind", std::string("Get"))
                          : required<std::string>(j, "kind", where);
  if (kind == "Get") {
    api.kind = ApiKind::kGet;
  } else if (kind == "Modify") {
    api.kind = ApiKind::kModify;
  } else {
    schema(where + ": kind must be Get or Modify");
  }
  const auto params = j.find("params");
  if (params == j.end() || !params->is_array()) {
    schema(where + ": params must be an array");
  }
  for (const auto& pj : *params) {
    ParamRequirement req;
    req.name = required<std::string>(pj, "name", where + " param");
    const auto prov = pj.find("provenance");
    if (prov == pj.end()) schema(where + ": param without provenance");
    if (prov->is_array()) {
      for (const auto& alt : *prov) {
        req.sources.push_back(parse_provenance(alt, where));
      }
    } else {
      req.sources.push_back(parse_provenance(*prov, where));
    }
    api.params.push_back(std::move(req));
  }
  if (token) {
    std::string letters;
    if (j.contains("impact_flags")) {
      for (const auto& f : j.at("impact_flags")) letters += f.get<std::string>();
    }
    api.impact_flags = ImpactFlags::from_letters(letters);
    api.severity = severity_from_string(j.value("severity", std::string("None")));
    api.probe_allowed = j.value("probe_allowed", false);
  } else {
    const auto flags = j.find("impact_flags");
    if (flags == j.end() || !flags->is_array()) {
      schema(where + ": impact_flags must be an array");
    }
    std::string letters;
    for (const auto& f : *flags) {
      if (!f.is_string()) schema(where + ": impact flags are strings");
      letters += f.get<std::string>();
    }
    api.impact_flags = ImpactFlags::from_letters(letters);
    api.severity =
        severity_from_string(required<std::string>(j, "severity", where));
    api.probe_allowed = required<bool>(j, "probe_allowed", where);
  }
  api.feature = j.value("feature", std::string{});
  return api;
}

json provenance_to_json(const Provenance& p) {
  json j{{"type", std::string(to_string(p.type))}};
  if (p.type == ProvenanceType::kFromGetResponse) {
    j["api"] = p.api;
    j["json_path"] = p.json_path;
  } else if (p.type == ProvenanceType::kCodeExtracted) {
    j["extractor"] = p.extractor;
  }
  return j;
}

json api_to_json(const ApiSpec& api) {
  json params = json::array();
  for (const auto& p : api.params) {
    json prov;
    if (p.sources.size() == 1) {
      prov = provenance_to_json(p.sources.front());
    } else {
      prov = json::array();
      for (const auto& s : p.sources) prov.push_back(provenance_to_json(s));
    }
    params.push_back({{"name", p.name}, {"provenance", prov}});
  }
  json flags = json::array();
  for (char c : api.impact_flags.letters()) flags.push_back(std::string(1, c));
  json j{{"name", api.name},
         {"category", api.category},
         {"endpoint_path", api.endpoint_path},
         {"http_method", std::string(to_string(api.http_method))},
         {"kind", std::string(to_string(api.kind))},
         {"params", params},
         {"impact_flags", flags},
         {"severity", std::string(to_string(api.severity))},
         {"probe_allowed", api.probe_allowed}};
  if (!api.feature.empty()) j["feature"] = api.feature;
  return j;
}

}  // namespace

ApiCatalog load_catalog(std::string_view document) {
  const json doc = json::parse(document, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    schema("catalog is not a JSON object");
  }
  Platform platform;
  try {
    platform = platform_from_string(required<std::string>(doc, "platform", "catalog"));
  } catch (const std::invalid_argument& e) {
    schema(e.what());
  }
  const auto token = doc.find("token_endpoint");
  if (token == doc.end()) schema("catalog: missing 'token_endpoint'");
  ApiSpec token_api = parse_api(*token, platform, true);

  const auto apis_j = doc.find("apis");
  if (apis_j == doc.end() || !apis_j->is_array()) {
    schema("catalog: 'apis' must be an array");
  }
  std::vector<ApiSpec> apis;
  for (const auto& a : *apis_j) apis.push_back(parse_api(a, platform, false));

  std::vector<DirectInvocationPattern> direct;
  if (auto d = doc.find("direct_invocation_only"); d != doc.end()) {
    if (!d->is_array()) schema("direct_invocation_only must be an array");
    for (const auto& e : *d) {
      direct.push_back({required<std::string>(e, "name", "pattern"),
                        e.value("category", std::string{}),
                        required<std::string>(e, "endpoint_path", "pattern")});
    }
  }
  return ApiCatalog(platform, std::move(token_api), std::move(apis),
                    std::move(direct));
}

ApiCatalog load_catalog_file(const std::string& path) {
  return load_catalog(read_file(path));
}

json catalog_to_json(const ApiCatalog& catalog) {
  json apis = json::array();
  for (const auto& api : catalog.apis()) apis.push_back(api_to_json(api));
  json direct = json::array();
  for (const auto& d : catalog.direct_only()) {
    direct.push_back({{"name", d.name},
                      {"category", d.category},
                      {"endpoint_path", d.endpoint_path}});
  }
  return json{{"schema_version", 1},
              {"platform", std::string(to_string(catalog.platform()))},
              {"token_endpoint", api_to_json(catalog.token_endpoint())},
              {"apis", apis},
              {"direct_invocation_only", direct}};
}

namespace {

std::vector<std::size_t> direct_dependencies(const ApiCatalog& catalog,
                                             const ApiSpec& api) {
  std::vector<std::size_t> out;
  for (const auto& p : api.params) {
    for (const auto& s : p.sources) {
      if (s.type == ProvenanceType::kFromGetResponse) {
        out.push_back(catalog.index_of(s.api));
      }
    }
  }
  return out;
}

}  // namespace

std::vector<std::string> dependency_closure(const ApiCatalog& catalog,
                                            std::string_view api_name) {
  const ApiSpec& target = catalog.at(api_name);
  const auto& apis = catalog.apis();

  std::set<std::size_t> closure;
  std::vector<std::size_t> stack = direct_dependencies(catalog, target);
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    if (!closure.insert(i).second) continue;
    for (std::size_t j : direct_dependencies(catalog, apis[i])) {
      stack.push_back(j);
    }
  }

  // Kahn's algorithm restricted to the closure, catalog order breaking ties.
  std::map<std::size_t, std::size_t> pending;
  for (std::size_t i : closure) {
    std::set<std::size_t> deps;
    for (std::size_t j : direct_dependencies(catalog, apis[i])) deps.insert(j);
    pending[i] = deps.size();
  }
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>>
      ready;
  for (const auto& [i, n] : pending) {
    if (n == 0) ready.push(i);
  }
  std::vector<std::string> order;
  while (!ready.empty()) {
    const std::size_t i = ready.top();
    ready.pop();
    order.push_back(apis[i].name);
    for (std::size_t k : closure) {
      std::set<std::size_t> deps;
      for (std::size_t j : direct_dependencies(catalog, apis[k])) deps.insert(j);
      if (deps.count(i) && --pending[k] == 0) ready.push(k);
    }
  }
  return order;
}

std::vector<std::string> feeding_get_apis(const ApiCatalog& catalog) {
  std::set<std::string> feeders;
  for (const auto& api : catalog.apis()) {
    for (auto& name : dependency_closure(catalog, api.name)) {
      feeders.insert(std::move(name));
    }
  }
  // Topological order over the whole catalog keeps producers first.
  std::vector<std::string> ordered;
  std::set<std::string> placed;
  std::function<void(const std::string&)> place = [&](const std::string& n) {
    if (placed.count(n)) return;
    for (const auto& dep : dependency_closure(catalog, n)) place(dep);
    placed.insert(n);
    ordered.push_back(n);
  };
  for (const auto& api : catalog.apis()) {
    if (feeders.count(api.name)) place(api.name);
  }
  return ordered;
}

std::string shipped_data_path(std::string_view relative) {
  const char* env = std::getenv("MINISCOPE_DATA_DIR");
  std::string base = env != nullptr && *env != '\0' ? env : MINISCOPE_DATA_DIR;
  return base + "/" + std::string(relative);
}

}  // namespace miniscope
