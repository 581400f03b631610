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

#include "miniscope/report.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "miniscope/util.hpp"

namespace miniscope {

using nlohmann::json;

namespace {

[[noreturn]] void inconsistent(const std::string& what) {
  throw ReportError(ReportErrc::kInconsistentInputs, what);
}

}  // namespace

std::string_view to_string(WhitelistStatus s) {
  switch (s) {
    case WhitelistStatus::kEnabled:
      return "enabled";
    case WhitelistStatus::kDisabled:
      return "disabled";
    case WhitelistStatus::kIndeterminate:
      return "indeterminate";
  }
  return "indeterminate";
}

WhitelistStatus whitelist_status_from_string(std::string_view s) {
  if (s == "enabled") return WhitelistStatus::kEnabled;
  if (s == "disabled") return WhitelistStatus::kDisabled;
  if (s == "indeterminate") return WhitelistStatus::kIndeterminate;
  throw ReportError(ReportErrc::kParseError,
                    "unknown whitelist status: " + std::string(s));
}

std::string_view to_string(Transition t) {
  switch (t) {
    case Transition::kSameSecretStillValid:
      return "SAME_SECRET_STILL_VALID";
    case Transition::kRemovedButValid:
      return "REMOVED_BUT_VALID";
    case Transition::kRotatedRehardcoded:
      return "ROTATED_REHARDCODED";
    case Transition::kInvalidatedRemoved:
      return "INVALIDATED_REMOVED";
    case Transition::kWhitelistNewlyEnabled:
      return "WHITELIST_NEWLY_ENABLED";
    case Transition::kUnchangedClean:
      return "UNCHANGED_CLEAN";
    case Transition::kFoundInvalid:
      return "FOUND_INVALID";
  }
  return "UNCHANGED_CLEAN";
}

json to_json(const AppReport& r) {
  json j;
  j["schema_version"] = r.schema_version;
  j["package_id"] = r.package_id;
  j["app_id"] = r.app_id ? json(*r.app_id) : json(nullptr);
  j["platform"] = std::string(to_string(r.platform));
  j["status"] = r.status;
  if (!r.error.empty()) j["error"] = r.error;
  j["secret_found"] = r.secret_found;
  switch (r.secret_valid) {
    case SecretValidity::kValid:
      j["secret_valid"] = true;
      break;
    case SecretValidity::kInvalid:
      j["secret_valid"] = false;
      break;
    case SecretValidity::kUnvalidated:
      j["secret_valid"] = "unvalidated";
      break;
  }
  j["secret_source"] = r.secret_source;
  j["secret_fingerprint"] = r.secret_fingerprint;
  j["found_secret_fingerprints"] = r.found_secret_fingerprints;
  j["token_classification"] =
      r.token_classification
          ? json(std::string(to_string(*r.token_classification)))
          : json(nullptr);
  j["whitelist_status"] = std::string(to_string(r.whitelist_status));
  j["direct_invocation_count"] = r.direct_invocation_count;
  j["direct_invocations_by_category"] = r.direct_invocations_by_category;
  j["cloud_function_count"] = r.cloud_function_count;
  j["cloud_env_count"] = r.cloud_env_count;
  json verdicts = json::array();
  for (const auto& v : r.callability) {
    verdicts.push_back({{"api", v.api_name},
                        {"verdict", std::string(to_string(v.verdict))},
                        {"resolved_params", v.resolved_params},
                        {"missing_params", v.missing_params}});
  }
  j["callability"] = std::move(verdicts);
  j["consequence_flags"] = r.consequence_flags.letters();
  j["max_severity"] = std::string(to_string(r.max_severity));
  j["scanned_at"] = r.scanned_at;
  return j;
}

AppReport app_report_from_json(const json& j) {
  AppReport r;
  try {
    r.schema_version = j.at("schema_version").get<int>();
    if (r.schema_version != kReportSchemaVersion) {
      throw ReportError(ReportErrc::kParseError,
                        "unsupported schema_version " +
                            std::to_string(r.schema_version));
    }
    r.package_id = j.at("package_id").get<std::string>();
    if (!j.at("app_id").is_null()) r.app_id = j.at("app_id").get<std::string>();
    r.platform = platform_from_string(j.value("platform", "wechat-like"));
    r.status = j.value("status", "ok");
    r.error = j.value("error", "");
    r.secret_found = j.at("secret_found").get<bool>();
    const json& sv = j.at("secret_valid");
    if (sv.is_boolean()) {
      r.secret_valid =
          sv.get<bool>() ? SecretValidity::kValid : SecretValidity::kInvalid;
    } else {
      r.secret_valid = SecretValidity::kUnvalidated;
    }
    r.secret_source = j.value("secret_source", "");
    r.secret_fingerprint = j.value("secret_fingerprint", "");
    r.found_secret_fingerprints =
        j.value("found_secret_fingerprints", std::vector<std::string>{});
    if (j.contains("token_classification") &&
        !j.at("token_classification").is_null()) {
      r.token_classification = token_class_from_string(
          j.at("token_classification").get<std::string>());
    }
    r.whitelist_status = whitelist_status_from_string(
        j.value("whitelist_status", "indeterminate"));
    r.direct_invocation_count = j.value("direct_invocation_count", 0u);
    r.direct_invocations_by_category =
        j.value("direct_invocations_by_category",
                std::map<std::string, std::size_t>{});
    r.cloud_function_count = j.value("cloud_function_count", 0u);
    r.cloud_env_count = j.value("cloud_env_count", 0u);
    for (const auto& v : j.value("callability", json::array())) {
      CallabilityVerdict cv;
      cv.api_name = v.at("api").get<std::string>();
      cv.verdict = verdict_from_string(v.at("verdict").get<std::string>());
      cv.resolved_params = v.value("resolved_params",
                                   std::map<std::string, std::string>{});
      cv.missing_params =
          v.value("missing_params", std::vector<std::string>{});
      r.callability.push_back(std::move(cv));
    }
    r.consequence_flags =
        ImpactFlags::from_letters(j.value("consequence_flags", ""));
    r.max_severity = severity_from_string(j.value("max_severity", "None"));
    r.scanned_at = j.value("scanned_at", "");
  } catch (const ReportError&) {
    throw;
  } catch (const std::exception& e) {
    throw ReportError(ReportErrc::kParseError, e.what());
  }
  return r;
}

AppReport build_report(const ScanFinding& finding,
                       const ValidationResult& validation,
                       const ApiCatalog& catalog,
                       const std::string& scanned_at) {
  AppReport r;
  r.package_id = finding.package_id;
  r.platform = catalog.platform();
  r.scanned_at = scanned_at;
  r.app_id = validation.app_id;
  if (!r.app_id && finding.app_hint) r.app_id = finding.app_hint;

  auto secrets = finding.distinct_values(CandidateKind::kAppSecret);
  r.secret_found = !secrets.empty();
  for (const auto& s : secrets) {
    r.found_secret_fingerprints.push_back(sha256_hex(s));
  }
  std::sort(r.found_secret_fingerprints.begin(),
            r.found_secret_fingerprints.end());

  if (validation.token_outcome) {
    r.token_classification = validation.token_outcome->classification;
  }
  if (!validation.probed) {
    r.secret_valid = SecretValidity::kUnvalidated;
  } else if (validation.token_outcome &&
             pair_validated(*validation.token_outcome)) {
    r.secret_valid = SecretValidity::kValid;
  } else if (validation.token_outcome &&
             validation.token_outcome->classification ==
                 TokenClass::kTransportError) {
    r.secret_valid = SecretValidity::kUnvalidated;
  } else {
    r.secret_valid = r.secret_found || validation.external_pair
                         ? SecretValidity::kInvalid
                         : SecretValidity::kUnvalidated;
  }

  if (r.secret_valid == SecretValidity::kValid) {
    if (validation.tried_secret.empty()) {
      inconsistent(r.package_id + ": validated pair has no secret");
    }
    bool in_code = std::find(secrets.begin(), secrets.end(),
                             validation.tried_secret) != secrets.end();
    if (!in_code && !validation.external_pair) {
      inconsistent(r.package_id +
                   ": validated secret neither found nor supplied");
    }
    r.secret_source = in_code ? "code" : "external";
    r.secret_fingerprint = sha256_hex(validation.tried_secret);
  } else if (!secrets.empty()) {
    r.secret_source = "code";
    r.secret_fingerprint = sha256_hex(secrets.front());
  } else if (validation.external_pair) {
    r.secret_source = "external";
  }

  r.whitelist_status = validation.whitelist;
  if (r.token_issued() && r.whitelist_status == WhitelistStatus::kEnabled) {
    inconsistent(r.package_id + ": token issued to a whitelisted app");
  }

  r.direct_invocation_count = finding.direct_invocations.size();
  for (const auto& d : finding.direct_invocations) {
    ++r.direct_invocations_by_category[d.category];
  }
  r.cloud_function_count = finding.cloud_function_names.size();
  r.cloud_env_count = finding.cloud_env_ids.size();

  std::set<std::string> seen;
  for (const auto& v : validation.verdicts) {
    const ApiSpec* api = catalog.find(v.api_name);
    if (api == nullptr) inconsistent("verdict for unknown API " + v.api_name);
    if (!seen.insert(v.api_name).second) {
      inconsistent("duplicate verdict for " + v.api_name);
    }
    if ((v.verdict == Verdict::kCallable) != v.missing_params.empty()) {
      inconsistent("verdict/missing params mismatch for " + v.api_name);
    }
    if (v.verdict == Verdict::kCallable) {
      r.consequence_flags |= api->impact_flags;
      r.max_severity = std::max(r.max_severity, api->severity);
    }
    r.callability.push_back(v);
  }
  return r;
}

AppReport unpack_failure_report(const std::string& package_id,
                                std::optional<std::string> app_id,
                                Platform platform, const std::string& error,
                                const std::string& scanned_at) {
  AppReport r;
  r.package_id = package_id;
  r.app_id = std::move(app_id);
  r.platform = platform;
  r.status = "unpack_failed";
  r.error = error;
  r.scanned_at = scanned_at;
  return r;
}

void CorpusSummary::add(const AppReport& r) {
  ++totals.total;
  if (r.status != "ok") return;
  ++totals.unpacked;
  if (r.secret_found) ++totals.hardcoded_secrets;
  if (r.secret_found && r.token_issued()) ++totals.valid_tokens;
  if (r.whitelist_status == WhitelistStatus::kEnabled) ++whitelisted;
  if (r.direct_invocation_count > 0) {
    ++direct_invocation_apps;
    direct_invocation_occurrences += r.direct_invocation_count;
    for (const auto& [cat, n] : r.direct_invocations_by_category) {
      direct_invocations_by_category[cat] += n;
    }
  }
  for (char c = 'A'; c <= 'E'; ++c) {
    if (r.consequence_flags.has_letter(c)) ++consequence_apps[c];
  }
  if (r.max_severity != Severity::kNone) {
    ++severity_apps[std::string(to_string(r.max_severity))];
  }
  for (const auto& v : r.callability) {
    if (v.verdict == Verdict::kCallable) ++callable_by_api[v.api_name];
  }
  if (r.token_classification) {
    ++token_classifications[std::string(to_string(*r.token_classification))];
  }
}

void CorpusSummary::merge(const CorpusSummary& o) {
  totals.total += o.totals.total;
  totals.unpacked += o.totals.unpacked;
  totals.hardcoded_secrets += o.totals.hardcoded_secrets;
  totals.valid_tokens += o.totals.valid_tokens;
  whitelisted += o.whitelisted;
  direct_invocation_apps += o.direct_invocation_apps;
  direct_invocation_occurrences += o.direct_invocation_occurrences;
  for (const auto& [k, n] : o.direct_invocations_by_category) {
    direct_invocations_by_category[k] += n;
  }
  for (const auto& [k, n] : o.consequence_apps) consequence_apps[k] += n;
  for (const auto& [k, n] : o.severity_apps) severity_apps[k] += n;
  for (const auto& [k, n] : o.callable_by_api) callable_by_api[k] += n;
  for (const auto& [k, n] : o.token_classifications) {
    token_classifications[k] += n;
  }
}

json to_json(const CorpusSummary& s) {
  json consequences = json::object();
  for (char c = 'A'; c <= 'E'; ++c) {
    auto it = s.consequence_apps.find(c);
    consequences[std::string(1, c)] =
        it == s.consequence_apps.end() ? 0 : it->second;
  }
  return json{
      {"schema_version", kReportSchemaVersion},
      {"totals",
       {{"total", s.totals.total},
        {"unpacked", s.totals.unpacked},
        {"hardcoded_secrets", s.totals.hardcoded_secrets},
        {"valid_tokens", s.totals.valid_tokens}}},
      {"whitelisted", s.whitelisted},
      {"direct_invocations",
       {{"apps", s.direct_invocation_apps},
        {"occurrences", s.direct_invocation_occurrences},
        {"by_category", s.direct_invocations_by_category}}},
      {"consequence_apps", consequences},
      {"severity_apps", s.severity_apps},
      {"callable_by_api", s.callable_by_api},
      {"token_classifications", s.token_classifications},
  };
}

CorpusSummary summarize(const std::vector<AppReport>& reports) {
  std::set<std::string> ids;
  CorpusSummary s;
  for (const auto& r : reports) {
    if (!ids.insert(r.package_id).second) {
      throw ReportError(ReportErrc::kDuplicateId,
                        "duplicate package_id " + r.package_id);
    }
    s.add(r);
  }
  return s;
}

Transition classify_transition(const SnapshotFacts& f) {
  if (!f.whitelist_old && f.whitelist_new) {
    return Transition::kWhitelistNewlyEnabled;
  }
  if (!f.found_old && !f.found_new && !f.valid_new) {
    return Transition::kUnchangedClean;
  }
  if (f.found_new && f.valid_new && f.same_value) {
    return Transition::kSameSecretStillValid;
  }
  if (!f.found_new && f.valid_new) return Transition::kRemovedButValid;
  if (f.found_new && f.valid_new) return Transition::kRotatedRehardcoded;
  if (!f.found_new) return Transition::kInvalidatedRemoved;
  return Transition::kFoundInvalid;
}

SnapshotFacts snapshot_facts(const AppReport& o, const AppReport& n) {
  SnapshotFacts f;
  f.found_old = o.secret_found;
  f.valid_old = o.secret_valid == SecretValidity::kValid;
  f.found_new = n.secret_found;
  f.valid_new = n.secret_valid == SecretValidity::kValid;
  f.same_value = f.valid_new &&
                 std::find(o.found_secret_fingerprints.begin(),
                           o.found_secret_fingerprints.end(),
                           n.secret_fingerprint) !=
                     o.found_secret_fingerprints.end();
  f.whitelist_old = o.whitelist_status == WhitelistStatus::kEnabled;
  f.whitelist_new = n.whitelist_status == WhitelistStatus::kEnabled;
  return f;
}

json to_json(const TemporalDiff& d) {
  json counts = json::object();
  for (auto t : {Transition::kSameSecretStillValid, Transition::kRemovedButValid,
                 Transition::kRotatedRehardcoded, Transition::kInvalidatedRemoved,
                 Transition::kWhitelistNewlyEnabled, Transition::kUnchangedClean,
                 Transition::kFoundInvalid}) {
    auto it = d.counts.find(t);
    counts[std::string(to_string(t))] = it == d.counts.end() ? 0 : it->second;
  }
  json per_app = json::object();
  for (const auto& [id, t] : d.transitions) {
    per_app[id] = std::string(to_string(t));
  }
  return json{{"schema_version", kReportSchemaVersion},
              {"counts", counts},
              {"transitions", per_app},
              {"only_in_old", d.only_in_old},
              {"only_in_new", d.only_in_new}};
}

TemporalDiff diff_snapshots(const std::vector<AppReport>& old_reports,
                            const std::vector<AppReport>& new_reports) {
  auto key = [](const AppReport& r) {
    return r.app_id ? *r.app_id : r.package_id;
  };
  auto index = [&](const std::vector<AppReport>& reports) {
    std::map<std::string, const AppReport*> m;
    for (const auto& r : reports) {
      if (!m.emplace(key(r), &r).second) {
        throw ReportError(ReportErrc::kDuplicateId,
                          "duplicate app " + key(r) + " in snapshot");
      }
    }
    return m;
  };
  auto old_map = index(old_reports);
  auto new_map = index(new_reports);
  TemporalDiff d;
  for (const auto& [id, o] : old_map) {
    auto it = new_map.find(id);
    if (it == new_map.end()) {
      d.only_in_old.push_back(id);
      continue;
    }
    Transition t = classify_transition(snapshot_facts(*o, *it->second));
    d.transitions[id] = t;
    ++d.counts[t];
  }
  for (const auto& [id, n] : new_map) {
    if (!old_map.count(id)) d.only_in_new.push_back(id);
  }
  return d;
}

void write_report_jsonl(const std::string& path,
                        const std::vector<AppReport>& reports) {
  std::string out;
  for (const auto& r : reports) {
    out += to_json(r).dump();
    out += '\n';
  }
  write_file(path, out);
}

std::vector<AppReport> read_report_jsonl(const std::string& path) {
  std::istringstream in(read_file(path));
  std::vector<AppReport> reports;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw ReportError(ReportErrc::kParseError,
                        path + ":" + std::to_string(lineno) + ": not JSON");
    }
    reports.push_back(app_report_from_json(j));
  }
  return reports;
}

std::string consequence_csv(const ApiCatalog& catalog,
                            const CorpusSummary& summary) {
  std::string out = "api,required_parameters,callable_apps,A,B,C,D,E,impact\n";
  for (const auto& api : catalog.apis()) {
    std::string params;
    for (const auto& p : api.params) {
      if (!params.empty()) params += ' ';
      params += p.name;
    }
    auto it = summary.callable_by_api.find(api.name);
    out += api.name + ",\"" + params + "\"," +
           std::to_string(it == summary.callable_by_api.end() ? 0 : it->second);
    for (char c = 'A'; c <= 'E'; ++c) {
      out += api.impact_flags.has_letter(c) ? ",x" : ",";
    }
    out += "," + std::string(to_string(api.severity)) + "\n";
  }
  return out;
}

}  // namespace miniscope
