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
#include <vector>

#include "miniscope/catalog.hpp"
#include "miniscope/prober.hpp"
#include "miniscope/scanner.hpp"

namespace miniscope {

inline constexpr int kReportSchemaVersion = 1;

enum class ReportErrc { kInconsistentInputs, kDuplicateId, kParseError };

class ReportError : public std::runtime_error {
 public:
  ReportError(ReportErrc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ReportErrc code() const noexcept { return code_; }

 private:
  ReportErrc code_;
};

enum class WhitelistStatus { kEnabled, kDisabled, kIndeterminate };
std::string_view to_string(WhitelistStatus s);
WhitelistStatus whitelist_status_from_string(std::string_view s);

enum class SecretValidity { kValid, kInvalid, kUnvalidated };

/// Everything learned about one package beyond the static scan.
struct ValidationResult {
  bool probed = false;
  std::optional<std::string> app_id;
  std::optional<ProbeOutcome> token_outcome;
  /// The secret the token outcome refers to.
  std::string tried_secret;
  /// True when the tried pair came from outside the package.
  bool external_pair = false;
  WhitelistStatus whitelist = WhitelistStatus::kIndeterminate;
  std::vector<GetObservation> observations;
  std::vector<CallabilityVerdict> verdicts;
};

struct AppReport {
  int schema_version = kReportSchemaVersion;
  std::string package_id;
  std::optional<std::string> app_id;
  Platform platform = Platform::kWechatLike;
  /// "ok" or "unpack_failed".
  std::string status = "ok";
  std::string error;
  bool secret_found = false;
  SecretValidity secret_valid = SecretValidity::kUnvalidated;
  /// "code", "external" or empty.
  std::string secret_source;
  /// SHA-256 of the validated (or else first found) secret; never the value.
  std::string secret_fingerprint;
  std::vector<std::string> found_secret_fingerprints;
  std::optional<TokenClass> token_classification;
  WhitelistStatus whitelist_status = WhitelistStatus::kIndeterminate;
  std::size_t direct_invocation_count = 0;
  std::map<std::string, std::size_t> direct_invocations_by_category;
  std::size_t cloud_function_count = 0;
  std::size_t cloud_env_count = 0;
  std::vector<CallabilityVerdict> callability;
  ImpactFlags consequence_flags;
  Severity max_severity = Severity::kNone;
  std::string scanned_at;

  bool token_issued() const {
    return token_classification == TokenClass::kTokenIssued;
  }
};

nlohmann::json to_json(const AppReport& r);
AppReport app_report_from_json(const nlohmann::json& j);

/// Throws ReportError(kInconsistentInputs).
AppReport build_report(const ScanFinding& finding,
                       const ValidationResult& validation,
                       const ApiCatalog& catalog,
                       const std::string& scanned_at);

/// Report for a package that could not be unpacked.
AppReport unpack_failure_report(const std::string& package_id,
                                std::optional<std::string> app_id,
                                Platform platform, const std::string& error,
                                const std::string& scanned_at);

struct CorpusTotals {
  std::size_t total = 0;
  std::size_t unpacked = 0;
  std::size_t hardcoded_secrets = 0;
  std::size_t valid_tokens = 0;
  bool operator==(const CorpusTotals&) const = default;
};

struct CorpusSummary {
  CorpusTotals totals;
  std::size_t whitelisted = 0;
  std::size_t direct_invocation_apps = 0;
  std::size_t direct_invocation_occurrences = 0;
  std::map<std::string, std::size_t> direct_invocations_by_category;
  /// Letter -> apps having that consequence.
  std::map<char, std::size_t> consequence_apps;
  std::map<std::string, std::size_t> severity_apps;
  std::map<std::string, std::size_t> callable_by_api;
  std::map<std::string, std::size_t> token_classifications;

  void add(const AppReport& r);
  void merge(const CorpusSummary& other);
  bool operator==(const CorpusSummary&) const = default;
};

nlohmann::json to_json(const CorpusSummary& s);

/// Throws ReportError(kDuplicateId) on a repeated package_id.
CorpusSummary summarize(const std::vector<AppReport>& reports);

enum class Transition {
  kSameSecretStillValid,
  kRemovedButValid,
  kRotatedRehardcoded,
  kInvalidatedRemoved,
  kWhitelistNewlyEnabled,
  kUnchangedClean,
  kFoundInvalid,
};
std::string_view to_string(Transition t);

struct SnapshotFacts {
  bool found_old = false;
  bool valid_old = false;
  bool found_new = false;
  bool valid_new = false;
  /// The new validated secret was also present in the old snapshot.
  bool same_value = false;
  bool whitelist_old = false;
  bool whitelist_new = false;
};

/// Total decision table, first match wins.
Transition classify_transition(const SnapshotFacts& f);
SnapshotFacts snapshot_facts(const AppReport& old_report,
                             const AppReport& new_report);

struct TemporalDiff {
  std::map<std::string, Transition> transitions;
  std::map<Transition, std::size_t> counts;
  std::vector<std::string> only_in_old;
  std::vector<std::string> only_in_new;
};

nlohmann::json to_json(const TemporalDiff& d);

/// Matches on app_id, falling back to package_id.
TemporalDiff diff_snapshots(const std::vector<AppReport>& old_reports,
                            const std::vector<AppReport>& new_reports);

void write_report_jsonl(const std::string& path,
                        const std::vector<AppReport>& reports);
std::vector<AppReport> read_report_jsonl(const std::string& path);
/// Table-shaped export: one row per catalog API with its callable count.
std::string consequence_csv(const ApiCatalog& catalog,
                            const CorpusSummary& summary);

}  // namespace miniscope
