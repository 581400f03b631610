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

#include <boost/regex.hpp>
#include <cstddef>
#include <nlohmann/json.hpp>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "miniscope/catalog.hpp"
#include "miniscope/container.hpp"
#include "miniscope/platform.hpp"

namespace miniscope {

struct DetectionRuleset {
  Platform platform = Platform::kWechatLike;
  std::string app_id_pattern;
  std::string secret_pattern;
  /// Case-insensitive; matched in the text just before a candidate.
  std::vector<std::string> keyword_hints;
  double entropy_threshold = 3.0;
  std::size_t proximity_window = 2000;
  std::vector<std::string> scan_extensions;

  static DetectionRuleset wechat_defaults();
  static DetectionRuleset baidu_defaults();
  static DetectionRuleset defaults_for(Platform p);

  /// Throws std::invalid_argument when an invariant is broken.
  void validate() const;

  nlohmann::json to_json() const;
  static DetectionRuleset from_json(const nlohmann::json& j);
  static DetectionRuleset load_file(const std::string& path);
};

/// Shannon entropy over byte frequencies, in bits per character.
/// Throws std::invalid_argument on an empty string.
double shannon_entropy(std::string_view s);

enum class CandidateKind { kAppId, kAppSecret };
enum class Confidence { kPatternOnly, kPatternKeyword, kPatternKeywordEntropy };

std::string_view to_string(CandidateKind k);
std::string_view to_string(Confidence c);

struct ByteSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  bool operator==(const ByteSpan&) const = default;
};

struct SecretCandidate {
  std::string value;
  CandidateKind kind = CandidateKind::kAppId;
  std::string file;
  ByteSpan span;
  double entropy = 0.0;
  std::optional<std::string> keyword_context;
  Confidence confidence = Confidence::kPatternOnly;
};

struct CredentialPair {
  SecretCandidate app_id;
  SecretCandidate app_secret;
  /// Characters between the two spans; nullopt when paired across files or
  /// through the package's app hint.
  std::optional<std::size_t> pairing_distance;
};

struct DirectInvocation {
  std::string api_name;
  std::string endpoint_substring;
  std::string file;
  ByteSpan span;
  std::string category;
};

struct FileScan {
  std::vector<SecretCandidate> candidates;
  std::vector<DirectInvocation> direct_invocations;
  std::vector<std::string> cloud_function_names;
  std::vector<std::string> cloud_env_ids;
  std::vector<std::string> openids;
};

struct ScanFinding {
  std::string package_id;
  std::optional<std::string> app_hint;
  std::vector<SecretCandidate> candidates;
  std::vector<CredentialPair> pairs;
  std::vector<SecretCandidate> unpaired_secrets;
  std::vector<DirectInvocation> direct_invocations;
  std::vector<std::string> cloud_function_names;
  std::vector<std::string> cloud_env_ids;
  std::vector<std::string> openids_in_code;

  bool has_secret() const;
  /// Distinct values of candidates of `kind`, first-seen order.
  std::vector<std::string> distinct_values(CandidateKind kind) const;
};

nlohmann::json to_json(const SecretCandidate& c);
nlohmann::json to_json(const ScanFinding& f);

/// Compiled ruleset plus catalog endpoint table; immutable and safe to
/// share across worker threads.
class Scanner {
 public:
  Scanner(DetectionRuleset ruleset, const ApiCatalog& catalog);

  const DetectionRuleset& ruleset() const { return ruleset_; }

  /// `text` may hold arbitrary bytes; spans refer to its UTF-8-sanitized form.
  FileScan scan_file(std::string_view file, std::string_view text) const;
  ScanFinding scan_package(const MiniAppPackage& pkg,
                           std::string package_id) const;
  bool should_scan(std::string_view entry_name) const;
  /// True when `value` is entirely an app ID under this ruleset.
  bool is_app_id(std::string_view value) const;

 private:
  void find_candidates(const std::string& file, const std::string& text,
                       const boost::regex& re, CandidateKind kind,
                       std::vector<SecretCandidate>& out) const;
  std::optional<std::string> keyword_before(const std::string& text,
                                            std::size_t pos) const;

  DetectionRuleset ruleset_;
  boost::regex app_id_re_;
  boost::regex secret_re_;
  std::vector<std::string> lowered_hints_;
  std::vector<DirectInvocationPattern> endpoints_;
};

FileScan scan_file(std::string_view text, const DetectionRuleset& ruleset,
                   const ApiCatalog& catalog);
ScanFinding scan_package(const MiniAppPackage& pkg,
                         const DetectionRuleset& ruleset,
                         const ApiCatalog& catalog,
                         std::string package_id = {});

struct PairingResult {
  std::vector<CredentialPair> pairs;
  std::vector<SecretCandidate> unpaired_secrets;
};

/// Each secret pairs with the nearest same-file app ID within `window`
/// (earlier span wins ties); otherwise with every distinct app ID in the
/// package; otherwise with `app_hint`; otherwise it stays unpaired. Pairs
/// are deduplicated by (app ID value, secret value).
PairingResult pair_credentials(const std::vector<SecretCandidate>& candidates,
                               std::size_t window,
                               const std::optional<std::string>& app_hint = {});

}  // namespace miniscope
