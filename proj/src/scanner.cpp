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

#include "miniscope/scanner.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include "miniscope/util.hpp"

namespace miniscope {

using nlohmann::json;

namespace {

// Keyword hints are looked for this many bytes before a candidate.
constexpr std::size_t kKeywordLookback = 48;

const boost::regex& cloud_function_re() {
  static const boost::regex re(
      R"(callFunction\s*\(\s*\{[^{}]{0,300}?\bname\s*:\s*['"]([A-Za-z0-9_\-]{1,64})['"])");
  return re;
}

const boost::regex& cloud_env_re() {
  static const boost::regex re(
      R"(cloud\.init\s*\(\s*\{[^{}]{0,300}?\benv\s*:\s*['"]([A-Za-z0-9_\-]{1,64})['"])");
  return re;
}

const boost::regex& openid_re() {
  static const boost::regex re(
      R"(\bopen_?id\b["']?\s*[:=]\s*['"](o[A-Za-z0-9_\-]{27})['"])",
      boost::regex::perl | boost::regex::icase);
  return re;
}

bool is_path_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
         (c >= '0' && c <= '9') || c == '_' || c == '/' || c == '-';
}

void push_unique(std::vector<std::string>& out, std::set<std::string>& seen,
                 std::string value) {
  if (seen.insert(value).second) out.push_back(std::move(value));
}

}  // namespace

DetectionRuleset DetectionRuleset::wechat_defaults() {
  DetectionRuleset r;
  r.platform = Platform::kWechatLike;
  r.app_id_pattern = R"((?<![A-Za-z0-9])wx[0-9a-f]{16}(?![A-Za-z0-9]))";
  r.secret_pattern = R"((?<![A-Za-z0-9])[0-9a-f]{32}(?![A-Za-z0-9]))";
  r.keyword_hints = {"appid", "app_id", "appsecret", "app_secret", "secret"};
  r.scan_extensions = {".js", ".json", ".wxml", ".wxs"};
  return r;
}

DetectionRuleset DetectionRuleset::baidu_defaults() {
  DetectionRuleset r;
  r.platform = Platform::kBaiduLike;
  r.app_id_pattern = R"((?<![A-Za-z0-9.])[0-9]{8,10}(?![A-Za-z0-9.]))";
  r.secret_pattern = R"((?<![A-Za-z0-9])[A-Za-z0-9]{32}(?![A-Za-z0-9]))";
  r.keyword_hints = {"appid",  "app_id",        "appkey", "app_key",
                     "client_id", "client_secret", "appsecret", "secret"};
  r.scan_extensions = {".js", ".json", ".swan", ".sjs"};
  return r;
}

DetectionRuleset DetectionRuleset::defaults_for(Platform p) {
  return p == Platform::kBaiduLike ? baidu_defaults() : wechat_defaults();
}

void DetectionRuleset::validate() const {
  if (!(entropy_threshold >= 0.0 && entropy_threshold <= 8.0)) {
    throw std::invalid_argument("entropy_threshold must be in [0, 8]");
  }
  if (proximity_window == 0) {
    throw std::invalid_argument("proximity_window must be > 0");
  }
  for (const auto* pattern : {&app_id_pattern, &secret_pattern}) {
    try {
      boost::regex re(*pattern);
    } catch (const boost::regex_error& e) {
      throw std::invalid_argument("pattern '" + *pattern +
                                  "' does not compile: " + e.what());
    }
  }
}

json DetectionRuleset::to_json() const {
  return json{{"platform", std::string(miniscope::to_string(platform))},
              {"app_id_pattern", app_id_pattern},
              {"secret_pattern", secret_pattern},
              {"keyword_hints", keyword_hints},
              {"entropy_threshold", entropy_threshold},
              {"proximity_window", proximity_window},
              {"scan_extensions", scan_extensions}};
}

DetectionRuleset DetectionRuleset::from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("ruleset must be an object");
  DetectionRuleset r;
  try {
    r.platform = platform_from_string(j.at("platform").get<std::string>());
    r.app_id_pattern = j.at("app_id_pattern").get<std::string>();
    r.secret_pattern = j.at("secret_pattern").get<std::string>();
    r.keyword_hints = j.value("keyword_hints", std::vector<std::string>{});
    r.entropy_threshold = j.value("entropy_threshold", 3.0);
    const auto window = j.value("proximity_window", std::int64_t{2000});
    if (window <= 0) throw std::invalid_argument("proximity_window must be > 0");
    r.proximity_window = static_cast<std::size_t>(window);
    r.scan_extensions = j.at("scan_extensions").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("ruleset: ") + e.what());
  }
  r.validate();
  return r;
}

DetectionRuleset DetectionRuleset::load_file(const std::string& path) {
  const auto doc = json::parse(read_file(path), nullptr, false);
  if (doc.is_discarded()) {
    throw std::invalid_argument("ruleset " + path + " is not JSON");
  }
  return from_json(doc);
}

double shannon_entropy(std::string_view s) {
  if (s.empty()) throw std::invalid_argument("EmptyString");
  std::array<std::size_t, 256> counts{};
  for (unsigned char c : s) ++counts[c];
  const double n = static_cast<double>(s.size());
  double h = 0.0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return h;
}

std::string_view to_string(CandidateKind k) {
  return k == CandidateKind::kAppId ? "app_id" : "app_secret";
}

std::string_view to_string(Confidence c) {
  switch (c) {
    case Confidence::kPatternOnly:
      return "pattern_only";
    case Confidence::kPatternKeyword:
      return "pattern+keyword";
    case Confidence::kPatternKeywordEntropy:
      return "pattern+keyword+entropy";
  }
  return "pattern_only";
}

bool ScanFinding::has_secret() const {
  return std::any_of(candidates.begin(), candidates.end(), [](const auto& c) {
    return c.kind == CandidateKind::kAppSecret;
  });
}

std::vector<std::string> ScanFinding::distinct_values(
    CandidateKind kind) const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& c : candidates) {
    if (c.kind == kind) push_unique(out, seen, c.value);
  }
  return out;
}

json to_json(const SecretCandidate& c) {
  json j{{"value", c.value},
         {"kind", std::string(to_string(c.kind))},
         {"file", c.file},
         {"byte_span", {c.span.start, c.span.end}},
         {"entropy", c.entropy},
         {"confidence", std::string(to_string(c.confidence))}};
  j["keyword_context"] =
      c.keyword_context ? json(*c.keyword_context) : json(nullptr);
  return j;
}

json to_json(const ScanFinding& f) {
  json candidates = json::array();
  for (const auto& c : f.candidates) candidates.push_back(to_json(c));
  json pairs = json::array();
  for (const auto& p : f.pairs) {
    pairs.push_back(
        {{"app_id", to_json(p.app_id)},
         {"app_secret", to_json(p.app_secret)},
         {"pairing_distance", p.pairing_distance ? json(*p.pairing_distance)
                                                 : json("cross-file")}});
  }
  json unpaired = json::array();
  for (const auto& c : f.unpaired_secrets) unpaired.push_back(to_json(c));
  json direct = json::array();
  for (const auto& d : f.direct_invocations) {
    direct.push_back({{"api_name", d.api_name},
                      {"endpoint_substring", d.endpoint_substring},
                      {"file", d.file},
                      {"byte_span", {d.span.start, d.span.end}},
                      {"category", d.category}});
  }
  return json{{"package_id", f.package_id},
              {"app_hint", f.app_hint ? json(*f.app_hint) : json(nullptr)},
              {"candidates", candidates},
              {"pairs", pairs},
              {"unpaired_secrets", unpaired},
              {"direct_invocations", direct},
              {"cloud_function_names", f.cloud_function_names},
              {"cloud_env_ids", f.cloud_env_ids},
              {"openids_in_code", f.openids_in_code}};
}

Scanner::Scanner(DetectionRuleset ruleset, const ApiCatalog& catalog)
    : ruleset_(std::move(ruleset)) {
  ruleset_.validate();
  app_id_re_ = boost::regex(ruleset_.app_id_pattern);
  secret_re_ = boost::regex(ruleset_.secret_pattern);
  for (const auto& h : ruleset_.keyword_hints) {
    lowered_hints_.push_back(to_lower_ascii(h));
  }
  endpoints_ = catalog.invocation_patterns();
}

bool Scanner::should_scan(std::string_view entry_name) const {
  return std::any_of(
      ruleset_.scan_extensions.begin(), ruleset_.scan_extensions.end(),
      [&](const std::string& ext) { return ends_with(entry_name, ext); });
}

bool Scanner::is_app_id(std::string_view value) const {
  return boost::regex_match(value.begin(), value.end(), app_id_re_);
}

std::optional<std::string> Scanner::keyword_before(const std::string& text,
                                                   std::size_t pos) const {
  const std::size_t from = pos > kKeywordLookback ? pos - kKeywordLookback : 0;
  const std::string window = to_lower_ascii(
      std::string_view(text).substr(from, pos - from));
  std::optional<std::size_t> best_end;
  std::size_t best_hint = 0;
  for (std::size_t h = 0; h < lowered_hints_.size(); ++h) {
    const auto& hint = lowered_hints_[h];
    if (hint.empty()) continue;
    const std::size_t at = window.rfind(hint);
    if (at == std::string::npos) continue;
    const std::size_t end = at + hint.size();
    if (!best_end || end > *best_end ||
        (end == *best_end && hint.size() > lowered_hints_[best_hint].size())) {
      best_end = end;
      best_hint = h;
    }
  }
  if (!best_end) return std::nullopt;
  return ruleset_.keyword_hints[best_hint];
}

void Scanner::find_candidates(const std::string& file, const std::string& text,
                              const boost::regex& re, CandidateKind kind,
                              std::vector<SecretCandidate>& out) const {
  boost::sregex_iterator it(text.begin(), text.end(), re);
  for (; it != boost::sregex_iterator(); ++it) {
    const auto& m = *it;
    if (m.length(0) == 0) continue;
    SecretCandidate c;
    c.value = m.str(0);
    if (kind == CandidateKind::kAppSecret && c.value.size() != 32) continue;
    c.kind = kind;
    c.file = file;
    const auto start = static_cast<std::size_t>(m.position(std::size_t{0}));
    c.span = {start, start + static_cast<std::size_t>(m.length(0))};
    c.entropy = shannon_entropy(c.value);
    c.keyword_context = keyword_before(text, c.span.start);
    if (c.keyword_context && c.entropy >= ruleset_.entropy_threshold) {
      c.confidence = Confidence::kPatternKeywordEntropy;
    } else if (c.keyword_context) {
      c.confidence = Confidence::kPatternKeyword;
    } else {
      c.confidence = Confidence::kPatternOnly;
    }
    out.push_back(std::move(c));
  }
}

FileScan Scanner::scan_file(std::string_view file,
                            std::string_view raw) const {
  const std::string text = sanitize_utf8(raw);
  const std::string name(file);
  FileScan out;
  try {
    find_candidates(name, text, app_id_re_, CandidateKind::kAppId,
                    out.candidates);
    find_candidates(name, text, secret_re_, CandidateKind::kAppSecret,
                    out.candidates);
  } catch (const std::runtime_error&) {
    // Pathological input exhausted the regex engine; report nothing.
    out.candidates.clear();
  }
  std::sort(out.candidates.begin(), out.candidates.end(),
            [](const SecretCandidate& a, const SecretCandidate& b) {
              return std::tie(a.span.start, a.span.end, a.kind) <
                     std::tie(b.span.start, b.span.end, b.kind);
            });

  for (const auto& ep : endpoints_) {
    std::size_t pos = text.find(ep.endpoint_path);
    while (pos != std::string::npos) {
      const std::size_t end = pos + ep.endpoint_path.size();
      if (end == text.size() || !is_path_char(text[end])) {
        out.direct_invocations.push_back(
            {ep.name, ep.endpoint_path, name, {pos, end}, ep.category});
      }
      pos = text.find(ep.endpoint_path, pos + 1);
    }
  }
  std::sort(out.direct_invocations.begin(), out.direct_invocations.end(),
            [](const DirectInvocation& a, const DirectInvocation& b) {
              return std::tie(a.span.start, a.api_name) <
                     std::tie(b.span.start, b.api_name);
            });

  auto collect = [&](const boost::regex& re, std::vector<std::string>& dst) {
    std::set<std::string> seen;
    try {
      boost::sregex_iterator it(text.begin(), text.end(), re);
      for (; it != boost::sregex_iterator(); ++it) {
        push_unique(dst, seen, (*it).str(1));
      }
    } catch (const std::runtime_error&) {
    }
  };
  collect(cloud_function_re(), out.cloud_function_names);
  collect(cloud_env_re(), out.cloud_env_ids);
  collect(openid_re(), out.openids);
  return out;
}

ScanFinding Scanner::scan_package(const MiniAppPackage& pkg,
                                  std::string package_id) const {
  ScanFinding finding;
  finding.package_id = std::move(package_id);
  finding.app_hint = pkg.app_hint;
  std::set<std::tuple<std::string, std::string, std::size_t, std::size_t>>
      seen_candidates;
  std::set<std::string> seen_fn, seen_env, seen_openid;
  for (const auto& entry : pkg.entries) {
    if (!should_scan(entry.name)) continue;
    FileScan fs = scan_file(entry.name, entry.content);
    for (auto& c : fs.candidates) {
      if (seen_candidates
              .emplace(c.value, c.file, c.span.start, c.span.end)
              .second) {
        finding.candidates.push_back(std::move(c));
      }
    }
    for (auto& d : fs.direct_invocations) {
      finding.direct_invocations.push_back(std::move(d));
    }
    for (auto& v : fs.cloud_function_names) {
      push_unique(finding.cloud_function_names, seen_fn, std::move(v));
    }
    for (auto& v : fs.cloud_env_ids) {
      push_unique(finding.cloud_env_ids, seen_env, std::move(v));
    }
    for (auto& v : fs.openids) {
      push_unique(finding.openids_in_code, seen_openid, std::move(v));
    }
  }
  PairingResult paired = pair_credentials(
      finding.candidates, ruleset_.proximity_window, finding.app_hint);
  finding.pairs = std::move(paired.pairs);
  finding.unpaired_secrets = std::move(paired.unpaired_secrets);
  return finding;
}

FileScan scan_file(std::string_view text, const DetectionRuleset& ruleset,
                   const ApiCatalog& catalog) {
  return Scanner(ruleset, catalog).scan_file("", text);
}

ScanFinding scan_package(const MiniAppPackage& pkg,
                         const DetectionRuleset& ruleset,
                         const ApiCatalog& catalog, std::string package_id) {
  return Scanner(ruleset, catalog).scan_package(pkg, std::move(package_id));
}

namespace {

std::size_t span_gap(const ByteSpan& a, const ByteSpan& b) {
  if (a.end <= b.start) return b.start - a.end;
  if (b.end <= a.start) return a.start - b.end;
  return 0;
}

}  // namespace

PairingResult pair_credentials(const std::vector<SecretCandidate>& candidates,
                               std::size_t window,
                               const std::optional<std::string>& app_hint) {
  std::vector<const SecretCandidate*> ids;
  std::vector<const SecretCandidate*> distinct_ids;
  std::set<std::string> seen_id_values;
  for (const auto& c : candidates) {
    if (c.kind != CandidateKind::kAppId) continue;
    ids.push_back(&c);
    if (seen_id_values.insert(c.value).second) distinct_ids.push_back(&c);
  }

  PairingResult out;
  std::set<std::pair<std::string, std::string>> seen_pairs;
  std::set<std::string> seen_unpaired;
  auto emit = [&](const SecretCandidate& id, const SecretCandidate& secret,
                  std::optional<std::size_t> distance) {
    if (seen_pairs.emplace(id.value, secret.value).second) {
      out.pairs.push_back({id, secret, distance});
    }
  };

  for (const auto& secret : candidates) {
    if (secret.kind != CandidateKind::kAppSecret) continue;
    const SecretCandidate* nearest = nullptr;
    std::size_t best = 0;
    for (const SecretCandidate* id : ids) {
      if (id->file != secret.file) continue;
      const std::size_t gap = span_gap(id->span, secret.span);
      if (gap > window) continue;
      if (nearest == nullptr || gap < best ||
          (gap == best && id->span.start < nearest->span.start)) {
        nearest = id;
        best = gap;
      }
    }
    if (nearest != nullptr) {
      emit(*nearest, secret, best);
    } else if (!distinct_ids.empty()) {
      for (const SecretCandidate* id : distinct_ids) {
        emit(*id, secret, std::nullopt);
      }
    } else if (app_hint && !app_hint->empty()) {
      SecretCandidate hint;
      hint.value = *app_hint;
      hint.kind = CandidateKind::kAppId;
      hint.file = "<app-hint>";
      hint.entropy = shannon_entropy(*app_hint);
      hint.keyword_context = "app_hint";
      hint.confidence = Confidence::kPatternKeyword;
      emit(hint, secret, std::nullopt);
    } else if (seen_unpaired.insert(secret.value).second) {
      out.unpaired_secrets.push_back(secret);
    }
  }
  return out;
}

}  // namespace miniscope
