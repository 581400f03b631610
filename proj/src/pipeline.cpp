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

#include "miniscope/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <mutex>
#include <set>
#include <stdexcept>
#include <thread>

#include "miniscope/util.hpp"

namespace miniscope {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<PackageInput> expand_inputs(const std::vector<std::string>& paths) {
  std::vector<PackageInput> out;
  auto add_file = [&](const fs::path& p) {
    out.push_back({p.filename().string(), p, false});
  };
  auto add_dir = [&](const fs::path& p) {
    out.push_back({p.filename().string(), p, true});
  };
  for (const auto& raw : paths) {
    fs::path p(raw);
    std::error_code ec;
    auto st = fs::status(p, ec);
    if (ec || !fs::exists(st)) {
      throw std::runtime_error("input not found: " + raw);
    }
    if (!fs::is_directory(st)) {
      add_file(p);
      continue;
    }
    std::vector<fs::path> mapks;
    bool any = false;
    for (const auto& e : fs::directory_iterator(p)) {
      any = true;
      if (e.is_regular_file() && e.path().extension() == ".mapk") {
        mapks.push_back(e.path());
      }
    }
    const fs::path pkgs = p / "packages";
    const bool corpus = !mapks.empty() || fs::is_directory(pkgs);
    if (!any) continue;
    if (!corpus) {
      if (p.filename().empty()) {
        add_dir(p.parent_path());
      } else {
        add_dir(p);
      }
      continue;
    }
    for (const auto& m : mapks) add_file(m);
    if (fs::is_directory(pkgs)) {
      for (const auto& e : fs::directory_iterator(pkgs)) {
        if (e.is_directory()) {
          add_dir(e.path());
        } else if (e.is_regular_file() && e.path().extension() == ".mapk") {
          add_file(e.path());
        }
      }
    }
  }
  std::sort(out.begin(), out.end(),
            [](const PackageInput& a, const PackageInput& b) {
              return std::tie(a.package_id, a.path) <
                     std::tie(b.package_id, b.path);
            });
  return out;
}

LoadedPackage load_package(const PackageInput& input, const Scanner& scanner,
                           UnreadablePolicy unreadable) {
  LoadedPackage out;
  std::string stem;
  if (input.directory) {
    auto r = load_directory(input.path, unreadable);
    out.package = std::move(r.package);
    out.warnings = std::move(r.warnings);
    stem = input.path.filename().string();
  } else {
    std::string bytes;
    try {
      bytes = read_file(input.path);
    } catch (const std::exception& e) {
      throw ContainerError(ContainerErrc::kUnreadableFile, e.what());
    }
    out.package = unpack(bytes);
    stem = input.path.stem().string();
  }
  if (!out.package.app_hint && scanner.is_app_id(stem)) {
    out.package.app_hint = stem;
  }
  return out;
}

namespace {

int outcome_rank(TokenClass c) {
  switch (c) {
    case TokenClass::kTokenIssued:
      return 0;
    case TokenClass::kQuotaExceeded:
      return 1;
    case TokenClass::kUserLimited:
      return 2;
    case TokenClass::kIpNotWhitelisted:
      return 3;
    case TokenClass::kInvalidCredential:
      return 4;
    case TokenClass::kTransportError:
      return 5;
  }
  return 6;
}

struct Attempt {
  std::string app_id;
  std::string secret;
  bool external = false;
};

}  // namespace

AppReport analyze_loaded(const MiniAppPackage& package,
                         const std::string& package_id,
                         const Scanner& scanner, const PipelineConfig& config) {
  ScanFinding finding = scanner.scan_package(package, package_id);

  std::vector<Attempt> attempts;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& p : finding.pairs) {
    if (seen.emplace(p.app_id.value, p.app_secret.value).second) {
      attempts.push_back({p.app_id.value, p.app_secret.value, false});
    }
  }
  std::vector<std::string> known_ids;
  for (const auto& a : attempts) known_ids.push_back(a.app_id);
  for (const auto& id : finding.distinct_values(CandidateKind::kAppId)) {
    known_ids.push_back(id);
  }
  if (finding.app_hint) known_ids.push_back(*finding.app_hint);
  for (const auto& id : known_ids) {
    auto it = config.known_pairs.find(id);
    if (it != config.known_pairs.end() &&
        seen.emplace(id, it->second).second) {
      attempts.push_back({id, it->second, true});
    }
  }

  ValidationResult v;
  if (!known_ids.empty()) v.app_id = known_ids.front();

  if (config.probe) {
    if (!config.transport) {
      throw std::invalid_argument("probing requires a transport");
    }
    v.probed = true;
    ThrottledTransport throttled(*config.transport, config.policy.min_interval,
                                 config.now, config.sleep);
    const Attempt* chosen = nullptr;
    for (const auto& a : attempts) {
      ProbeOutcome o = acquire_token(a.app_id, a.secret, config.catalog,
                                     throttled);
      if (!v.token_outcome || outcome_rank(o.classification) <
                                  outcome_rank(v.token_outcome->classification)) {
        v.token_outcome = o;
        chosen = &a;
      }
      // Whitelisting rejects every secret alike; more attempts add nothing.
      if (o.classification == TokenClass::kTokenIssued ||
          o.classification == TokenClass::kIpNotWhitelisted) {
        break;
      }
    }
    if (chosen != nullptr) {
      v.app_id = chosen->app_id;
      v.tried_secret = chosen->secret;
      v.external_pair = chosen->external;
    }

    const auto cls = v.token_outcome
                         ? v.token_outcome->classification
                         : TokenClass::kTransportError;
    if (v.token_outcome && cls == TokenClass::kIpNotWhitelisted) {
      v.whitelist = WhitelistStatus::kEnabled;
    } else if (v.token_outcome && cls != TokenClass::kTransportError) {
      v.whitelist = WhitelistStatus::kDisabled;
    } else if (v.app_id) {
      switch (check_whitelist(*v.app_id, config.catalog, config.policy,
                              throttled)) {
        case WhitelistCheck::kWhitelistedElsewhere:
          v.whitelist = WhitelistStatus::kEnabled;
          break;
        case WhitelistCheck::kNotWhitelisted:
          v.whitelist = WhitelistStatus::kDisabled;
          break;
        case WhitelistCheck::kIndeterminate:
          v.whitelist = WhitelistStatus::kIndeterminate;
          break;
      }
    }

    if (cls == TokenClass::kTokenIssued && config.policy.allow_get_probing) {
      ProbeCredentials creds{*v.token_outcome->access_token, *v.app_id,
                             v.tried_secret};
      v.observations = probe_get_apis(creds, finding, config.catalog,
                                      config.policy, throttled);
    }
    v.verdicts = resolve_callability(config.catalog, v.token_outcome,
                                     v.observations, finding);
  }
  return build_report(finding, v, config.catalog, config.scanned_at);
}

AppReport analyze_package(const PackageInput& input, const Scanner& scanner,
                          const PipelineConfig& config,
                          std::vector<std::string>* warnings) {
  LoadedPackage loaded;
  try {
    loaded = load_package(input, scanner, config.unreadable);
  } catch (const ContainerError& e) {
    std::optional<std::string> hint;
    const std::string stem = input.directory
                                 ? input.path.filename().string()
                                 : input.path.stem().string();
    if (scanner.is_app_id(stem)) hint = stem;
    return unpack_failure_report(input.package_id, hint,
                                 config.catalog.platform(),
                                 std::string(to_string(e.code())) + ": " +
                                     e.what(),
                                 config.scanned_at);
  }
  if (warnings != nullptr) {
    for (auto& w : loaded.warnings) warnings->push_back(input.package_id + ": " + w);
  }
  return analyze_loaded(loaded.package, input.package_id, scanner, config);
}

CorpusRun run_corpus(const std::vector<PackageInput>& inputs,
                     const PipelineConfig& config) {
  if (config.workers == 0) throw std::invalid_argument("workers must be >= 1");
  if (config.probe) config.policy.validate(config.catalog);
  const Scanner scanner(config.ruleset, config.catalog);
  CorpusRun run;
  run.reports.resize(inputs.size());
  std::vector<std::exception_ptr> errors(inputs.size());
  std::vector<std::vector<std::string>> warnings(inputs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < inputs.size(); i = next++) {
      try {
        run.reports[i] =
            analyze_package(inputs[i], scanner, config, &warnings[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t width = std::min(config.workers, inputs.size());
  if (width <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < width; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  for (auto& w : warnings) {
    run.warnings.insert(run.warnings.end(), w.begin(), w.end());
  }
  return run;
}

std::map<std::string, std::string> load_known_pairs(const std::string& path) {
  json j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw std::runtime_error(path + ": expected a JSON object app_id -> secret");
  }
  std::map<std::string, std::string> out;
  for (const auto& [id, secret] : j.items()) {
    if (!secret.is_string()) {
      throw std::runtime_error(path + ": secret for " + id + " is not a string");
    }
    out[id] = secret.get<std::string>();
  }
  return out;
}

std::string utc_timestamp_now() {
  const std::time_t t =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace miniscope
