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

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "miniscope/catalog.hpp"
#include "miniscope/container.hpp"
#include "miniscope/prober.hpp"
#include "miniscope/report.hpp"
#include "miniscope/scanner.hpp"
#include "miniscope/transport.hpp"

namespace miniscope {

struct PackageInput {
  std::string package_id;
  std::filesystem::path path;
  bool directory = false;
};

/// Files are container packages. A directory holding *.mapk files or a
/// packages/ subdirectory is a corpus; an empty directory contributes
/// nothing; any other directory is one unpacked package. Sorted by id.
std::vector<PackageInput> expand_inputs(const std::vector<std::string>& paths);

struct PipelineConfig {
  ApiCatalog catalog;
  DetectionRuleset ruleset;
  bool probe = false;
  ProbePolicy policy;
  /// Shared by all workers; must be thread-safe. Required when probing.
  std::shared_ptr<Transport> transport;
  std::size_t workers = 1;
  std::string scanned_at;
  /// app_id -> secret supplied from outside the packages.
  std::map<std::string, std::string> known_pairs;
  UnreadablePolicy unreadable = UnreadablePolicy::kSkipWithWarning;
  RateLimiter::NowFn now;
  RateLimiter::SleepFn sleep;
};

struct LoadedPackage {
  MiniAppPackage package;
  std::vector<std::string> warnings;
};

/// Throws ContainerError.
LoadedPackage load_package(
    const PackageInput& input, const Scanner& scanner,
    UnreadablePolicy unreadable = UnreadablePolicy::kSkipWithWarning);

/// Scan, then (when configured) validate, check the whitelist and probe.
AppReport analyze_package(const PackageInput& input, const Scanner& scanner,
                          const PipelineConfig& config,
                          std::vector<std::string>* warnings = nullptr);
AppReport analyze_loaded(const MiniAppPackage& package,
                         const std::string& package_id,
                         const Scanner& scanner, const PipelineConfig& config);

struct CorpusRun {
  std::vector<AppReport> reports;
  std::vector<std::string> warnings;
};

/// Reports come back in input order regardless of worker count.
CorpusRun run_corpus(const std::vector<PackageInput>& inputs,
                     const PipelineConfig& config);

std::map<std::string, std::string> load_known_pairs(const std::string& path);
std::string utc_timestamp_now();

}  // namespace miniscope
