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
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "miniscope/catalog.hpp"
#include "miniscope/container.hpp"
#include "miniscope/mockserver.hpp"
#include "miniscope/platform.hpp"
#include "miniscope/scanner.hpp"

namespace miniscope {

/// Whole-corpus rates. Defaults are the measured WeChat figures: 43,377 of
/// 110,993 apps with secrets, 36,425 of those valid, 33 whitelisted, 2,317
/// with direct invocations.
struct CorpusSpec {
  Platform platform = Platform::kWechatLike;
  std::size_t app_count = 100;
  double fraction_with_secret = 43377.0 / 110993.0;
  double fraction_valid_of_planted = 36425.0 / 43377.0;
  double fraction_whitelisted = 33.0 / 110993.0;
  double fraction_direct_invocations = 2317.0 / 110993.0;
  /// Share of planted apps that carry a second, invalid secret.
  double fraction_multi_secret = 0.1;
  double fraction_cloud = 0.05;
  std::pair<std::size_t, std::size_t> files_per_app{2, 5};
  std::pair<std::size_t, std::size_t> loc_per_file{20, 80};
  /// Off-charset look-alikes that no scanner rule should match.
  bool plant_decoys = false;
  std::uint64_t rng_seed = 42;

  /// Throws std::invalid_argument.
  void validate() const;
  nlohmann::json to_json() const;
  static CorpusSpec from_json(const nlohmann::json& j);
};

struct PlantedValue {
  std::string value;
  std::string file;
  ByteSpan span;
};

struct PlantedSecret {
  PlantedValue secret;
  bool valid = false;
};

struct PlantedInvocation {
  std::string api_name;
  std::string category;
  std::string file;
  ByteSpan span;
};

struct ManifestApp {
  std::string app_id;
  std::string package;
  /// Where the app ID appears in code; empty value when only the package
  /// name carries it.
  PlantedValue app_id_site;
  std::vector<PlantedSecret> secrets;
  bool whitelisted = false;
  std::vector<PlantedInvocation> direct_invocations;
  std::vector<std::string> cloud_env_ids;
  std::vector<std::string> cloud_function_names;

  bool planted() const { return !secrets.empty(); }
  bool valid() const;
};

struct ManifestTotals {
  std::size_t apps = 0;
  std::size_t planted = 0;
  std::size_t valid = 0;
  std::size_t whitelisted = 0;
  std::size_t direct_invocation_apps = 0;
  std::size_t direct_invocation_occurrences = 0;
};

struct GroundTruthManifest {
  CorpusSpec spec;
  std::vector<ManifestApp> apps;

  ManifestTotals totals() const;
  nlohmann::json to_json() const;
  static GroundTruthManifest from_json(const nlohmann::json& j);
};

struct GeneratedCorpus {
  /// (package file name, package) in generation order.
  std::vector<std::pair<std::string, FileTree>> packages;
  GroundTruthManifest manifest;
  MockScenario scenario;
};

/// Pure generation, deterministic under (spec, seed).
GeneratedCorpus generate_corpus(const CorpusSpec& spec,
                                const ApiCatalog& catalog);

/// Writes out_dir/packages/<app>.mapk (or a directory tree per app for the
/// Baidu-like platform), manifest.json and scenario.json. Throws
/// std::runtime_error on IO failure.
GeneratedCorpus generate_corpus(const CorpusSpec& spec,
                                const ApiCatalog& catalog,
                                const std::string& out_dir);

}  // namespace miniscope
