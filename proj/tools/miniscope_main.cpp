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

#include <CLI11.hpp>

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "miniscope/catalog.hpp"
#include "miniscope/corpusgen.hpp"
#include "miniscope/mockserver.hpp"
#include "miniscope/pipeline.hpp"
#include "miniscope/report.hpp"
#include "miniscope/scanner.hpp"
#include "miniscope/transport.hpp"
#include "miniscope/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace miniscope;

namespace {

// Exit codes: 0 ok, 1 configuration or IO error, 2 findings present.
constexpr int kExitError = 1;
constexpr int kExitFindings = 2;

int fail(const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}}.dump()
            << std::endl;
  return kExitError;
}

struct CommonOptions {
  std::string platform = "wechat";
  std::string catalog;
  std::string rules;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--platform", o.platform, "wechat or baidu")
      ->capture_default_str();
  cmd->add_option("--catalog", o.catalog,
                  "API catalog JSON (default: shipped for --platform)");
  cmd->add_option("--rules", o.rules,
                  "detection ruleset JSON (default: shipped for --platform)");
}

std::string platform_file(Platform p) {
  return p == Platform::kBaiduLike ? "baidu.json" : "wechat.json";
}

ApiCatalog resolve_catalog(const CommonOptions& o) {
  if (!o.catalog.empty()) return load_catalog_file(o.catalog);
  Platform p = platform_from_string(o.platform);
  return load_catalog_file(shipped_data_path("catalog/" + platform_file(p)));
}

DetectionRuleset resolve_rules(const CommonOptions& o, Platform p) {
  if (!o.rules.empty()) return DetectionRuleset::load_file(o.rules);
  return DetectionRuleset::load_file(
      shipped_data_path("rules/" + platform_file(p)));
}

struct ScanOptions {
  CommonOptions common;
  std::vector<std::string> inputs;
  std::string endpoint;
  bool no_probe = false;
  std::size_t workers = 1;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out = "miniscope-out";
  bool fail_on_findings = false;
  bool own_apps = false;
  int min_interval_ms = 200;
  int budget = 1;
  std::string scanned_at;
  std::string known_pairs;
  bool strict_unreadable = false;
  std::vector<std::string> allowlist;
  bool no_get_probing = false;
};

int cmd_scan(ScanOptions& o) {
  PipelineConfig config;
  try {
    config.catalog = resolve_catalog(o.common);
    config.ruleset = resolve_rules(o.common, config.catalog.platform());
  } catch (const std::exception& e) {
    return fail("config", e.what());
  }
  if (config.ruleset.platform != config.catalog.platform()) {
    return fail("config", "ruleset and catalog platforms differ");
  }
  if (o.workers < 1) return fail("config", "--workers must be >= 1");

  std::string endpoint = o.endpoint;
  if (endpoint.empty()) {
    if (const char* env = std::getenv("MINISCOPE_ENDPOINT")) endpoint = env;
  }
  config.probe = !o.no_probe;
  if (config.probe) {
    if (endpoint.empty()) {
      return fail("config",
                  "probing needs --endpoint or MINISCOPE_ENDPOINT; "
                  "use --no-probe for a static scan");
    }
    Endpoint ep;
    try {
      ep = parse_endpoint(endpoint);
    } catch (const std::exception& e) {
      return fail("config", e.what());
    }
    if (!is_loopback_host(ep.host) && !o.own_apps) {
      return fail("config",
                  "non-loopback endpoint " + ep.host +
                      " requires --i-own-these-apps");
    }
    config.policy = ProbePolicy::defaults_for(
        config.catalog, o.seed_set ? o.seed : std::random_device{}());
    config.policy.min_interval = std::chrono::milliseconds(o.min_interval_ms);
    config.policy.per_api_call_budget = o.budget;
    config.policy.allow_get_probing = !o.no_get_probing;
    if (!o.allowlist.empty()) {
      config.policy.get_allowlist = {o.allowlist.begin(), o.allowlist.end()};
    }
    try {
      config.policy.validate(config.catalog);
    } catch (const std::exception& e) {
      return fail("config", e.what());
    }
    config.transport = std::make_shared<HttpTransport>(endpoint);
  }
  config.workers = o.workers;
  config.scanned_at = o.scanned_at.empty() ? utc_timestamp_now() : o.scanned_at;
  config.unreadable = o.strict_unreadable ? UnreadablePolicy::kFail
                                          : UnreadablePolicy::kSkipWithWarning;

  try {
    if (!o.known_pairs.empty()) {
      config.known_pairs = load_known_pairs(o.known_pairs);
    }
    auto inputs = expand_inputs(o.inputs);
    CorpusRun run = run_corpus(inputs, config);
    for (const auto& w : run.warnings) {
      std::cerr << json{{"warning", w}}.dump() << std::endl;
    }
    CorpusSummary summary = summarize(run.reports);
    const fs::path out(o.out);
    write_report_jsonl((out / "report.jsonl").string(), run.reports);
    write_file(out / "summary.json", to_json(summary).dump(2) + "\n");
    write_file(out / "consequences.csv",
               consequence_csv(config.catalog, summary));
    std::cout << json{{"packages", summary.totals.total},
                      {"hardcoded_secrets", summary.totals.hardcoded_secrets},
                      {"valid_tokens", summary.totals.valid_tokens},
                      {"out", out.string()}}
                     .dump()
              << std::endl;
    if (o.fail_on_findings && summary.totals.hardcoded_secrets > 0) {
      return kExitFindings;
    }
  } catch (const std::exception& e) {
    return fail("io", e.what());
  }
  return 0;
}

int cmd_diff(const std::string& old_path, const std::string& new_path,
             const std::string& out) {
  try {
    auto d = diff_snapshots(read_report_jsonl(old_path),
                            read_report_jsonl(new_path));
    const std::string text = to_json(d).dump(2) + "\n";
    if (out.empty() || out == "-") {
      std::cout << text;
    } else {
      write_file(out, text);
      std::cout << to_json(d)["counts"].dump() << std::endl;
    }
  } catch (const std::exception& e) {
    return fail("io", e.what());
  }
  return 0;
}

int cmd_serve(const CommonOptions& common, const std::string& scenario_path,
              const std::string& bind) {
  std::shared_ptr<MockEngine> engine;
  std::string host = "127.0.0.1";
  int port = 8080;
  try {
    auto colon = bind.rfind(':');
    if (colon == std::string::npos) throw std::invalid_argument("--bind HOST:PORT");
    host = bind.substr(0, colon);
    port = std::stoi(bind.substr(colon + 1));
    engine = std::make_shared<MockEngine>(MockScenario::load_file(scenario_path),
                                          resolve_catalog(common));
  } catch (const std::exception& e) {
    return fail("config", e.what());
  }
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  MockServer server(engine);
  try {
    server.start(host, port);
  } catch (const std::exception& e) {
    return fail("bind", e.what());
  }
  std::cout << json{{"listening", server.base_url()}}.dump() << std::endl;
  int sig = 0;
  sigwait(&set, &sig);
  server.stop();
  return 0;
}

int cmd_gen(const std::string& spec_path, const std::string& out,
            std::optional<std::uint64_t> seed,
            std::optional<std::size_t> app_count, const std::string& catalog) {
  try {
    json j = spec_path.empty() ? json::object()
                               : json::parse(read_file(spec_path));
    CorpusSpec spec = CorpusSpec::from_json(j);
    if (seed) spec.rng_seed = *seed;
    if (app_count) spec.app_count = *app_count;
    spec.validate();
    ApiCatalog cat =
        catalog.empty()
            ? load_catalog_file(shipped_data_path(
                  "catalog/" + platform_file(spec.platform)))
            : load_catalog_file(catalog);
    auto corpus = generate_corpus(spec, cat, out);
    auto t = corpus.manifest.totals();
    std::cout << json{{"apps", t.apps},
                      {"planted", t.planted},
                      {"valid", t.valid},
                      {"whitelisted", t.whitelisted},
                      {"direct_invocation_apps", t.direct_invocation_apps},
                      {"out", out}}
                     .dump()
              << std::endl;
  } catch (const std::exception& e) {
    return fail("config", e.what());
  }
  return 0;
}

int cmd_catalog_check(const std::vector<std::string>& files) {
  int rc = 0;
  for (const auto& f : files) {
    try {
      ApiCatalog c = load_catalog_file(f);
      std::cout << json{{"file", f},
                        {"platform", std::string(to_string(c.platform()))},
                        {"apis", c.apis().size()},
                        {"get", c.count(ApiKind::kGet)},
                        {"modify", c.count(ApiKind::kModify)},
                        {"direct_only", c.direct_only().size()}}
                       .dump()
                << std::endl;
    } catch (const CatalogError& e) {
      std::cerr << json{{"error",
                         {{"kind", std::string(to_string(e.code()))},
                          {"file", f},
                          {"message", e.what()}}}}
                       .dump()
                << std::endl;
      rc = kExitError;
    } catch (const std::exception& e) {
      rc = fail("io", e.what());
    }
  }
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"miniscope: find hard-coded mini-app secrets and rate their "
               "server-side impact"};
  app.require_subcommand(1);

  ScanOptions scan;
  auto* scan_cmd = app.add_subcommand("scan", "scan packages and write reports");
  add_common(scan_cmd, scan.common);
  scan_cmd->add_option("inputs", scan.inputs, "package files or directories")
      ->required();
  scan_cmd->add_option("--endpoint", scan.endpoint,
                       "base URL of the platform (or mock) to probe");
  scan_cmd->add_flag("--no-probe", scan.no_probe, "static scan only");
  scan_cmd->add_option("--workers", scan.workers)->capture_default_str();
  scan_cmd->add_option("--seed", scan.seed, "seed for the dummy secret")
      ->each([&](const std::string&) { scan.seed_set = true; });
  scan_cmd->add_option("--out", scan.out, "output directory")
      ->capture_default_str();
  scan_cmd->add_flag("--fail-on-findings", scan.fail_on_findings,
                     "exit 2 when any secret is found");
  scan_cmd->add_flag("--i-own-these-apps", scan.own_apps,
                     "allow a non-loopback endpoint");
  scan_cmd->add_option("--min-interval-ms", scan.min_interval_ms)
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  scan_cmd->add_option("--budget", scan.budget, "calls per Get API")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  scan_cmd->add_option("--allow-get", scan.allowlist,
                       "Get APIs that may be probed (default: all allowed)");
  scan_cmd->add_flag("--no-get-probing", scan.no_get_probing);
  scan_cmd->add_option("--scanned-at", scan.scanned_at,
                       "timestamp stamped into reports");
  scan_cmd->add_option("--known-pairs", scan.known_pairs,
                       "JSON object app_id -> secret tried in addition");
  scan_cmd->add_flag("--strict-unreadable", scan.strict_unreadable,
                     "fail a package on unreadable files instead of skipping");

  std::string diff_old, diff_new, diff_out;
  auto* diff_cmd = app.add_subcommand("diff", "compare two report.jsonl files");
  diff_cmd->add_option("old", diff_old)->required();
  diff_cmd->add_option("new", diff_new)->required();
  diff_cmd->add_option("--out", diff_out, "diff.json path (default stdout)");

  CommonOptions serve_common;
  std::string scenario, bind = "127.0.0.1:8080";
  auto* serve_cmd = app.add_subcommand("serve-mock", "run the mock platform");
  add_common(serve_cmd, serve_common);
  serve_cmd->add_option("scenario", scenario)->required();
  serve_cmd->add_option("--bind", bind)->capture_default_str();

  std::string gen_spec, gen_out = "corpus", gen_catalog;
  std::optional<std::uint64_t> gen_seed;
  std::optional<std::size_t> gen_count;
  auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic corpus");
  gen_cmd->add_option("spec", gen_spec, "corpus spec JSON (optional)");
  gen_cmd->add_option("--out", gen_out)->capture_default_str();
  gen_cmd->add_option("--seed", gen_seed);
  gen_cmd->add_option("--app-count", gen_count);
  gen_cmd->add_option("--catalog", gen_catalog);

  std::vector<std::string> check_files;
  auto* check_cmd =
      app.add_subcommand("catalog-check", "validate catalog files");
  check_cmd->add_option("files", check_files)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return kExitError;
  }

  if (*scan_cmd) return cmd_scan(scan);
  if (*diff_cmd) return cmd_diff(diff_old, diff_new, diff_out);
  if (*serve_cmd) return cmd_serve(serve_common, scenario, bind);
  if (*gen_cmd) return cmd_gen(gen_spec, gen_out, gen_seed, gen_count, gen_catalog);
  if (*check_cmd) return cmd_catalog_check(check_files);
  return kExitError;
}
