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

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "miniscope/catalog.hpp"
#include "miniscope/container.hpp"
#include "miniscope/corpusgen.hpp"
#include "miniscope/mockserver.hpp"
#include "miniscope/pipeline.hpp"
#include "miniscope/prober.hpp"
#include "miniscope/report.hpp"
#include "miniscope/scanner.hpp"
#include "test_support.hpp"

using nlohmann::json;
using namespace miniscope;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Every mock log collected during the run, with the allowlist in force.
struct EthicsLog {
  struct Entry {
    std::string source;
    std::vector<RequestRecord> records;
    std::set<std::string> allowlist;
  };
  std::vector<Entry> entries;

  void add(std::string source, const MockEngine& engine,
           std::set<std::string> allowlist) {
    entries.push_back({std::move(source), engine.records(), std::move(allowlist)});
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::string fmt(double v, int prec = 3) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(prec);
  s << v;
  return s.str();
}

PipelineConfig make_config(const ApiCatalog& catalog, Platform p) {
  PipelineConfig config;
  config.catalog = catalog;
  config.ruleset = DetectionRuleset::load_file(shipped_data_path(
      p == Platform::kWechatLike ? "rules/wechat.json" : "rules/baidu.json"));
  config.policy = ProbePolicy::defaults_for(catalog, 42);
  config.policy.min_interval = std::chrono::milliseconds(0);
  config.scanned_at = "2026-01-01T00:00:00Z";
  return config;
}

// ---------------------------------------------------------------- AC1

Outcome planted_corpus(EthicsLog& log) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto catalog = testing::wechat_catalog();
  CorpusSpec spec;
  spec.app_count = 1000;
  spec.rng_seed = 42;
  spec.fraction_whitelisted = 0.01;
  testing::TempDir dir("ac1");
  const auto corpus = generate_corpus(spec, catalog, dir.path().string());

  auto engine = std::make_shared<MockEngine>(corpus.scenario, catalog);
  MockServer server(engine);
  server.start();
  auto config = make_config(catalog, Platform::kWechatLike);
  config.probe = true;
  config.transport = std::make_shared<HttpTransport>(server.base_url());
  config.workers = 4;
  const auto run = run_corpus(expand_inputs({dir.path().string()}), config);
  server.stop();
  const double elapsed = seconds_since(t0);
  log.add("planted corpus", *engine, config.policy.get_allowlist);

  const auto s = summarize(run.reports);
  const auto t = corpus.manifest.totals();
  struct Row {
    const char* name;
    std::size_t got, want;
  };
  const Row rows[] = {
      {"apps", s.totals.total, t.apps},
      {"hardcoded_secrets", s.totals.hardcoded_secrets, t.planted},
      {"valid_tokens", s.totals.valid_tokens, t.valid},
      {"whitelisted", s.whitelisted, t.whitelisted},
      {"direct_apps", s.direct_invocation_apps, t.direct_invocation_apps},
      {"direct_occurrences", s.direct_invocation_occurrences,
       t.direct_invocation_occurrences},
  };
  bool ok = elapsed < 120.0;
  std::string detail;
  for (const auto& r : rows) {
    ok = ok && r.got == r.want;
    detail += std::string(r.name) + "=" + std::to_string(r.got) + "/" +
              std::to_string(r.want) + " ";
  }
  detail += "time=" + fmt(elapsed, 1) + "s";
  return {ok, detail};
}

// ---------------------------------------------------------------- AC2

struct RandomCase {
  ApiCatalog catalog;
  ResolutionContext context;
  // One predetermined observation per Get API, in catalog order.
  std::vector<GetObservation> pool;
};

const char* kTags[] = {"cloud_env_id", "cloud_function_name", "openid_in_code"};

RandomCase random_case(std::mt19937_64& rng) {
  auto below = [&](std::size_t n) {
    return static_cast<std::size_t>(rng() % n);
  };
  auto coin = [&](double p) {
    return std::uniform_real_distribution<double>(0, 1)(rng) < p;
  };

  const std::size_t n = 1 + below(6);
  std::vector<bool> is_get(n);
  for (std::size_t i = 0; i < n; ++i) is_get[i] = coin(0.5);
  // Catalog order is a permutation of rank order; references only go to
  // lower-ranked Get APIs, so the graph stays acyclic.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);

  std::map<std::size_t, std::set<std::string>> consumed;
  json apis = json::array();
  for (std::size_t rank : order) {
    std::vector<std::size_t> lower_gets;
    for (std::size_t r = 0; r < rank; ++r) {
      if (is_get[r]) lower_gets.push_back(r);
    }
    json params = json::array();
    const std::size_t pc = below(4);
    for (std::size_t p = 0; p < pc; ++p) {
      json sources = json::array();
      const std::size_t sc = 1 + below(2);
      for (std::size_t k = 0; k < sc; ++k) {
        std::size_t type = below(6);
        if (type == 3 && lower_gets.empty()) type = below(3);
        switch (type) {
          case 0:
            sources.push_back({{"type", "ACCESS_TOKEN"}});
            break;
          case 1:
            sources.push_back({{"type", "APP_ID"}});
            break;
          case 2:
            sources.push_back({{"type", "APP_SECRET"}});
            break;
          case 3: {
            const std::size_t src = lower_gets[below(lower_gets.size())];
            const std::string path = "f" + std::to_string(below(2)) + "[]";
            consumed[src].insert(path);
            sources.push_back({{"type", "FROM_GET_RESPONSE"},
                               {"api", "api" + std::to_string(src)},
                               {"json_path", path}});
            break;
          }
          case 4:
            sources.push_back(
                {{"type", "CODE_EXTRACTED"}, {"extractor", kTags[below(3)]}});
            break;
          default:
            sources.push_back({{"type", "ATTACKER_CONTROLLED"}});
        }
      }
      params.push_back(
          {{"name", "p" + std::to_string(p)}, {"provenance", sources}});
    }
    apis.push_back(testing::api_entry("api" + std::to_string(rank),
                                      is_get[rank] ? "Get" : "Modify", params));
  }

  RandomCase c;
  c.catalog = testing::make_catalog(apis);
  c.context.token_issued = coin(0.7);
  c.context.pair_validated = coin(0.7);
  for (const char* tag : kTags) {
    if (coin(0.5)) c.context.code_extractables.insert(tag);
  }
  for (const auto& api : c.catalog.apis()) {
    if (api.kind != ApiKind::kGet) continue;
    const std::size_t rank = std::stoul(api.name.substr(3));
    GetObservation o;
    o.api_name = api.name;
    o.attempts = 1;
    switch (below(4)) {
      case 0:
        o.succeeded = true;
        for (const auto& path : consumed[rank]) {
          if (coin(0.7)) o.extracted[path] = {"v-" + path};
        }
        break;
      case 1:
        o.succeeded = true;
        break;
      case 2:
        o.raw_code = 48001;
        break;
      default:
        o.raw_code = -2;
        o.attempts = 0;
    }
    c.pool.push_back(std::move(o));
  }
  return c;
}

struct OracleVerdict {
  Verdict verdict;
  std::vector<std::string> missing;
};

// Least fixpoint as the intersection of all pre-fixpoints, by enumeration.
std::vector<OracleVerdict> oracle(const ApiCatalog& catalog,
                                  const ResolutionContext& ctx,
                                  const std::vector<GetObservation>& obs) {
  const auto& apis = catalog.apis();
  const std::size_t n = apis.size();
  auto find_obs = [&](const std::string& name) -> const GetObservation* {
    for (const auto& o : obs) {
      if (o.api_name == name) return &o;
    }
    return nullptr;
  };
  auto refused_code = [&](const ApiSpec& a) {
    const auto* o = find_obs(a.name);
    return o && !o->succeeded && o->raw_code > 0 ? o->raw_code : 0;
  };
  auto resolves = [&](const Provenance& src, unsigned set) {
    switch (src.type) {
      case ProvenanceType::kAccessToken:
        return ctx.token_issued;
      case ProvenanceType::kAppId:
      case ProvenanceType::kAppSecret:
        return ctx.pair_validated;
      case ProvenanceType::kFromGetResponse: {
        const auto* o = find_obs(src.api);
        if (!o) return false;
        auto it = o->extracted.find(src.json_path);
        if (it == o->extracted.end() || it->second.empty()) return false;
        for (std::size_t j = 0; j < n; ++j) {
          if (apis[j].name == src.api) return ((set >> j) & 1u) != 0;
        }
        return false;
      }
      case ProvenanceType::kCodeExtracted:
        return ctx.code_extractables.count(src.extractor) > 0;
      case ProvenanceType::kAttackerControlled:
        return true;
    }
    return false;
  };
  auto param_ok = [&](const ParamRequirement& p, unsigned set) {
    for (const auto& s : p.sources) {
      if (resolves(s, set)) return true;
    }
    return false;
  };
  auto step = [&](unsigned set) {
    unsigned out = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (refused_code(apis[i]) != 0) continue;
      bool all = true;
      for (const auto& p : apis[i].params) all = all && param_ok(p, set);
      if (all) out |= 1u << i;
    }
    return out;
  };
  const unsigned full = (1u << n) - 1;
  unsigned lfp = full;
  for (unsigned s = 0; s <= full; ++s) {
    if ((step(s) & ~s) == 0) lfp &= s;
  }

  std::vector<OracleVerdict> out;
  for (std::size_t i = 0; i < n; ++i) {
    OracleVerdict v;
    const int refused = refused_code(apis[i]);
    bool only_unprobed = refused == 0;
    for (const auto& p : apis[i].params) {
      if (param_ok(p, lfp)) continue;
      v.missing.push_back(p.name);
      bool alt = false;
      for (const auto& s : p.sources) {
        alt = alt || (s.type == ProvenanceType::kFromGetResponse &&
                      find_obs(s.api) == nullptr);
      }
      only_unprobed = only_unprobed && alt;
    }
    if (refused != 0) v.missing.push_back("refused:" + std::to_string(refused));
    if ((lfp >> i) & 1u) {
      v.verdict = Verdict::kCallable;
    } else {
      v.verdict = only_unprobed ? Verdict::kUnknown : Verdict::kNotCallable;
    }
    out.push_back(std::move(v));
  }
  return out;
}

Outcome callability_oracle() {
  std::mt19937_64 rng(20260101);
  std::size_t comparisons = 0, mismatches = 0;
  std::map<Verdict, std::size_t> seen;
  std::string first_bad;
  for (int k = 0; k < 200; ++k) {
    const auto c = random_case(rng);
    const std::size_t g = c.pool.size();
    for (unsigned mask = 0; mask < (1u << g); ++mask) {
      std::vector<GetObservation> obs;
      for (std::size_t j = 0; j < g; ++j) {
        if ((mask >> j) & 1u) obs.push_back(c.pool[j]);
      }
      const auto got = resolve_callability(c.catalog, c.context, obs);
      const auto want = oracle(c.catalog, c.context, obs);
      for (std::size_t i = 0; i < want.size(); ++i) {
        ++comparisons;
        ++seen[want[i].verdict];
        if (got[i].verdict != want[i].verdict ||
            got[i].missing_params != want[i].missing) {
          ++mismatches;
          if (first_bad.empty()) {
            first_bad = " first=case" + std::to_string(k) + ":" +
                        c.catalog.apis()[i].name;
          }
        }
      }
    }
  }
  const bool covered = seen[Verdict::kCallable] > 0 &&
                       seen[Verdict::kNotCallable] > 0 &&
                       seen[Verdict::kUnknown] > 0;
  return {mismatches == 0 && covered,
          "catalogs=200 verdicts=" + std::to_string(comparisons) +
              " mismatches=" + std::to_string(mismatches) +
              " callable/not/unknown=" +
              std::to_string(seen[Verdict::kCallable]) + "/" +
              std::to_string(seen[Verdict::kNotCallable]) + "/" +
              std::to_string(seen[Verdict::kUnknown]) + first_bad};
}

// ---------------------------------------------------------------- AC3

Outcome ethics(const EthicsLog& log) {
  std::size_t total = 0, modify = 0, get = 0, off_list = 0;
  for (const auto& e : log.entries) {
    for (const auto& r : e.records) {
      ++total;
      if (r.classification == "modify") ++modify;
      if (r.classification == "get") {
        ++get;
        if (e.allowlist.count(r.api) == 0) ++off_list;
      }
    }
  }
  // A vacuous log would prove nothing.
  const bool ok = !log.entries.empty() && get > 0 && modify == 0 &&
                  off_list == 0;
  return {ok, "logs=" + std::to_string(log.entries.size()) +
                  " requests=" + std::to_string(total) +
                  " get=" + std::to_string(get) +
                  " modify=" + std::to_string(modify) +
                  " get_off_allowlist=" + std::to_string(off_list)};
}

// ---------------------------------------------------------------- AC4

std::string hex_string(std::mt19937_64& rng, std::size_t len) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  for (std::size_t i = 0; i < len; ++i) s += digits[rng() % 16];
  return s;
}

Outcome outcome_matrix(EthicsLog& log) {
  const auto catalog = testing::wechat_catalog();
  const auto policy = ProbePolicy::defaults_for(catalog, 7);
  std::mt19937_64 rng(4);

  enum Row { kIssued, kInvalid, kWlSecret, kWlDummy, kLimited };
  struct Cell {
    Row row;
    std::string app_id, secret, tried;
    TokenClass want;
  };
  MockScenario scenario;
  std::vector<Cell> cells;
  for (int row = 0; row < 5; ++row) {
    for (int col = 0; col < 10; ++col) {
      Cell c;
      c.row = static_cast<Row>(row);
      c.app_id = "wx" + hex_string(rng, 16);
      c.secret = hex_string(rng, 32);
      c.tried = c.secret;
      MockApp app;
      app.secret = c.secret;
      switch (c.row) {
        case kIssued:
          c.want = TokenClass::kTokenIssued;
          break;
        case kInvalid:
          c.tried = hex_string(rng, 32);
          c.want = TokenClass::kInvalidCredential;
          break;
        case kWlSecret:
        case kWlDummy:
          app.whitelist = {"203.0.113." + std::to_string(col + 1)};
          c.want = TokenClass::kIpNotWhitelisted;
          if (c.row == kWlDummy) c.tried = policy.dummy_secret;
          break;
        case kLimited:
          if (col % 2 == 0) {
            app.user_limited = true;
            c.want = TokenClass::kUserLimited;
          } else {
            app.quotas["getAccessToken"] = 0;
            c.want = TokenClass::kQuotaExceeded;
          }
          break;
      }
      scenario.apps[c.app_id] = app;
      cells.push_back(std::move(c));
    }
  }

  auto engine = std::make_shared<MockEngine>(scenario, catalog);
  MockServer server(engine);
  server.start();
  HttpTransport transport(server.base_url());
  std::size_t correct = 0;
  std::map<TokenClass, std::size_t> produced;
  for (const auto& c : cells) {
    const auto got = acquire_token(c.app_id, c.tried, catalog, transport);
    ++produced[got.classification];
    bool ok = got.classification == c.want;
    if (c.row == kIssued) ok = ok && got.access_token.has_value();
    if (c.row == kWlDummy) {
      ok = ok && check_whitelist(c.app_id, catalog, policy, transport) ==
                     WhitelistCheck::kWhitelistedElsewhere;
    }
    if (ok) ++correct;
  }
  server.stop();
  log.add("outcome matrix", *engine, policy.get_allowlist);

  std::string detail = "correct=" + std::to_string(correct) + "/50";
  for (const auto& [k, v] : produced) {
    detail += " " + std::string(to_string(k)) + "=" + std::to_string(v);
  }
  return {correct == 50, detail};
}

// ---------------------------------------------------------------- AC5

Outcome temporal() {
  const std::string dir = MINISCOPE_TEST_FIXTURES;
  const auto d = diff_snapshots(read_report_jsonl(dir + "/temporal_old.jsonl"),
                                read_report_jsonl(dir + "/temporal_new.jsonl"));
  auto count = [&](Transition t) {
    auto it = d.counts.find(t);
    return it == d.counts.end() ? std::size_t{0} : it->second;
  };
  const std::size_t got[] = {count(Transition::kSameSecretStillValid),
                             count(Transition::kRemovedButValid),
                             count(Transition::kRotatedRehardcoded),
                             count(Transition::kInvalidatedRemoved),
                             count(Transition::kWhitelistNewlyEnabled)};
  const std::size_t want[] = {83, 4, 3, 9, 1};
  std::size_t other = 0;
  for (const auto& [t, n] : d.counts) other += n;
  other -= got[0] + got[1] + got[2] + got[3] + got[4];
  bool ok = other == 0 && d.only_in_old.empty() && d.only_in_new.empty();
  std::string detail = "counts=";
  for (int i = 0; i < 5; ++i) {
    ok = ok && got[i] == want[i];
    detail += (i ? "," : "") + std::to_string(got[i]);
  }
  return {ok, detail + " other=" + std::to_string(other)};
}

// ---------------------------------------------------------------- AC6

struct TableRow {
  const char* api;
  const char* flags;
  const char* impact;
};

// Published consequence table, transcribed by hand.
const TableRow kWechatTable[] = {
    {"clearQuotaByAppSecret", "CE", "High"},
    {"clearQuota", "CE", "High"},
    {"managePlugin", "ACE", "High"},
    {"deleteNearbyPoi", "CE", "High"},
    {"setShowStatus", "CE", "High"},
    {"managePluginApplication", "ACE", "High"},
    {"invokeCloudFunctions", "ABCE", "High"},
    {"databaseCollectionGet", "AE", "High"},
    {"databaseCollectionAdd", "CE", "High"},
    {"databaseCollectionDelete", "CE", "High"},
    {"databaseAdd", "CE", "High"},
    {"databaseDelete", "CE", "High"},
    {"databaseUpdate", "CE", "High"},
    {"databaseQuery", "ACE", "High"},
    {"setUpdatableMsg", "BCDE", "High"},
    {"uploadTempMedia", "CE", "Medium"},
    {"getApiQuota", "AE", "Medium"},
    {"getDomainInfo", "AE", "Medium"},
    {"getFeedback", "AE", "Medium"},
    {"customerServiceMessage.send", "BDE", "Medium"},
    {"getQcloudToken", "AE", "Medium"},
    {"getAllDelivery", "AE", "Medium"},
    {"getPrinter", "AE", "Medium"},
    {"updatePrinter", "CE", "Medium"},
    {"createActivityId", "AE", "Low"},
    {"getNearbyPoiList", "AE", "Low"},
};

const TableRow kBaiduTable[] = {
    {"addTemplate", "CE", "Medium"},
    {"submitResource", "CE", "Medium"},
    {"submitSitemap", "CE", "Medium"},
    {"interfaceSubmission", "CE", "Medium"},
    {"submitsku", "CE", "Medium"},
    {"createCoupon", "CE", "Medium"},
    {"submitcoupon", "CE", "Medium"},
    {"ManageCoupon", "CE", "Medium"},
    {"getTemplateList", "AE", "Medium"},
    {"deleteMessageTemplate", "CE", "Medium"},
};

struct MappingResult {
  std::size_t matched = 0;
  std::size_t rows = 0;
  std::string misses;
};

template <std::size_t N>
MappingResult consequence_rows(Platform platform, const TableRow (&table)[N],
                               EthicsLog& log) {
  const bool wechat = platform == Platform::kWechatLike;
  const auto catalog =
      wechat ? testing::wechat_catalog() : testing::baidu_catalog();
  const std::string app_id = wechat ? "wx1f2e3d4c5b6a7980" : "31415926";
  const std::string secret = wechat ? "9c1e5a7b3d2f4e6a8b0c1d2e3f4a5b6c"
                                    : "Qm7xK2pL9vR4tY8wZ3nB6cD1fG5hJ0aS";

  MockApp app;
  app.secret = secret;
  if (wechat) {
    app.fixtures["getFeedback"] = {{"list", {{{"openid", "oFb001"}}}}};
    app.fixtures["getPrinter"] = {{"openid", {"oPr001"}}};
    app.fixtures["getNearbyPoiList"] = {
        {"data", {{"poi_list", {{{"poi_id", "poi-1"}}}}}}};
    app.fixtures["createActivityId"] = {{"activity_id", "act-1"}};
    app.fixtures["databaseCollectionGet"] = {
        {"collections", {{{"name", "orders"}}}}};
  } else {
    app.fixtures["getTemplateList"] = {
        {"data", {{"list", {{{"template_id", "tpl-1"}}}}}}};
  }
  MockScenario scenario;
  scenario.apps[app_id] = app;

  std::string code;
  if (wechat) {
    code = "const appid = \"" + app_id + "\";\nconst appsecret = \"" + secret +
           "\";\nwx.cloud.init({ env: \"prod-7gx1\" });\n"
           "wx.cloud.callFunction({ name: \"login\" });\n";
  } else {
    code = "const appid = \"" + app_id + "\";\nconst secret = \"" + secret +
           "\";\n";
  }
  MiniAppPackage pkg;
  pkg.entries.push_back(testing::entry("app.js", code));

  MockEngine engine(scenario, catalog);
  auto config = make_config(catalog, platform);
  config.probe = true;
  config.transport = std::make_shared<InProcessTransport>(engine);
  Scanner scanner(config.ruleset, catalog);
  const auto report = analyze_loaded(pkg, "table", scanner, config);
  const auto finding = scanner.scan_package(pkg, "table");
  // A fresh token for the isolated reports; the engine log stays separate.
  MockEngine side(scenario, catalog);
  InProcessTransport side_transport(side);
  const auto token = acquire_token(app_id, secret, catalog, side_transport);
  log.add(wechat ? "consequence wechat" : "consequence baidu", engine,
          config.policy.get_allowlist);

  MappingResult out;
  out.rows = N;
  std::set<std::string> tabled;
  for (const auto& row : table) {
    tabled.insert(row.api);
    const CallabilityVerdict* v = nullptr;
    for (const auto& c : report.callability) {
      if (c.api_name == row.api) v = &c;
    }
    bool ok = v != nullptr && v->verdict == Verdict::kCallable;
    if (ok) {
      ValidationResult only;
      only.probed = true;
      only.app_id = app_id;
      only.token_outcome = token;
      only.tried_secret = secret;
      only.whitelist = WhitelistStatus::kDisabled;
      only.verdicts = {*v};
      const auto r = build_report(finding, only, catalog, "t");
      ok = r.consequence_flags.letters() == row.flags &&
           to_string(r.max_severity) == row.impact;
    }
    if (ok) {
      ++out.matched;
    } else {
      out.misses += std::string(" ") + row.api;
    }
  }
  // The catalog must carry exactly the tabled APIs.
  for (const auto& api : catalog.apis()) {
    if (tabled.count(api.name) == 0) out.misses += " extra:" + api.name;
  }
  if (catalog.apis().size() != N) out.matched = 0;
  return out;
}

Outcome consequence_mapping(EthicsLog& log) {
  const auto w = consequence_rows(Platform::kWechatLike, kWechatTable, log);
  const auto b = consequence_rows(Platform::kBaiduLike, kBaiduTable, log);
  const bool ok = w.matched == w.rows && b.matched == b.rows && w.rows == 26 &&
                  b.rows == 10 && w.misses.empty() && b.misses.empty();
  return {ok, "wechat=" + std::to_string(w.matched) + "/" +
                  std::to_string(w.rows) + " baidu=" +
                  std::to_string(b.matched) + "/" + std::to_string(b.rows) +
                  w.misses + b.misses};
}

// ---------------------------------------------------------------- AC7

std::uint32_t rd32(const std::string& b, std::size_t at) {
  return (std::uint32_t(std::uint8_t(b[at])) << 24) |
         (std::uint32_t(std::uint8_t(b[at + 1])) << 16) |
         (std::uint32_t(std::uint8_t(b[at + 2])) << 8) |
         std::uint32_t(std::uint8_t(b[at + 3]));
}

void wr32(std::string& b, std::size_t at, std::uint32_t v) {
  b[at] = char(v >> 24);
  b[at + 1] = char(v >> 16);
  b[at + 2] = char(v >> 8);
  b[at + 3] = char(v);
}

// Decodes code points and rejects overlongs, surrogates and values past
// U+10FFFF.
bool ref_utf8(const std::string& s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const std::uint8_t c = s[i];
    std::size_t len;
    std::uint32_t cp;
    if (c < 0x80) {
      len = 1;
      cp = c;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > s.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      const std::uint8_t cc = s[i + k];
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    static const std::uint32_t min_cp[] = {0, 0, 0x80, 0x800, 0x10000};
    if (cp < min_cp[len] || cp > 0x10FFFF) return false;
    if (cp >= 0xD800 && cp <= 0xDFFF) return false;
    i += len;
  }
  return true;
}

bool ref_name_ok(const std::string& name) {
  if (name.empty() || name[0] == '/') return false;
  if (name.find('\\') != std::string::npos) return false;
  if (name.find('\0') != std::string::npos) return false;
  if (!ref_utf8(name)) return false;
  std::size_t start = 0;
  while (true) {
    const auto slash = name.find('/', start);
    const auto seg = name.substr(start, slash == std::string::npos
                                            ? std::string::npos
                                            : slash - start);
    if (seg.empty() || seg == "." || seg == "..") return false;
    if (slash == std::string::npos) break;
    start = slash + 1;
  }
  return true;
}

// nullopt means the input is invalid.
std::optional<std::vector<PackageEntry>> ref_decode(const std::string& b) {
  const std::size_t size = b.size();
  if (size < 14 || std::uint8_t(b[0]) != 0xBE || std::uint8_t(b[13]) != 0xED) {
    return std::nullopt;
  }
  if (rd32(b, 1) != 0) return std::nullopt;
  const std::uint64_t index_len = rd32(b, 5);
  const std::uint64_t body_len = rd32(b, 9);
  if (index_len < 4 || 14 + index_len > size) return std::nullopt;
  const std::uint64_t index_end = 14 + index_len;
  const std::uint64_t count = rd32(b, 14);
  if (count * 12 > index_len - 4) return std::nullopt;
  std::uint64_t pos = 18;
  std::vector<PackageEntry> entries;
  std::set<std::string> names;
  for (std::uint64_t k = 0; k < count; ++k) {
    if (pos + 4 > index_end) return std::nullopt;
    const std::uint64_t nlen = rd32(b, pos);
    pos += 4;
    if (pos + nlen + 8 > index_end) return std::nullopt;
    PackageEntry e;
    e.name = b.substr(pos, nlen);
    pos += nlen;
    e.offset = rd32(b, pos);
    e.size = rd32(b, pos + 4);
    pos += 8;
    if (!ref_name_ok(e.name) || !names.insert(e.name).second) {
      return std::nullopt;
    }
    entries.push_back(std::move(e));
  }
  if (pos != index_end) return std::nullopt;
  if (index_end + body_len != size) return std::nullopt;
  std::uint64_t total = 0;
  for (auto& e : entries) {
    if (e.offset < index_end || std::uint64_t(e.offset) + e.size > size) {
      return std::nullopt;
    }
    total += e.size;
    e.content = b.substr(e.offset, e.size);
  }
  if (total != body_len) return std::nullopt;
  auto sorted = entries;
  std::sort(sorted.begin(), sorted.end(), [](const auto& x, const auto& y) {
    return std::tie(x.offset, x.size) < std::tie(y.offset, y.size);
  });
  for (std::size_t k = 1; k < sorted.size(); ++k) {
    if (std::uint64_t(sorted[k - 1].offset) + sorted[k - 1].size >
        sorted[k].offset) {
      return std::nullopt;
    }
  }
  return entries;
}

FileTree random_tree(std::mt19937_64& rng) {
  static const char* parts[] = {"app", "pages", "utils", "a", "b.js",
                                "config.json", "\xe4\xb8\xad", "x-y", "img"};
  FileTree tree;
  const std::size_t files = rng() % 7;
  for (std::size_t f = 0; f < files; ++f) {
    std::string name;
    const std::size_t depth = 1 + rng() % 3;
    for (std::size_t d = 0; d < depth; ++d) {
      if (d) name += '/';
      name += parts[rng() % 9];
    }
    std::string content(rng() % 40, '\0');
    for (auto& ch : content) ch = char(rng());
    tree[name] = content;
  }
  return tree;
}

Outcome codec_robustness() {
  std::mt19937_64 rng(7);
  std::size_t inputs = 0, rejected = 0, accepted = 0, disagreements = 0,
              wrong_exception = 0, truncations = 0, truncations_rejected = 0;
  static const std::uint32_t interesting[] = {0, 1, 3, 4, 12, 13, 14, 17, 18,
                                              0x7FFFFFFF, 0x80000000,
                                              0xFFFFFFFE, 0xFFFFFFFF};
  auto field_offsets = [](const std::string& b) {
    // Header fields plus every u32 the record walk would read.
    std::vector<std::size_t> at = {1, 5, 9};
    if (b.size() >= 18) {
      at.push_back(14);
      std::size_t pos = 18;
      const std::size_t count = rd32(b, 14);
      for (std::size_t k = 0; k < count && pos + 4 <= b.size(); ++k) {
        at.push_back(pos);
        const std::size_t nlen = rd32(b, pos);
        pos += 4 + nlen;
        if (pos + 8 > b.size()) break;
        at.push_back(pos);
        at.push_back(pos + 4);
        pos += 8;
      }
    }
    return at;
  };

  while (inputs < 10000) {
    std::string b = pack(random_tree(rng));
    bool is_truncation = false;
    switch (rng() % 7) {
      case 0:
        b.resize(rng() % b.size());
        is_truncation = true;
        break;
      case 1:
        for (std::size_t k = 1 + rng() % 3; k > 0; --k) {
          b[rng() % b.size()] ^= char(1 + rng() % 255);
        }
        break;
      case 2: {
        const auto at = field_offsets(b);
        const std::size_t off = at[rng() % at.size()];
        std::uint32_t v = interesting[rng() % 13];
        switch (rng() % 4) {
          case 0:
            v = std::uint32_t(b.size()) + std::uint32_t(rng() % 3) - 1;
            break;
          case 1:
            v = rd32(b, off) + std::uint32_t(rng() % 3) - 1;
            break;
          default:
            break;
        }
        wr32(b, off, v);
        break;
      }
      case 3:
        for (std::size_t k = 1 + rng() % 8; k > 0; --k) b += char(rng());
        break;
      case 4: {
        std::string r(rng() % 64, '\0');
        for (auto& ch : r) ch = char(rng());
        if (!r.empty() && rng() % 2) r[0] = char(0xBE);
        if (r.size() >= 14 && rng() % 2) r[13] = char(0xED);
        b = r;
        break;
      }
      case 5:
        b.insert(b.begin() + long(rng() % (b.size() + 1)), char(rng()));
        break;
      default:
        b.erase(b.begin() + long(rng() % b.size()));
        break;
    }
    ++inputs;
    const auto want = ref_decode(b);
    std::optional<MiniAppPackage> got;
    bool typed_reject = false;
    try {
      got = unpack(b);
    } catch (const ContainerError&) {
      typed_reject = true;
    } catch (...) {
      ++wrong_exception;
      continue;
    }
    if (is_truncation) {
      ++truncations;
      if (typed_reject) ++truncations_rejected;
    }
    if (typed_reject) {
      ++rejected;
      if (want) ++disagreements;
    } else {
      ++accepted;
      if (!want || got->entries != *want) ++disagreements;
    }
  }

  std::size_t roundtrips = 0;
  for (int k = 0; k < 1000; ++k) {
    const auto tree = random_tree(rng);
    const auto bytes = pack(tree);
    try {
      const auto pkg = unpack(bytes);
      FileTree back;
      for (const auto& e : pkg.entries) back[e.name] = e.content;
      if (back == tree && pack(back) == bytes && ref_decode(bytes)) {
        ++roundtrips;
      }
    } catch (...) {
    }
  }

  const bool ok = disagreements == 0 && wrong_exception == 0 &&
                  truncations == truncations_rejected && roundtrips == 1000;
  return {ok, "inputs=" + std::to_string(inputs) +
                  " rejected=" + std::to_string(rejected) +
                  " accepted_valid=" + std::to_string(accepted) +
                  " disagreements=" + std::to_string(disagreements) +
                  " untyped=" + std::to_string(wrong_exception) +
                  " truncations_rejected=" +
                  std::to_string(truncations_rejected) + "/" +
                  std::to_string(truncations) +
                  " roundtrips=" + std::to_string(roundtrips) + "/1000"};
}

// ---------------------------------------------------------------- AC8

Outcome throughput() {
  const auto catalog = testing::wechat_catalog();
  CorpusSpec spec;
  spec.app_count = 1;
  spec.fraction_with_secret = 1.0;
  spec.fraction_direct_invocations = 1.0;
  spec.fraction_cloud = 1.0;
  spec.files_per_app = {10, 10};
  spec.loc_per_file = {1150, 1150};
  spec.rng_seed = 9;
  const auto corpus = generate_corpus(spec, catalog);
  const std::string bytes = pack(corpus.packages.front().second);
  const auto rules = DetectionRuleset::load_file(
      shipped_data_path("rules/wechat.json"));
  Scanner scanner(rules, catalog);

  const auto t0 = std::chrono::steady_clock::now();
  const auto pkg = unpack(bytes);
  const auto finding = scanner.scan_package(pkg, "big");
  const double elapsed = seconds_since(t0);

  std::size_t lines = 0;
  for (const auto& e : pkg.entries) {
    if (scanner.should_scan(e.name)) {
      lines += std::count(e.content.begin(), e.content.end(), '\n') + 1;
    }
  }
  const bool ok = elapsed <= 3.58 && lines >= 10000 && finding.has_secret();
  return {ok, "lines=" + std::to_string(lines) +
                  " bytes=" + std::to_string(bytes.size()) +
                  " scan_seconds=" + fmt(elapsed, 4) + " limit=3.58"};
}

// ---------------------------------------------------------------- AC9

Outcome clean_audit() {
  std::size_t packages = 0, candidates = 0;
  const struct {
    Platform platform;
    std::size_t count;
  } runs[] = {{Platform::kWechatLike, 200}, {Platform::kBaiduLike, 50}};
  for (const auto& run : runs) {
    const bool wechat = run.platform == Platform::kWechatLike;
    const auto catalog =
        wechat ? testing::wechat_catalog() : testing::baidu_catalog();
    const auto rules = DetectionRuleset::load_file(shipped_data_path(
        wechat ? "rules/wechat.json" : "rules/baidu.json"));
    CorpusSpec spec;
    spec.platform = run.platform;
    spec.app_count = run.count;
    spec.fraction_with_secret = 0.0;
    spec.plant_decoys = true;
    spec.rng_seed = wechat ? 250 : 251;
    const auto corpus = generate_corpus(spec, catalog);
    Scanner scanner(rules, catalog);
    for (const auto& [name, tree] : corpus.packages) {
      MiniAppPackage pkg = unpack(pack(tree));
      candidates += scanner.scan_package(pkg, name).candidates.size();
      ++packages;
    }
  }
  return {packages == 250 && candidates == 0,
          "packages=" + std::to_string(packages) +
              " candidates=" + std::to_string(candidates)};
}

}  // namespace

int main() {
  EthicsLog log;
  struct Check {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Check> checks = {
      {1, "planted corpus fidelity", [&] { return planted_corpus(log); }},
      {2, "callability oracle equivalence", callability_oracle},
      {4, "token outcome discrimination", [&] { return outcome_matrix(log); }},
      {5, "temporal diff", temporal},
      {6, "consequence mapping", [&] { return consequence_mapping(log); }},
      {7, "codec robustness", codec_robustness},
      {8, "scan throughput", throughput},
      {9, "clean package audit", clean_audit},
      // Runs last so it sees every mock log above.
      {3, "probe ethics", [&] { return ethics(log); }},
  };

  std::map<int, std::string> lines;
  int failures = 0;
  for (const auto& c : checks) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    lines[c.id] = "AC" + std::to_string(c.id) + " [PRIMARY] " + c.name + ": " +
                  (o.pass ? "PASS" : "FAIL") + " - " + o.detail;
  }
  for (const auto& [id, line] : lines) std::cout << line << "\n";
  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
