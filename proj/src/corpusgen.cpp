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

#include "miniscope/corpusgen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>

#include "miniscope/util.hpp"

namespace miniscope {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr char kHex[] = "0123456789abcdef";
constexpr char kAlnum[] =
    "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz";
constexpr char kLowerAlnum[] = "0123456789abcdefghijklmnopqrstuvwxyz";

std::string random_from(SeededRng& rng, const char* alphabet, std::size_t n,
                        std::size_t len) {
  std::string s(len, '0');
  for (auto& c : s) c = alphabet[rng.below(n)];
  return s;
}

std::string random_hex(SeededRng& rng, std::size_t len) {
  return random_from(rng, kHex, 16, len);
}

std::string random_alnum(SeededRng& rng, std::size_t len) {
  return random_from(rng, kAlnum, 62, len);
}

template <typename T>
void shuffle(std::vector<T>& v, SeededRng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[rng.below(i)]);
  }
}

std::size_t count_of(double fraction, std::size_t n) {
  return static_cast<std::size_t>(
      std::floor(fraction * static_cast<double>(n) + 1e-9));
}

// First k of a shuffled index range.
std::set<std::size_t> pick(std::vector<std::size_t> pool, std::size_t k,
                           SeededRng& rng) {
  shuffle(pool, rng);
  pool.resize(std::min(k, pool.size()));
  return {pool.begin(), pool.end()};
}

struct Mark {
  // 0 app id, 1+i secret i, -1 direct invocation, -2 nothing
  int what = -2;
  std::size_t offset = 0;
  std::size_t length = 0;
  std::size_t invocation = 0;
};

struct Snippet {
  std::string text;
  std::vector<Mark> marks;
};

struct FileDraft {
  std::string name;
  std::vector<std::string> lines;
  // (line index to insert before, snippet)
  std::vector<std::pair<std::size_t, Snippet>> inserts;
};

class AppWriter {
 public:
  explicit AppWriter(SeededRng& rng) : rng_(rng) {}

  std::string filler_js(std::size_t loc) {
    std::string out;
    std::size_t lines = 0;
    std::size_t fn = 0;
    while (lines < loc) {
      ++fn;
      const auto k = rng_.between(1, 999);
      switch (rng_.below(4)) {
        case 0:
          out += "function f" + std::to_string(fn) + "(a, b) {\n";
          out += "  let v = a + " + std::to_string(k) + ";\n";
          out += "  if (v > b) { return v - b; }\n";
          out += "  return b;\n}\n";
          lines += 5;
          break;
        case 1:
          out += "const list" + std::to_string(fn) + " = [" +
                 std::to_string(k) + ", " + std::to_string(k % 97) + "];\n";
          ++lines;
          break;
        case 2:
          out += "console.log(\"step " + std::to_string(k) + "\");\n";
          ++lines;
          break;
        default:
          out += "var item" + std::to_string(fn) + " = { size: " +
                 std::to_string(k) + ", label: \"row\" };\n";
          ++lines;
          break;
      }
    }
    return out;
  }

 private:
  SeededRng& rng_;
};

std::vector<std::string> split_lines(const std::string& s) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < s.size()) {
    auto nl = s.find('\n', start);
    if (nl == std::string::npos) nl = s.size();
    lines.push_back(s.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

Snippet with_marks(std::string text,
                   std::vector<std::pair<std::string, int>> values) {
  Snippet s;
  s.text = std::move(text);
  for (auto& [value, what] : values) {
    Mark m;
    m.what = what;
    m.offset = s.text.find(value);
    m.length = value.size();
    s.marks.push_back(m);
  }
  return s;
}

}  // namespace

bool ManifestApp::valid() const {
  return std::any_of(secrets.begin(), secrets.end(),
                     [](const PlantedSecret& s) { return s.valid; });
}

void CorpusSpec::validate() const {
  auto frac = [](double f, const char* name) {
    if (!(f >= 0.0 && f <= 1.0)) {
      throw std::invalid_argument(std::string(name) + " must be in [0,1]");
    }
  };
  frac(fraction_with_secret, "fraction_with_secret");
  frac(fraction_valid_of_planted, "fraction_valid_of_planted");
  frac(fraction_whitelisted, "fraction_whitelisted");
  frac(fraction_direct_invocations, "fraction_direct_invocations");
  frac(fraction_multi_secret, "fraction_multi_secret");
  frac(fraction_cloud, "fraction_cloud");
  if (app_count == 0) throw std::invalid_argument("app_count must be > 0");
  if (files_per_app.first == 0 || files_per_app.first > files_per_app.second) {
    throw std::invalid_argument("files_per_app must be a non-empty range > 0");
  }
  if (loc_per_file.first == 0 || loc_per_file.first > loc_per_file.second) {
    throw std::invalid_argument("loc_per_file must be a non-empty range > 0");
  }
  if (platform == Platform::kCustom) {
    throw std::invalid_argument("corpus platform must be wechat or baidu");
  }
}

json CorpusSpec::to_json() const {
  return json{{"platform", std::string(miniscope::to_string(platform))},
              {"app_count", app_count},
              {"fraction_with_secret", fraction_with_secret},
              {"fraction_valid_of_planted", fraction_valid_of_planted},
              {"fraction_whitelisted", fraction_whitelisted},
              {"fraction_direct_invocations", fraction_direct_invocations},
              {"fraction_multi_secret", fraction_multi_secret},
              {"fraction_cloud", fraction_cloud},
              {"files_per_app", {files_per_app.first, files_per_app.second}},
              {"loc_per_file", {loc_per_file.first, loc_per_file.second}},
              {"plant_decoys", plant_decoys},
              {"rng_seed", rng_seed}};
}

CorpusSpec CorpusSpec::from_json(const json& j) {
  CorpusSpec s;
  try {
    s.platform = platform_from_string(
        j.value("platform", std::string(miniscope::to_string(s.platform))));
    s.app_count = j.value("app_count", s.app_count);
    s.fraction_with_secret =
        j.value("fraction_with_secret", s.fraction_with_secret);
    s.fraction_valid_of_planted =
        j.value("fraction_valid_of_planted", s.fraction_valid_of_planted);
    s.fraction_whitelisted =
        j.value("fraction_whitelisted", s.fraction_whitelisted);
    s.fraction_direct_invocations =
        j.value("fraction_direct_invocations", s.fraction_direct_invocations);
    s.fraction_multi_secret =
        j.value("fraction_multi_secret", s.fraction_multi_secret);
    s.fraction_cloud = j.value("fraction_cloud", s.fraction_cloud);
    if (j.contains("files_per_app")) {
      s.files_per_app = {j["files_per_app"].at(0).get<std::size_t>(),
                         j["files_per_app"].at(1).get<std::size_t>()};
    }
    if (j.contains("loc_per_file")) {
      s.loc_per_file = {j["loc_per_file"].at(0).get<std::size_t>(),
                        j["loc_per_file"].at(1).get<std::size_t>()};
    }
    s.plant_decoys = j.value("plant_decoys", false);
    s.rng_seed = j.value("rng_seed", s.rng_seed);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("corpus spec: ") + e.what());
  }
  s.validate();
  return s;
}

namespace {

json planted_to_json(const PlantedValue& v) {
  return json{{"value", v.value},
              {"file", v.file},
              {"span", {v.span.start, v.span.end}}};
}

PlantedValue planted_from_json(const json& j) {
  PlantedValue v;
  v.value = j.at("value").get<std::string>();
  v.file = j.at("file").get<std::string>();
  v.span = {j.at("span").at(0).get<std::size_t>(),
            j.at("span").at(1).get<std::size_t>()};
  return v;
}

}  // namespace

ManifestTotals GroundTruthManifest::totals() const {
  ManifestTotals t;
  t.apps = apps.size();
  for (const auto& a : apps) {
    if (a.planted()) ++t.planted;
    if (a.valid()) ++t.valid;
    if (a.whitelisted) ++t.whitelisted;
    if (!a.direct_invocations.empty()) {
      ++t.direct_invocation_apps;
      t.direct_invocation_occurrences += a.direct_invocations.size();
    }
  }
  return t;
}

json GroundTruthManifest::to_json() const {
  json apps_json = json::array();
  for (const auto& a : apps) {
    json secrets = json::array();
    for (const auto& s : a.secrets) {
      json sj = planted_to_json(s.secret);
      sj["valid"] = s.valid;
      secrets.push_back(std::move(sj));
    }
    json invocations = json::array();
    for (const auto& d : a.direct_invocations) {
      invocations.push_back({{"api", d.api_name},
                             {"category", d.category},
                             {"file", d.file},
                             {"span", {d.span.start, d.span.end}}});
    }
    apps_json.push_back(
        {{"app_id", a.app_id},
         {"package", a.package},
         {"app_id_site",
          a.app_id_site.value.empty() ? json(nullptr)
                                      : planted_to_json(a.app_id_site)},
         {"secrets", std::move(secrets)},
         {"whitelisted", a.whitelisted},
         {"direct_invocations", std::move(invocations)},
         {"cloud_env_ids", a.cloud_env_ids},
         {"cloud_function_names", a.cloud_function_names}});
  }
  auto t = totals();
  return json{{"schema_version", 1},
              {"spec", spec.to_json()},
              {"totals",
               {{"apps", t.apps},
                {"planted", t.planted},
                {"valid", t.valid},
                {"whitelisted", t.whitelisted},
                {"direct_invocation_apps", t.direct_invocation_apps},
                {"direct_invocation_occurrences",
                 t.direct_invocation_occurrences}}},
              {"apps", std::move(apps_json)}};
}

GroundTruthManifest GroundTruthManifest::from_json(const json& j) {
  GroundTruthManifest m;
  m.spec = CorpusSpec::from_json(j.at("spec"));
  for (const auto& a : j.at("apps")) {
    ManifestApp app;
    app.app_id = a.at("app_id").get<std::string>();
    app.package = a.at("package").get<std::string>();
    if (!a.at("app_id_site").is_null()) {
      app.app_id_site = planted_from_json(a.at("app_id_site"));
    }
    for (const auto& s : a.at("secrets")) {
      app.secrets.push_back({planted_from_json(s), s.at("valid").get<bool>()});
    }
    app.whitelisted = a.at("whitelisted").get<bool>();
    for (const auto& d : a.at("direct_invocations")) {
      app.direct_invocations.push_back(
          {d.at("api").get<std::string>(), d.at("category").get<std::string>(),
           d.at("file").get<std::string>(),
           {d.at("span").at(0).get<std::size_t>(),
            d.at("span").at(1).get<std::size_t>()}});
    }
    app.cloud_env_ids = a.at("cloud_env_ids").get<std::vector<std::string>>();
    app.cloud_function_names =
        a.at("cloud_function_names").get<std::vector<std::string>>();
    m.apps.push_back(std::move(app));
  }
  return m;
}

GeneratedCorpus generate_corpus(const CorpusSpec& spec,
                                const ApiCatalog& catalog) {
  spec.validate();
  const bool wechat = spec.platform == Platform::kWechatLike;
  const std::string host_obj = wechat ? "wx" : "swan";
  const std::string ext_markup = wechat ? ".wxml" : ".swan";
  const std::string api_host =
      wechat ? "https://api.weixin.qq.com" : "https://openapi.baidu.com";
  SeededRng rng(spec.rng_seed);
  const std::size_t n = spec.app_count;

  // App IDs, unique.
  std::vector<std::string> ids;
  std::set<std::string> used;
  while (ids.size() < n) {
    std::string id =
        wechat ? "wx" + random_hex(rng, 16)
               : std::to_string(rng.between(1, 9)) +
                     random_from(rng, kAlnum, 10,
                                 static_cast<std::size_t>(rng.between(7, 9)));
    if (used.insert(id).second) ids.push_back(std::move(id));
  }

  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  const std::size_t planted_n = count_of(spec.fraction_with_secret, n);
  const std::size_t valid_n =
      count_of(spec.fraction_valid_of_planted, planted_n);
  auto shuffled = all;
  shuffle(shuffled, rng);
  std::vector<std::size_t> planted_list(shuffled.begin(),
                                        shuffled.begin() + planted_n);
  std::set<std::size_t> planted(planted_list.begin(), planted_list.end());
  std::set<std::size_t> valid(planted_list.begin(),
                              planted_list.begin() + valid_n);
  std::vector<std::size_t> wl_pool;
  for (auto i : all) {
    if (!valid.count(i)) wl_pool.push_back(i);
  }
  auto whitelisted = pick(wl_pool, count_of(spec.fraction_whitelisted, n), rng);
  auto direct = pick(all, count_of(spec.fraction_direct_invocations, n), rng);
  auto cloud = wechat ? pick(all, count_of(spec.fraction_cloud, n), rng)
                      : std::set<std::size_t>{};
  auto multi = pick(planted_list,
                    count_of(spec.fraction_multi_secret, planted_n), rng);
  const auto patterns = catalog.invocation_patterns();

  GeneratedCorpus out;
  out.manifest.spec = spec;
  AppWriter writer(rng);

  for (std::size_t i = 0; i < n; ++i) {
    ManifestApp app;
    app.app_id = ids[i];
    app.package = wechat ? ids[i] + ".mapk" : ids[i];
    app.whitelisted = whitelisted.count(i) > 0;

    // Files.
    const auto file_count = static_cast<std::size_t>(
        rng.between(static_cast<std::int64_t>(spec.files_per_app.first),
                    static_cast<std::int64_t>(spec.files_per_app.second)));
    std::vector<FileDraft> files;
    std::vector<std::size_t> js_files;
    for (std::size_t f = 0; f < file_count; ++f) {
      FileDraft d;
      const auto loc = static_cast<std::size_t>(
          rng.between(static_cast<std::int64_t>(spec.loc_per_file.first),
                      static_cast<std::int64_t>(spec.loc_per_file.second)));
      if (f == 0) {
        d.name = "app.js";
      } else if (f == 1) {
        d.name = "app.json";
      } else if (f % 3 == 0) {
        d.name = "pages/p" + std::to_string(f) + "/index" + ext_markup;
      } else {
        d.name = "pages/p" + std::to_string(f) + "/index.js";
      }
      if (ends_with(d.name, ".js")) {
        d.lines = split_lines(writer.filler_js(loc));
        js_files.push_back(f);
      } else if (ends_with(d.name, ".json")) {
        d.lines = {"{", "  \"pages\": [\"pages/index/index\"],",
                   "  \"window\": { \"title\": \"demo\" }", "}"};
      } else {
        for (std::size_t l = 0; l < loc; ++l) {
          d.lines.push_back("<view class=\"c" +
                            std::to_string(rng.between(1, 99)) +
                            "\">{{text}}</view>");
        }
      }
      files.push_back(std::move(d));
    }
    auto insert_into = [&](std::size_t f, Snippet s) {
      auto& d = files[f];
      const auto at = static_cast<std::size_t>(
          rng.between(0, static_cast<std::int64_t>(d.lines.size())));
      d.inserts.emplace_back(at, std::move(s));
    };
    auto random_js = [&] { return js_files[rng.below(js_files.size())]; };

    // Secrets.
    std::vector<std::string> secret_values;
    if (planted.count(i)) {
      auto make_secret = [&] {
        return wechat ? random_hex(rng, 32) : random_alnum(rng, 32);
      };
      secret_values.push_back(make_secret());
      if (multi.count(i)) {
        std::string extra;
        do {
          extra = make_secret();
        } while (extra == secret_values[0]);
        secret_values.push_back(extra);
      }
      const std::string& id = ids[i];
      const std::string& sec = secret_values[0];
      const std::string id_key = wechat ? "appid" : "client_id";
      const std::string sec_key = wechat ? "secret" : "client_secret";
      // 0 same file, 1 cross-file, 2 no app ID in code
      auto layout = rng.below(10);
      int mode = layout < 7 ? 0 : layout < 9 ? 1 : 2;
      if (mode == 1 && js_files.size() < 2) mode = 0;
      const std::size_t home = random_js();
      if (mode == 0) {
        switch (rng.below(3)) {
          case 0:
            insert_into(home, with_marks("const " + id_key + " = \"" + id +
                                             "\";\nconst " + sec_key +
                                             " = \"" + sec + "\";",
                                         {{id, 0}, {sec, 1}}));
            break;
          case 1:
            insert_into(home, with_marks("var config = {\"" + id_key +
                                             "\": \"" + id + "\", \"" +
                                             sec_key + "\": \"" + sec +
                                             "\", \"mode\": 1};",
                                         {{id, 0}, {sec, 1}}));
            break;
          default:
            insert_into(home,
                        with_marks(host_obj +
                                       ".request({ url: "
                                       "\"https://dev.example.invalid/login?" +
                                       id_key + "=" + id + "&" + sec_key +
                                       "=" + sec + "&code=\" + code });",
                                   {{id, 0}, {sec, 1}}));
            break;
        }
      } else {
        if (mode == 1) {
          insert_into(home, with_marks("const " + id_key + " = \"" + id +
                                           "\";",
                                       {{id, 0}}));
        }
        std::size_t other = home;
        while (mode == 1 && other == home) other = random_js();
        insert_into(other, with_marks("const " + sec_key + " = \"" + sec +
                                          "\";",
                                      {{sec, 1}}));
      }
      if (secret_values.size() > 1) {
        insert_into(random_js(),
                    with_marks("const backupKey = \"" + secret_values[1] +
                                   "\";",
                               {{secret_values[1], 2}}));
      }
    }

    // Direct invocations.
    if (direct.count(i)) {
      const auto k = rng.between(1, 3);
      for (std::int64_t c = 0; c < k; ++c) {
        const auto& p = patterns[rng.below(patterns.size())];
        Snippet s = with_marks(host_obj + ".request({ url: \"" + api_host +
                                   p.endpoint_path + "?v=1\", method: \"POST\" });",
                               {{p.endpoint_path, -1}});
        s.marks[0].invocation = app.direct_invocations.size();
        app.direct_invocations.push_back({p.name, p.category, "", {}});
        insert_into(random_js(), std::move(s));
      }
    }

    // Cloud extractables.
    if (cloud.count(i)) {
      std::string env = "cloud1-" + random_from(rng, kLowerAlnum, 36, 6);
      std::string fn = "fn" + random_from(rng, kLowerAlnum, 36, 4);
      insert_into(random_js(),
                  with_marks(host_obj + ".cloud.init({ env: \"" + env + "\" });",
                             {}));
      insert_into(random_js(),
                  with_marks(host_obj + ".cloud.callFunction({ name: \"" + fn +
                                 "\", data: {} });",
                             {}));
      app.cloud_env_ids.push_back(env);
      app.cloud_function_names.push_back(fn);
    }

    if (spec.plant_decoys) {
      std::string a = wechat ? random_hex(rng, 31) : random_alnum(rng, 31);
      std::string b = wechat ? random_hex(rng, 33) : random_alnum(rng, 33);
      insert_into(random_js(), with_marks("const cacheKey = \"" + a +
                                              "\"; const etag = \"" + b +
                                              "\";",
                                          {}));
    }

    // Assemble and resolve spans.
    std::vector<PlantedSecret> planted_secrets(secret_values.size());
    for (std::size_t s = 0; s < secret_values.size(); ++s) {
      planted_secrets[s].secret.value = secret_values[s];
      planted_secrets[s].valid = s == 0 && valid.count(i) > 0;
    }
    FileTree tree;
    for (auto& d : files) {
      std::stable_sort(d.inserts.begin(), d.inserts.end(),
                       [](const auto& a, const auto& b) {
                         return a.first < b.first;
                       });
      std::string content;
      std::size_t next = 0;
      auto emit_snippet = [&](const Snippet& s) {
        const std::size_t base = content.size();
        content += s.text;
        content += '\n';
        for (const auto& m : s.marks) {
          ByteSpan span{base + m.offset, base + m.offset + m.length};
          if (m.what == 0) {
            app.app_id_site = {app.app_id, d.name, span};
          } else if (m.what > 0) {
            auto& ps = planted_secrets[static_cast<std::size_t>(m.what - 1)];
            ps.secret.file = d.name;
            ps.secret.span = span;
          } else if (m.what == -1) {
            auto& inv = app.direct_invocations[m.invocation];
            inv.file = d.name;
            inv.span = span;
          }
        }
      };
      for (std::size_t l = 0; l <= d.lines.size(); ++l) {
        while (next < d.inserts.size() && d.inserts[next].first == l) {
          emit_snippet(d.inserts[next].second);
          ++next;
        }
        if (l < d.lines.size()) {
          content += d.lines[l];
          content += '\n';
        }
      }
      tree[d.name] = std::move(content);
    }
    app.secrets = std::move(planted_secrets);

    // Mock credential store.
    MockApp mock;
    mock.secret = app.valid() ? secret_values[0]
                              : (wechat ? random_hex(rng, 32)
                                        : random_alnum(rng, 32));
    if (app.whitelisted) mock.whitelist = {"203.0.113.9"};
    if (app.valid()) {
      auto openid = [&] { return "o" + random_alnum(rng, 27); };
      auto add_fixture = [&](const std::string& api, json body) {
        if (catalog.find(api) != nullptr) mock.fixtures[api] = std::move(body);
      };
      json feedback = json::array();
      for (auto k = rng.between(0, 3); k > 0; --k) {
        feedback.push_back({{"openid", openid()}, {"content", "hello"}});
      }
      add_fixture("getFeedback", {{"list", feedback}});
      json printers = json::array();
      for (auto k = rng.between(0, 2); k > 0; --k) printers.push_back(openid());
      add_fixture("getPrinter", {{"openid", printers}});
      json pois = json::array();
      for (auto k = rng.between(0, 2); k > 0; --k) {
        pois.push_back({{"poi_id", "poi" + random_hex(rng, 8)}});
      }
      add_fixture("getNearbyPoiList", {{"data", {{"poi_list", pois}}}});
      add_fixture("createActivityId",
                  {{"activity_id", "act" + random_hex(rng, 12)}});
      add_fixture("databaseCollectionGet",
                  {{"collections", json::array({{{"name", "orders"}}})}});
      add_fixture("getTemplateList",
                  {{"data",
                    {{"list", json::array({{{"template_id",
                                             "tpl" + random_hex(rng, 8)}}})}}}});
      if (catalog.find("getNearbyPoiList") != nullptr) {
        mock.features["nearby"] = rng.chance(0.5);
      }
    }
    out.scenario.apps.emplace(app.app_id, std::move(mock));
    out.packages.emplace_back(app.package, std::move(tree));
    out.manifest.apps.push_back(std::move(app));
  }
  out.scenario.validate();
  return out;
}

GeneratedCorpus generate_corpus(const CorpusSpec& spec,
                                const ApiCatalog& catalog,
                                const std::string& out_dir) {
  GeneratedCorpus corpus = generate_corpus(spec, catalog);
  const fs::path root(out_dir);
  const fs::path pkg_dir = root / "packages";
  std::error_code ec;
  fs::create_directories(pkg_dir, ec);
  if (ec) throw std::runtime_error("cannot create " + pkg_dir.string());
  for (const auto& [name, tree] : corpus.packages) {
    if (spec.platform == Platform::kWechatLike) {
      write_file(pkg_dir / name, pack(tree));
    } else {
      for (const auto& [file, content] : tree) {
        write_file(pkg_dir / name / file, content);
      }
    }
  }
  write_file(root / "manifest.json", corpus.manifest.to_json().dump(2) + "\n");
  write_file(root / "scenario.json", corpus.scenario.to_json().dump(2) + "\n");
  return corpus;
}

}  // namespace miniscope
