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

#include "miniscope/catalog.hpp"

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace miniscope {
namespace {

using testing::api_entry;
using testing::catalog_doc;
using testing::from_get;
using testing::make_catalog;
using testing::param;

CatalogErrc load_error(const nlohmann::json& doc) {
  try {
    load_catalog(doc.dump());
  } catch (const CatalogError& e) {
    return e.code();
  }
  ADD_FAILURE() << "catalog accepted";
  return CatalogErrc::kSchemaError;
}

TEST(ShippedCatalog, WechatCounts) {
  const auto c = testing::wechat_catalog();
  EXPECT_EQ(c.apis().size(), 26u);
  EXPECT_EQ(c.count(ApiKind::kGet), 9u);
  EXPECT_EQ(c.count(ApiKind::kModify), 17u);
  EXPECT_EQ(c.token_endpoint().name, "getAccessToken");
  EXPECT_EQ(c.platform(), Platform::kWechatLike);
}

TEST(ShippedCatalog, BaiduCounts) {
  const auto c = testing::baidu_catalog();
  EXPECT_EQ(c.apis().size(), 10u);
  EXPECT_EQ(c.count(ApiKind::kGet), 1u);
  EXPECT_EQ(c.platform(), Platform::kBaiduLike);
}

TEST(ShippedCatalog, ModifyNeverProbeAllowed) {
  for (const auto& c : {testing::wechat_catalog(), testing::baidu_catalog()}) {
    for (const auto& api : c.apis()) {
      if (api.kind == ApiKind::kModify) EXPECT_FALSE(api.probe_allowed);
      EXPECT_FALSE(api.impact_flags.empty()) << api.name;
      EXPECT_NE(api.severity, Severity::kNone) << api.name;
    }
  }
}

TEST(ShippedCatalog, RoundTrip) {
  for (const auto& c : {testing::wechat_catalog(), testing::baidu_catalog()}) {
    EXPECT_EQ(load_catalog(catalog_to_json(c).dump()), c);
  }
}

TEST(ShippedCatalog, FindByPath) {
  const auto c = testing::wechat_catalog();
  ASSERT_NE(c.find_by_path("/cgi-bin/token"), nullptr);
  EXPECT_EQ(c.find_by_path("/cgi-bin/token")->name, "getAccessToken");
  ASSERT_NE(c.find_by_path("/wxaapi/feedback/list"), nullptr);
  EXPECT_EQ(c.find_by_path("/wxaapi/feedback/list")->name, "getFeedback");
  EXPECT_EQ(c.find_by_path("/nope"), nullptr);
}

TEST(DependencyClosure, ShippedExamples) {
  const auto c = testing::wechat_catalog();
  EXPECT_EQ(dependency_closure(c, "customerServiceMessage.send"),
            (std::vector<std::string>{"getFeedback", "getPrinter"}));
  EXPECT_TRUE(dependency_closure(c, "clearQuotaByAppSecret").empty());
  EXPECT_TRUE(dependency_closure(c, "createActivityId").empty());
  EXPECT_EQ(dependency_closure(c, "setUpdatableMsg"),
            std::vector<std::string>{"createActivityId"});
  try {
    dependency_closure(c, "noSuchApi");
    ADD_FAILURE();
  } catch (const CatalogError& e) {
    EXPECT_EQ(e.code(), CatalogErrc::kUnknownApi);
  }
}

TEST(DependencyClosure, TransitiveIsTopological) {
  const auto c = make_catalog(
      {api_entry("m", "Modify",
                 {param("access_token", "ACCESS_TOKEN"), from_get("x", "g2", "x")}),
       api_entry("g2", "Get",
                 {param("access_token", "ACCESS_TOKEN"), from_get("y", "g1", "y")}),
       api_entry("g1", "Get", {param("access_token", "ACCESS_TOKEN")})});
  EXPECT_EQ(dependency_closure(c, "m"), (std::vector<std::string>{"g1", "g2"}));
  EXPECT_EQ(feeding_get_apis(c), (std::vector<std::string>{"g1", "g2"}));
}

TEST(LoadCatalog, CyclicDependency) {
  auto doc = catalog_doc(
      {api_entry("a", "Get", {from_get("x", "b", "x")}),
       api_entry("b", "Get", {from_get("y", "a", "y")})});
  EXPECT_EQ(load_error(doc), CatalogErrc::kCyclicDependency);
}

TEST(LoadCatalog, UnknownReference) {
  auto doc = catalog_doc({api_entry("a", "Modify", {from_get("x", "zz", "x")})});
  EXPECT_EQ(load_error(doc), CatalogErrc::kUnknownReference);
}

TEST(LoadCatalog, ReferenceToModifyRejected) {
  auto doc = catalog_doc({api_entry("a", "Modify", {}),
                          api_entry("b", "Modify", {from_get("x", "a", "x")})});
  EXPECT_EQ(load_error(doc), CatalogErrc::kSchemaError);
}

TEST(LoadCatalog, ModifyProbeAllowed) {
  auto entry = api_entry("a", "Modify", {});
  entry["probe_allowed"] = true;
  EXPECT_EQ(load_error(catalog_doc({entry})), CatalogErrc::kModifyProbeAllowed);
}

TEST(LoadCatalog, SchemaErrors) {
  EXPECT_THROW(load_catalog("not json"), CatalogError);
  auto doc = catalog_doc({api_entry("a", "Get", {})});
  doc["apis"][0].erase("severity");
  EXPECT_EQ(load_error(doc), CatalogErrc::kSchemaError);
  doc = catalog_doc({api_entry("a", "Sideways", {})});
  EXPECT_EQ(load_error(doc), CatalogErrc::kSchemaError);
  doc = catalog_doc({api_entry("a", "Get", {param("p", "CODE_EXTRACTED")})});
  EXPECT_EQ(load_error(doc), CatalogErrc::kSchemaError);
}

TEST(ImpactFlags, Letters) {
  EXPECT_EQ(ImpactFlags::from_letters("ECA").letters(), "ACE");
  EXPECT_TRUE(ImpactFlags::from_letters("B").has(ImpactFlags::kSendMessages));
  EXPECT_TRUE(ImpactFlags().empty());
}

}  // namespace
}  // namespace miniscope
