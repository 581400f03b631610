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

#include "miniscope/container.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "miniscope/util.hpp"

namespace miniscope {
namespace {

namespace fs = std::filesystem;

std::string be32(std::uint32_t v) {
  std::string s(4, '\0');
  s[0] = static_cast<char>(v >> 24);
  s[1] = static_cast<char>(v >> 16);
  s[2] = static_cast<char>(v >> 8);
  s[3] = static_cast<char>(v);
  return s;
}

// Header written out by hand from the documented layout.
std::string header(std::uint32_t index_len, std::uint32_t body_len) {
  return std::string(1, '\xBE') + be32(0) + be32(index_len) + be32(body_len) +
         std::string(1, '\xED');
}

ContainerErrc decode_error(const std::string& bytes) {
  try {
    unpack(bytes);
  } catch (const ContainerError& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected a ContainerError";
  return ContainerErrc::kBadMagic;
}

TEST(Pack, EmptyTreeMatchesHandLayout) {
  const std::string bytes = pack({});
  EXPECT_EQ(bytes, header(4, 0) + be32(0));
  EXPECT_EQ(bytes.size(), 18u);
  EXPECT_TRUE(unpack(bytes).entries.empty());
}

TEST(Pack, SingleFileRoundTrip) {
  const std::string bytes = pack({{"app.js", "x"}});
  // index: count + (4 + 6 + 4 + 4)
  EXPECT_EQ(bytes, header(22, 1) + be32(1) + be32(6) + "app.js" + be32(36) +
                       be32(1) + "x");
  auto pkg = unpack(bytes);
  ASSERT_EQ(pkg.entries.size(), 1u);
  EXPECT_EQ(pkg.entries[0].name, "app.js");
  EXPECT_EQ(pkg.entries[0].content, "x");
  EXPECT_EQ(pkg.entries[0].size, 1u);
  EXPECT_EQ(pkg.source, PackageSource::kContainerFile);
}

TEST(Pack, ZeroLengthEntriesShareOffset) {
  auto pkg = unpack(pack({{"a", ""}, {"b", ""}}));
  ASSERT_EQ(pkg.entries.size(), 2u);
  EXPECT_EQ(pkg.entries[0].size, 0u);
  EXPECT_EQ(pkg.entries[1].size, 0u);
  EXPECT_EQ(pkg.entries[0].offset, pkg.entries[1].offset);
}

TEST(Pack, StoredIndexLenMatchesRecords) {
  FileTree tree{{"app.js", "abc"}, {"pages/index/index.js", "hello"}};
  const std::string bytes = pack(tree);
  std::uint32_t stored = (static_cast<std::uint8_t>(bytes[5]) << 24) |
                         (static_cast<std::uint8_t>(bytes[6]) << 16) |
                         (static_cast<std::uint8_t>(bytes[7]) << 8) |
                         static_cast<std::uint8_t>(bytes[8]);
  std::uint32_t expected = 4;
  for (const auto& [name, content] : tree) expected += 12 + name.size();
  EXPECT_EQ(stored, expected);
}

TEST(Pack, RejectsBadPaths) {
  for (const char* bad : {"", "/abs", "a/../b", "..", "a//b", "a\\b"}) {
    try {
      pack({{bad, "x"}});
      ADD_FAILURE() << "accepted '" << bad << "'";
    } catch (const ContainerError& e) {
      EXPECT_EQ(e.code(), ContainerErrc::kInvalidPath) << bad;
    }
  }
}

TEST(Unpack, EntrySizeBeyondBody) {
  // One entry declaring 10 bytes over a 4-byte body.
  const std::string bytes =
      header(17, 4) + be32(1) + be32(1) + "a" + be32(35) + be32(10) + "abcd";
  EXPECT_EQ(decode_error(bytes), ContainerErrc::kEntryOutOfBounds);
}

TEST(Unpack, TypedErrors) {
  EXPECT_EQ(decode_error(""), ContainerErrc::kBadMagic);
  EXPECT_EQ(decode_error("\x01"), ContainerErrc::kBadMagic);
  std::string good = pack({{"a.js", "1"}, {"b.js", "22"}});

  std::string bad_sep = good;
  bad_sep[13] = '\x00';
  EXPECT_EQ(decode_error(bad_sep), ContainerErrc::kBadMagic);

  EXPECT_EQ(decode_error(good.substr(0, 10)), ContainerErrc::kTruncatedIndex);
  EXPECT_EQ(decode_error(good.substr(0, 20)), ContainerErrc::kTruncatedIndex);
  EXPECT_EQ(decode_error(good.substr(0, good.size() - 1)),
            ContainerErrc::kEntryOutOfBounds);
  EXPECT_EQ(decode_error(good + "z"), ContainerErrc::kInconsistentBody);

  const std::string dup = header(4 + 2 * 13, 2) + be32(2) + be32(1) + "a" +
                          be32(48) + be32(1) + be32(1) + "a" + be32(49) +
                          be32(1) + "xy";
  EXPECT_EQ(decode_error(dup), ContainerErrc::kDuplicateName);

  const std::string dotdot = header(4 + 14, 1) + be32(1) + be32(2) + ".." +
                             be32(32) + be32(1) + "x";
  EXPECT_EQ(decode_error(dotdot), ContainerErrc::kInvalidPath);

  const std::string bad_utf8 = header(4 + 13, 1) + be32(1) + be32(1) +
                               "\xff" + be32(31) + be32(1) + "x";
  EXPECT_EQ(decode_error(bad_utf8), ContainerErrc::kInvalidPath);
}

TEST(Unpack, DiscoversAppHintFromMetadata) {
  auto pkg = unpack(pack({{"project.config.json",
                           R"({"appid": "wx0123456789abcdef"})"},
                          {"app.js", ""}}));
  ASSERT_TRUE(pkg.app_hint.has_value());
  EXPECT_EQ(*pkg.app_hint, "wx0123456789abcdef");
}

TEST(Unpack, RandomTreesRoundTrip) {
  SeededRng rng(7);
  for (int round = 0; round < 200; ++round) {
    FileTree tree;
    const auto n = rng.between(0, 8);
    for (int i = 0; i < n; ++i) {
      std::string name = "d" + std::to_string(rng.below(3)) + "/f" +
                         std::to_string(rng.below(50)) + ".js";
      std::string content(static_cast<std::size_t>(rng.between(0, 64)), '\0');
      for (auto& c : content) c = static_cast<char>(rng.below(256));
      tree[name] = content;
    }
    auto pkg = unpack(pack(tree));
    ASSERT_EQ(pkg.entries.size(), tree.size());
    std::size_t i = 0;
    for (const auto& [name, content] : tree) {
      EXPECT_EQ(pkg.entries[i].name, name);
      EXPECT_EQ(pkg.entries[i].content, content);
      ++i;
    }
  }
}

class DirectoryTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            ("miniscope_dir_" + std::to_string(::getpid()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }
  fs::path root_;
};

TEST_F(DirectoryTest, EmptyDirectory) {
  auto r = load_directory(root_);
  EXPECT_TRUE(r.package.entries.empty());
  EXPECT_EQ(r.package.source, PackageSource::kDirectoryTree);
}

TEST_F(DirectoryTest, LexicographicOrder) {
  write_file(root_ / "pages" / "x.js", "2");
  write_file(root_ / "app.js", "1");
  auto r = load_directory(root_);
  ASSERT_EQ(r.package.entries.size(), 2u);
  EXPECT_EQ(r.package.entries[0].name, "app.js");
  EXPECT_EQ(r.package.entries[1].name, "pages/x.js");
  EXPECT_EQ(r.package.entries[1].content, "2");
}

TEST_F(DirectoryTest, EscapingSymlinkExcluded) {
  const fs::path outside = root_.string() + "_outside";
  fs::create_directories(outside);
  write_file(outside / "secret.js", "nope");
  write_file(root_ / "app.js", "1");
  fs::create_symlink(outside / "secret.js", root_ / "leak.js");
  fs::create_directory_symlink(outside, root_ / "leakdir");
  auto r = load_directory(root_);
  ASSERT_EQ(r.package.entries.size(), 1u);
  EXPECT_EQ(r.package.entries[0].name, "app.js");
  fs::remove_all(outside);
}

TEST_F(DirectoryTest, NotADirectory) {
  write_file(root_ / "file", "x");
  try {
    load_directory(root_ / "file");
    ADD_FAILURE();
  } catch (const ContainerError& e) {
    EXPECT_EQ(e.code(), ContainerErrc::kNotADirectory);
  }
}

TEST_F(DirectoryTest, UnreadableFilePolicy) {
  if (::geteuid() == 0) GTEST_SKIP() << "root can read everything";
  write_file(root_ / "a.js", "1");
  write_file(root_ / "b.js", "2");
  fs::permissions(root_ / "b.js", fs::perms::none);
  auto r = load_directory(root_, UnreadablePolicy::kSkipWithWarning);
  EXPECT_EQ(r.package.entries.size(), 1u);
  EXPECT_EQ(r.warnings.size(), 1u);
  EXPECT_THROW(load_directory(root_, UnreadablePolicy::kFail), ContainerError);
}

}  // namespace
}  // namespace miniscope
