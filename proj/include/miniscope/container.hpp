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
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace miniscope {

// MAPK v1 layout (integers are big-endian u32):
//
//   0xBE | reserved=0 | index_len | body_len | 0xED      14-byte header
//   file_count | file_count x {name_len | name | offset | size}   index
//   body bytes
//
// index_len covers file_count through the last record; offsets are absolute
// from byte 0 and every entry lies inside the body region.
inline constexpr std::uint8_t kMapkFirstMark = 0xBE;
inline constexpr std::uint8_t kMapkLastMark = 0xED;
inline constexpr std::size_t kMapkHeaderSize = 14;

enum class ContainerErrc {
  kBadMagic,
  kTruncatedIndex,
  kEntryOutOfBounds,
  kDuplicateName,
  kInvalidPath,
  // Body length disagrees with the file or entries do not tile the body.
  kInconsistentBody,
  kNotADirectory,
  kUnreadableFile,
};

std::string_view to_string(ContainerErrc code);

class ContainerError : public std::runtime_error {
 public:
  ContainerError(ContainerErrc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ContainerErrc code() const noexcept { return code_; }

 private:
  ContainerErrc code_;
};

struct PackageEntry {
  std::string name;
  std::uint32_t offset = 0;
  std::uint32_t size = 0;
  std::string content;

  bool operator==(const PackageEntry&) const = default;
};

enum class PackageSource { kContainerFile, kDirectoryTree };

struct MiniAppPackage {
  std::optional<std::string> app_hint;
  std::vector<PackageEntry> entries;
  PackageSource source = PackageSource::kContainerFile;
};

using FileTree = std::map<std::string, std::string>;

/// Name rules: non-empty valid UTF-8, '/' separators, no leading '/', no
/// empty, "." or ".." segments, no backslash or NUL.
bool is_valid_entry_name(std::string_view name);

MiniAppPackage unpack(std::string_view bytes);
std::string pack(const FileTree& tree);

enum class UnreadablePolicy { kSkipWithWarning, kFail };

struct DirectoryLoadResult {
  MiniAppPackage package;
  std::vector<std::string> warnings;
};

DirectoryLoadResult load_directory(
    const std::filesystem::path& root,
    UnreadablePolicy policy = UnreadablePolicy::kSkipWithWarning);

/// Looks for an "appid"/"appId" string in well-known metadata entries
/// (project.config.json, app-config.json, project.swan.json).
std::optional<std::string> discover_app_hint(
    const std::vector<PackageEntry>& entries);

}  // namespace miniscope
