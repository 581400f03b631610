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

#include <algorithm>
#include <limits>
#include <nlohmann/json.hpp>
#include <set>
#include <system_error>

#include "miniscope/util.hpp"

namespace miniscope {

namespace fs = std::filesystem;

std::string_view to_string(ContainerErrc code) {
  switch (code) {
    case ContainerErrc::kBadMagic:
      return "BadMagic";
    case ContainerErrc::kTruncatedIndex:
      return "TruncatedIndex";
    case ContainerErrc::kEntryOutOfBounds:
      return "EntryOutOfBounds";
    case ContainerErrc::kDuplicateName:
      return "DuplicateName";
    case ContainerErrc::kInvalidPath:
      return "InvalidPath";
    case ContainerErrc::kInconsistentBody:
      return "InconsistentBody";
    case ContainerErrc::kNotADirectory:
      return "NotADirectory";
    case ContainerErrc::kUnreadableFile:
      return "UnreadableFile";
  }
  return "Unknown";
}

bool is_valid_entry_name(std::string_view name) {
  if (name.empty() || name.front() == '/') return false;
  if (!is_valid_utf8(name)) return false;
  if (name.find('\\') != std::string_view::npos) return false;
  if (name.find('\0') != std::string_view::npos) return false;
  std::size_t start = 0;
  while (start <= name.size()) {
    std::size_t slash = name.find('/', start);
    if (slash == std::string_view::npos) slash = name.size();
    const std::string_view segment = name.substr(start, slash - start);
    if (segment.empty() || segment == "." || segment == "..") return false;
    start = slash + 1;
  }
  return true;
}

namespace {

[[noreturn]] void fail(ContainerErrc code, const std::string& what) {
  throw ContainerError(code, what);
}

class Reader {
 public:
  Reader(std::string_view bytes, std::size_t pos, std::size_t limit)
      : bytes_(bytes), pos_(pos), limit_(limit) {}

  bool can_read(std::uint64_t n) const { return pos_ + n <= limit_; }

  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v = (v << 8) | static_cast<unsigned char>(bytes_[pos_ + i]);
    }
    pos_ += 4;
    return v;
  }

  std::string_view take(std::size_t n) {
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  std::size_t pos() const { return pos_; }

 private:
  std::string_view bytes_;
  std::size_t pos_;
  std::size_t limit_;
};

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>(v & 0xFF));
}

}  // namespace

MiniAppPackage unpack(std::string_view bytes) {
  if (bytes.empty() ||
      static_cast<std::uint8_t>(bytes[0]) != kMapkFirstMark) {
    fail(ContainerErrc::kBadMagic, "missing 0xBE first mark");
  }
  if (bytes.size() < kMapkHeaderSize) {
    fail(ContainerErrc::kTruncatedIndex, "header shorter than 14 bytes");
  }
  if (static_cast<std::uint8_t>(bytes[13]) != kMapkLastMark) {
    fail(ContainerErrc::kBadMagic, "missing 0xED separator");
  }
  Reader header(bytes, 1, kMapkHeaderSize);
  const std::uint32_t reserved = header.u32();
  const std::uint32_t index_len = header.u32();
  const std::uint32_t body_len = header.u32();
  if (reserved != 0) fail(ContainerErrc::kBadMagic, "reserved field not 0");

  const std::uint64_t index_end = kMapkHeaderSize + std::uint64_t{index_len};
  if (index_len < 4 || index_end > bytes.size()) {
    fail(ContainerErrc::kTruncatedIndex,
         "index_len " + std::to_string(index_len) + " exceeds input");
  }

  Reader index(bytes, kMapkHeaderSize, static_cast<std::size_t>(index_end));
  const std::uint32_t file_count = index.u32();
  // Each record is at least 12 bytes.
  if (std::uint64_t{file_count} * 12 > index_len - 4) {
    fail(ContainerErrc::kTruncatedIndex, "file_count exceeds index");
  }

  MiniAppPackage pkg;
  pkg.source = PackageSource::kContainerFile;
  pkg.entries.reserve(file_count);
  std::set<std::string_view> names;
  for (std::uint32_t i = 0; i < file_count; ++i) {
    if (!index.can_read(4)) fail(ContainerErrc::kTruncatedIndex, "record");
    const std::uint32_t name_len = index.u32();
    if (!index.can_read(std::uint64_t{name_len} + 8)) {
      fail(ContainerErrc::kTruncatedIndex, "record name overruns index");
    }
    const std::string_view name = index.take(name_len);
    PackageEntry entry;
    entry.offset = index.u32();
    entry.size = index.u32();
    if (!is_valid_entry_name(name)) {
      fail(ContainerErrc::kInvalidPath, "invalid entry name");
    }
    if (!names.insert(name).second) {
      fail(ContainerErrc::kDuplicateName,
           "duplicate entry '" + std::string(name) + "'");
    }
    entry.name = std::string(name);
    pkg.entries.push_back(std::move(entry));
  }
  if (index.pos() != index_end) {
    fail(ContainerErrc::kTruncatedIndex, "index_len disagrees with records");
  }

  const std::uint64_t body_end = index_end + body_len;
  if (body_end > bytes.size()) {
    fail(ContainerErrc::kEntryOutOfBounds, "body_len exceeds input");
  }
  if (body_end < bytes.size()) {
    fail(ContainerErrc::kInconsistentBody, "trailing bytes after body");
  }

  std::uint64_t total = 0;
  for (const auto& e : pkg.entries) {
    if (e.offset < index_end ||
        std::uint64_t{e.offset} + e.size > body_end) {
      fail(ContainerErrc::kEntryOutOfBounds,
           "entry '" + e.name + "' escapes the body");
    }
    total += e.size;
  }
  if (total != body_len) {
    fail(ContainerErrc::kInconsistentBody, "entry sizes do not sum to body_len");
  }
  std::vector<std::pair<std::uint64_t, std::uint64_t>> ranges;
  ranges.reserve(pkg.entries.size());
  for (const auto& e : pkg.entries) ranges.emplace_back(e.offset, e.size);
  std::sort(ranges.begin(), ranges.end());
  for (std::size_t i = 1; i < ranges.size(); ++i) {
    if (ranges[i - 1].first + ranges[i - 1].second > ranges[i].first) {
      fail(ContainerErrc::kInconsistentBody, "overlapping entries");
    }
  }

  for (auto& e : pkg.entries) {
    e.content = std::string(bytes.substr(e.offset, e.size));
  }
  pkg.app_hint = discover_app_hint(pkg.entries);
  return pkg;
}

std::string pack(const FileTree& tree) {
  std::uint64_t index_len = 4;
  std::uint64_t body_len = 0;
  for (const auto& [name, content] : tree) {
    if (!is_valid_entry_name(name)) {
      fail(ContainerErrc::kInvalidPath, "invalid entry name '" + name + "'");
    }
    index_len += 12 + name.size();
    body_len += content.size();
  }
  constexpr std::uint64_t kMax = std::numeric_limits<std::uint32_t>::max();
  if (kMapkHeaderSize + index_len + body_len > kMax) {
    fail(ContainerErrc::kEntryOutOfBounds, "tree too large for MAPK v1");
  }

  std::string out;
  out.reserve(kMapkHeaderSize + index_len + body_len);
  out.push_back(static_cast<char>(kMapkFirstMark));
  put_u32(out, 0);
  put_u32(out, static_cast<std::uint32_t>(index_len));
  put_u32(out, static_cast<std::uint32_t>(body_len));
  out.push_back(static_cast<char>(kMapkLastMark));
  put_u32(out, static_cast<std::uint32_t>(tree.size()));

  std::uint64_t offset = kMapkHeaderSize + index_len;
  for (const auto& [name, content] : tree) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(offset));
    put_u32(out, static_cast<std::uint32_t>(content.size()));
    offset += content.size();
  }
  for (const auto& [name, content] : tree) out += content;
  return out;
}

namespace {

bool is_within(const fs::path& root, const fs::path& candidate) {
  auto r = root.begin();
  auto c = candidate.begin();
  for (; r != root.end(); ++r, ++c) {
    if (c == candidate.end() || *r != *c) return false;
  }
  return true;
}

}  // namespace

DirectoryLoadResult load_directory(const fs::path& root,
                                   UnreadablePolicy policy) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    fail(ContainerErrc::kNotADirectory, root.string() + " is not a directory");
  }
  const fs::path canonical_root = fs::canonical(root);

  DirectoryLoadResult result;
  result.package.source = PackageSource::kDirectoryTree;
  auto problem = [&](const std::string& msg) {
    if (policy == UnreadablePolicy::kFail) {
      fail(ContainerErrc::kUnreadableFile, msg);
    }
    result.warnings.push_back(msg);
  };

  fs::recursive_directory_iterator it(
      root, fs::directory_options::skip_permission_denied, ec);
  if (ec) fail(ContainerErrc::kNotADirectory, ec.message());
  for (; it != fs::recursive_directory_iterator(); it.increment(ec)) {
    if (ec) {
      problem("directory walk: " + ec.message());
      ec.clear();
      continue;
    }
    const fs::directory_entry& de = *it;
    fs::path file = de.path();
    if (de.is_symlink(ec)) {
      const fs::path target = fs::weakly_canonical(de.path(), ec);
      if (ec || !is_within(canonical_root, target)) {
        ec.clear();
        continue;
      }
      if (!fs::is_regular_file(target, ec)) continue;
      file = target;
    } else if (!de.is_regular_file(ec)) {
      continue;
    }

    const std::string rel =
        de.path().lexically_relative(root).generic_string();
    if (!is_valid_entry_name(rel)) {
      problem("invalid entry name: " + rel);
      continue;
    }
    PackageEntry entry;
    entry.name = rel;
    try {
      entry.content = read_file(file);
    } catch (const std::exception& e) {
      problem(e.what());
      continue;
    }
    entry.size = static_cast<std::uint32_t>(entry.content.size());
    result.package.entries.push_back(std::move(entry));
  }
  std::sort(result.package.entries.begin(), result.package.entries.end(),
            [](const PackageEntry& a, const PackageEntry& b) {
              return a.name < b.name;
            });
  result.package.app_hint = discover_app_hint(result.package.entries);
  return result;
}

std::optional<std::string> discover_app_hint(
    const std::vector<PackageEntry>& entries) {
  static const char* const kMetadataFiles[] = {
      "project.config.json", "app-config.json", "project.swan.json"};
  for (const char* meta : kMetadataFiles) {
    for (const auto& e : entries) {
      if (e.name != meta) continue;
      const auto doc = nlohmann::json::parse(e.content, nullptr, false);
      if (!doc.is_object()) continue;
      for (const char* key : {"appid", "appId", "app_id"}) {
        auto it = doc.find(key);
        if (it != doc.end() && it->is_string() &&
            !it->get<std::string>().empty()) {
          return it->get<std::string>();
        }
      }
    }
  }
  return std::nullopt;
}

}  // namespace miniscope
