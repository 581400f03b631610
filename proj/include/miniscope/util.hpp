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
#include <string>
#include <string_view>

namespace miniscope {

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

bool is_valid_utf8(std::string_view bytes);

/// Replaces every ill-formed UTF-8 sequence with U+FFFD. Valid input is
/// returned unchanged, so byte offsets into it stay meaningful.
std::string sanitize_utf8(std::string_view bytes);

std::string to_lower_ascii(std::string_view s);

bool ends_with(std::string_view s, std::string_view suffix);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view data);

/// Deterministic, platform-independent PRNG helpers (std distributions are
/// implementation-defined, which would break byte-identical corpora).
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next();
  /// Uniform in [0, bound).
  std::uint64_t below(std::uint64_t bound);
  /// Uniform in [lo, hi].
  std::int64_t between(std::int64_t lo, std::int64_t hi);
  double unit();
  bool chance(double p) { return unit() < p; }

 private:
  std::uint64_t state_;
};

}  // namespace miniscope
