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

#include <string_view>

// Error-code taxonomy shared by the prober and the mock server. Only 50002
// is an observed platform code; the rest are this project's convention.
namespace miniscope::errc {

inline constexpr int kOk = 0;
inline constexpr int kInvalidCredential = 40001;
inline constexpr int kInvalidGrantType = 40002;
inline constexpr int kInvalidAccessToken = 40014;
inline constexpr int kInvalidUrl = 40066;
inline constexpr int kIpNotWhitelisted = 40164;
inline constexpr int kAccessTokenMissing = 41001;
inline constexpr int kTokenExpired = 42001;
inline constexpr int kQuotaExceeded = 45009;
inline constexpr int kFeatureBlocked = 48001;
inline constexpr int kModifyRefused = 48099;
inline constexpr int kUserLimited = 50002;

// Observation-side markers; never sent by a server.
inline constexpr int kTransportFailure = -1;
inline constexpr int kNotAttempted = -2;

constexpr std::string_view message(int code) {
  switch (code) {
    case kOk:
      return "ok";
    case kInvalidCredential:
      return "invalid credential, appid or secret is invalid";
    case kInvalidGrantType:
      return "invalid grant_type";
    case kInvalidAccessToken:
      return "invalid access_token";
    case kInvalidUrl:
      return "invalid url";
    case kIpNotWhitelisted:
      return "invalid ip, not in whitelist";
    case kAccessTokenMissing:
      return "access_token missing";
    case kTokenExpired:
      return "access_token expired";
    case kQuotaExceeded:
      return "reach max api daily quota limit";
    case kFeatureBlocked:
      return "api unauthorized, feature is blocked";
    case kModifyRefused:
      return "modify api refused by mock";
    case kUserLimited:
      return "the user is limited";
    default:
      return "unknown error";
  }
}

}  // namespace miniscope::errc
