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

#include "miniscope/platform.hpp"

#include <stdexcept>
#include <string>

namespace miniscope {

std::string_view to_string(Platform p) {
  switch (p) {
    case Platform::kWechatLike:
      return "wechat-like";
    case Platform::kBaiduLike:
      return "baidu-like";
    case Platform::kCustom:
      return "custom";
  }
  return "custom";
}

Platform platform_from_string(std::string_view s) {
  if (s == "wechat-like" || s == "wechat") return Platform::kWechatLike;
  if (s == "baidu-like" || s == "baidu") return Platform::kBaiduLike;
  if (s == "custom") return Platform::kCustom;
  throw std::invalid_argument("unknown platform '" + std::string(s) + "'");
}

}  // namespace miniscope
