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

namespace miniscope {

enum class Platform { kWechatLike, kBaiduLike, kCustom };

std::string_view to_string(Platform p);
/// Accepts "wechat-like"/"wechat", "baidu-like"/"baidu" and "custom".
Platform platform_from_string(std::string_view s);

}  // namespace miniscope
