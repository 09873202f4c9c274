// Copyright 2026 The crossdim Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace crossdim {

/// Sibling path used for staging writes to `target`.
std::filesystem::path staging_path(const std::filesystem::path& target);

/// Writes `bytes` to a staging file then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

/// Moves a fully written staging file or directory into place, replacing
/// any previous content at `target`.
void commit_staged(const std::filesystem::path& staged, const std::filesystem::path& target);

std::string read_file(const std::filesystem::path& path);

}  // namespace crossdim
