// Copyright 2026 The dmid Authors.
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

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace dmid::harness {

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(const std::string& text);
std::string sha256_file(const std::string& path);

/// Manifests are JSON Lines files, one record per line. Records are only
/// ever appended.
std::string manifest_path_for(const std::string& output);

/// Appends one record. Appends from concurrent threads are serialized.
void append_manifest(const std::string& manifest_path, const nlohmann::json& record);

/// Reads every record; a missing file yields an empty list.
std::vector<nlohmann::json> read_manifest(const std::string& manifest_path);

nlohmann::json file_entry(const std::string& path, bool deterministic = true);

}  // namespace dmid::harness
