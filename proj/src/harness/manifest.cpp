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

#include "dmid/harness/manifest.hpp"

#include <openssl/evp.h>

#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>

#include <fmt/format.h>

#include "dmid/error.hpp"
#include "dmid/harness/image_io.hpp"

namespace dmid::harness {

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &length) != 1) {
    throw Error("sha256 failed");
  }
  std::string out;
  for (unsigned int i = 0; i < length; ++i) out += fmt::format("{:02x}", digest[i]);
  return out;
}

std::string sha256_hex(const std::string& text) {
  return sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string sha256_file(const std::string& path) { return sha256_hex(io::read_file(path)); }

std::string manifest_path_for(const std::string& output) {
  return output + ".manifest.jsonl";
}

void append_manifest(const std::string& manifest_path, const nlohmann::json& record) {
  static std::mutex writer;
  std::lock_guard lock(writer);
  std::ofstream out(manifest_path, std::ios::app);
  if (!out) throw IoError(fmt::format("cannot append to manifest '{}'", manifest_path));
  out << record.dump() << '\n';
  out.flush();
  if (!out) throw IoError(fmt::format("short write on manifest '{}'", manifest_path));
}

std::vector<nlohmann::json> read_manifest(const std::string& manifest_path) {
  std::vector<nlohmann::json> records;
  if (!std::filesystem::exists(manifest_path)) return records;
  std::ifstream in(manifest_path);
  if (!in) throw IoError(fmt::format("cannot read manifest '{}'", manifest_path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      records.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception&) {
      // A torn last line from an interrupted run; everything before it stands.
      break;
    }
  }
  return records;
}

nlohmann::json file_entry(const std::string& path, bool deterministic) {
  return {{"path", path}, {"sha256", sha256_file(path)}, {"deterministic", deterministic}};
}

}  // namespace dmid::harness
