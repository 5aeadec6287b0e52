// Copyright 2026 The FairDraw Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <sys/stat.h>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

#include "fairdraw/commitment.hpp"
#include "fairdraw/error.hpp"
#include "fairdraw/sha256.hpp"
#include "fairdraw/storage.hpp"

namespace fairdraw {

/// What a stakeholder must keep private between commit and reveal.
struct LocalSecret {
  std::string session_id;
  std::string stakeholder_id;
  std::uint64_t modulus = 0;
  std::uint64_t value = 0;
  Mask mask;
  std::string digest_hex;
};

/// Owner-only directory of LocalSecrets, one file per (session, stakeholder).
/// After a reveal the secret is replaced by a receipt.
class SecretStore {
 public:
  explicit SecretStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

  static std::filesystem::path default_dir() {
    if (const char* env = std::getenv("FAIRDRAW_SECRETS_DIR")) return env;
    if (const char* xdg = std::getenv("XDG_DATA_HOME")) {
      return std::filesystem::path(xdg) / "fairdraw" / "secrets";
    }
    const char* home = std::getenv("HOME");
    return std::filesystem::path(home ? home : ".") / ".local" / "share" /
           "fairdraw" / "secrets";
  }

  const std::filesystem::path& dir() const { return dir_; }

  std::filesystem::path secret_path(const std::string& session,
                                    const std::string& who) const {
    return dir_ / (key(session, who) + ".secret.json");
  }

  std::filesystem::path receipt_path(const std::string& session,
                                     const std::string& who) const {
    return dir_ / (key(session, who) + ".revealed.json");
  }

  bool has_secret(const std::string& session, const std::string& who) const {
    return std::filesystem::exists(secret_path(session, who));
  }

  bool has_receipt(const std::string& session, const std::string& who) const {
    return std::filesystem::exists(receipt_path(session, who));
  }

  void save(const LocalSecret& s) {
    ensure_dir();
    const auto p = secret_path(s.session_id, s.stakeholder_id);
    FAIRDRAW_ENFORCE(!std::filesystem::exists(p), ErrorCode::kDuplicateCommitment,
                     "a local secret for this session already exists at " +
                         p.string());
    nlohmann::ordered_json j;
    j["session_id"] = s.session_id;
    j["stakeholder_id"] = s.stakeholder_id;
    j["modulus"] = s.modulus;
    j["value"] = s.value;
    j["mask"] = to_hex(s.mask.bytes);
    j["digest"] = s.digest_hex;
    storage::write_atomically(p, j.dump(2) + "\n", 0600);
  }

  std::optional<LocalSecret> load(const std::string& session,
                                  const std::string& who) const {
    const auto p = secret_path(session, who);
    if (!std::filesystem::exists(p)) return std::nullopt;
    auto j = nlohmann::json::parse(storage::read_file(p));
    LocalSecret s;
    s.session_id = j.at("session_id").get<std::string>();
    s.stakeholder_id = j.at("stakeholder_id").get<std::string>();
    s.modulus = j.at("modulus").get<std::uint64_t>();
    s.value = j.at("value").get<std::uint64_t>();
    auto mask = from_hex<32>(j.at("mask").get<std::string>());
    FAIRDRAW_ENFORCE(mask.has_value(), ErrorCode::kEncoding,
                     "corrupt mask in " + p.string());
    s.mask.bytes = *mask;
    s.digest_hex = j.at("digest").get<std::string>();
    return s;
  }

  void discard(const std::string& session, const std::string& who) {
    std::filesystem::remove(secret_path(session, who));
  }

  /// Swaps the secret for a receipt; with `retain` the secret stays.
  void mark_revealed(const LocalSecret& s, bool retain) {
    ensure_dir();
    nlohmann::ordered_json j;
    j["session_id"] = s.session_id;
    j["stakeholder_id"] = s.stakeholder_id;
    j["digest"] = s.digest_hex;
    storage::write_atomically(receipt_path(s.session_id, s.stakeholder_id),
                              j.dump(2) + "\n", 0600);
    if (!retain) discard(s.session_id, s.stakeholder_id);
  }

 private:
  static std::string key(const std::string& session, const std::string& who) {
    auto hex = [](const std::string& s) {
      return to_hex(std::span<const std::uint8_t>(
          reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
    };
    return hex(session) + "_" + hex(who);
  }

  void ensure_dir() {
    std::filesystem::create_directories(dir_);
    ::chmod(dir_.c_str(), 0700);
  }

  std::filesystem::path dir_;
};

}  // namespace fairdraw
