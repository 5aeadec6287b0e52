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

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "fairdraw/entropy.hpp"
#include "fairdraw/error.hpp"
#include "fairdraw/modular_draw.hpp"
#include "fairdraw/sha256.hpp"

namespace fairdraw {

inline constexpr std::string_view kCommitDomainTag = "FAIRDRAW-COMMIT-V1";
inline constexpr std::size_t kMaxIdentifierLength = 255;

/// 256-bit secret mixed into a commitment.
struct Mask {
  std::array<std::uint8_t, 32> bytes{};

  friend bool operator==(const Mask&, const Mask&) = default;
};

struct CommitmentDigest {
  Digest256 bytes{};

  std::string hex() const { return to_hex(bytes); }

  friend bool operator==(const CommitmentDigest&,
                         const CommitmentDigest&) = default;
};

/// What a stakeholder discloses in the reveal phase.
struct Opening {
  ContributionValue value;
  Mask mask;

  friend bool operator==(const Opening&, const Opening&) = default;
};

inline Mask new_mask() {
  Mask m;
  secure_random_bytes(m.bytes);
  return m;
}

namespace detail {

inline void put_u64_be(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) {
    out.push_back(static_cast<std::uint8_t>(v >> shift));
  }
}

inline void put_short_string(std::vector<std::uint8_t>& out,
                             std::string_view s, const char* what) {
  FAIRDRAW_ENFORCE(s.size() <= kMaxIdentifierLength, ErrorCode::kEncoding,
                   std::string(what) + " longer than 255 octets");
  out.push_back(static_cast<std::uint8_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

}  // namespace detail

/// The exact octets hashed by `commit`:
///   tag | len(session) session | len(stakeholder) stakeholder | mask |
///   m (u64 BE) | n (u64 BE)
inline std::vector<std::uint8_t> encode_commitment(
    std::string_view session_id, std::string_view stakeholder_id,
    const ContributionValue& value, const Mask& mask) {
  std::vector<std::uint8_t> out;
  out.reserve(kCommitDomainTag.size() + 2 + session_id.size() +
              stakeholder_id.size() + 32 + 16);
  out.insert(out.end(), kCommitDomainTag.begin(), kCommitDomainTag.end());
  detail::put_short_string(out, session_id, "session_id");
  detail::put_short_string(out, stakeholder_id, "stakeholder_id");
  out.insert(out.end(), mask.bytes.begin(), mask.bytes.end());
  detail::put_u64_be(out, value.modulus().value());
  detail::put_u64_be(out, value.value());
  return out;
}

inline CommitmentDigest commit(std::string_view session_id,
                               std::string_view stakeholder_id,
                               const ContributionValue& value,
                               const Mask& mask) {
  return CommitmentDigest{
      sha256(encode_commitment(session_id, stakeholder_id, value, mask))};
}

/// Mismatch is reported as `false`, including identifiers that cannot be
/// encoded.
inline bool verify_opening(const CommitmentDigest& digest,
                           std::string_view session_id,
                           std::string_view stakeholder_id,
                           const Opening& opening) {
  if (session_id.size() > kMaxIdentifierLength ||
      stakeholder_id.size() > kMaxIdentifierLength) {
    return false;
  }
  auto recomputed = commit(session_id, stakeholder_id, opening.value,
                           opening.mask);
  return constant_time_equal(recomputed.bytes, digest.bytes);
}

}  // namespace fairdraw
