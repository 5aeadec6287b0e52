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

#include <openssl/rand.h>

#include <array>
#include <cstdint>
#include <cstring>
#include <span>

#include "fairdraw/error.hpp"
#include "fairdraw/modular_draw.hpp"

namespace fairdraw {

/// Fills `out` from the OpenSSL CSPRNG. Throws instead of degrading.
inline void secure_random_bytes(std::span<std::uint8_t> out) {
  if (out.empty()) return;
  if (RAND_bytes(out.data(), static_cast<int>(out.size())) != 1) {
    throw Error(ErrorCode::kEntropyUnavailable,
                "secure entropy source unavailable");
  }
}

/// Uniform value in [0, m) by rejection sampling on 64-bit draws.
inline ContributionValue secure_uniform(Modulus m) {
  const std::uint64_t mod = m.value();
  // 2^64 mod m; draws above the last full multiple of m are rejected.
  const std::uint64_t excess = (UINT64_MAX % mod + 1) % mod;
  const std::uint64_t max_accepted = UINT64_MAX - excess;
  for (;;) {
    std::array<std::uint8_t, 8> buf{};
    secure_random_bytes(buf);
    std::uint64_t x = 0;
    std::memcpy(&x, buf.data(), sizeof(x));
    if (x <= max_accepted) {
      return ContributionValue(x % mod, m);
    }
  }
}

}  // namespace fairdraw
