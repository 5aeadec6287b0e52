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

#include <bit>
#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fairdraw/error.hpp"

namespace fairdraw {

/// Wrap-around bound of a draw. Outcomes live in [0, m).
class Modulus {
 public:
  static constexpr std::uint64_t kMax =
      static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max());

  explicit Modulus(std::uint64_t m) : m_(m) {
    FAIRDRAW_ENFORCE(m >= 2, ErrorCode::kDomain, "modulus must be >= 2");
    FAIRDRAW_ENFORCE(m <= kMax, ErrorCode::kDomain,
                     "modulus must be <= 2^63 - 1");
  }

  std::uint64_t value() const noexcept { return m_; }

  friend bool operator==(Modulus, Modulus) = default;

 private:
  std::uint64_t m_;
};

/// A residue in [0, m) that remembers its modulus.
class ContributionValue {
 public:
  ContributionValue(std::uint64_t n, Modulus m) : n_(n), m_(m) {
    FAIRDRAW_ENFORCE(n < m.value(), ErrorCode::kOutOfRange,
                     "value " + std::to_string(n) + " not below modulus " +
                         std::to_string(m.value()));
  }

  std::uint64_t value() const noexcept { return n_; }
  Modulus modulus() const noexcept { return m_; }

  friend bool operator==(const ContributionValue&,
                         const ContributionValue&) = default;

 private:
  std::uint64_t n_;
  Modulus m_;
};

/// Sum of all contributions modulo m, reduced after every addition.
inline ContributionValue mod_add(std::span<const ContributionValue> values,
                                 Modulus m) {
  FAIRDRAW_ENFORCE(!values.empty(), ErrorCode::kDomain,
                   "mod_add needs at least one value");
  const std::uint64_t mod = m.value();
  std::uint64_t acc = 0;
  for (const auto& v : values) {
    FAIRDRAW_ENFORCE(v.modulus() == m, ErrorCode::kDomain,
                     "mixed moduli in mod_add");
    // acc, v < m <= 2^63 - 1, so the sum fits in 64 bits.
    acc += v.value();
    if (acc >= mod) acc -= mod;
  }
  return ContributionValue(acc, m);
}

/// n / m as the nearest double. Always < 1.0.
inline double to_unit_fraction(const ContributionValue& n) {
  const auto num = n.value();
  const auto den = n.modulus().value();
  if (num == 0) return 0.0;
  // Both fit in 53 bits: a single correctly rounded division.
  constexpr std::uint64_t kExact = std::uint64_t{1} << 53;
  if (den <= kExact) {
    return static_cast<double>(num) / static_cast<double>(den);
  }
  // Wide moduli: normalize the numerator to the top of 128 bits, divide,
  // keep a sticky bit for the remainder and round once. The quotient has
  // more than 64 significant bits, so the sticky bit sits below the rounding
  // position. Round-to-nearest can reach 1.0 when n = m - 1 with m huge;
  // clamp to the largest double below one.
  const int shift = 64 + std::countl_zero(num);
  const unsigned __int128 wide = static_cast<unsigned __int128>(num) << shift;
  unsigned __int128 q = wide / den;
  if (wide % den != 0) q |= 1;
  double r = std::ldexp(static_cast<double>(q), -shift);
  if (r >= 1.0) r = std::nextafter(1.0, 0.0);
  return r;
}

template <typename Label>
const Label& select_candidate(const ContributionValue& n,
                              const std::vector<Label>& candidates) {
  FAIRDRAW_ENFORCE(candidates.size() == n.modulus().value(),
                   ErrorCode::kConfiguration,
                   "candidate count " + std::to_string(candidates.size()) +
                       " must equal modulus " +
                       std::to_string(n.modulus().value()));
  return candidates[n.value()];
}

}  // namespace fairdraw
