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
#include <random>
#include <string>
#include <vector>

#include "fairdraw/ceremony.hpp"
#include "fairdraw/commitment.hpp"
#include "fairdraw/transcript.hpp"

namespace fairdraw::testing {

inline constexpr std::uint64_t kReferenceModulus = 10'000'000;
inline constexpr std::array<std::uint64_t, 5> kReferenceValues = {
    1'610'027, 5'871'032, 6'029'108, 7'664'824, 5'757'989};
inline constexpr std::uint64_t kReferenceOutcome = 6'932'980;

inline std::vector<std::string> reference_roster() {
  return {"S0", "S1", "S2", "S3", "S4"};
}

inline Timestamp at(std::int64_t ms) { return timestamp_from_millis(ms); }

// Deterministic mask so transcripts are reproducible byte for byte.
inline Mask seeded_mask(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Mask m;
  for (auto& b : m.bytes) b = static_cast<std::uint8_t>(rng());
  return m;
}

inline DrawSpec reference_spec(std::string session = "reference") {
  DrawSpec spec;
  spec.session_id = std::move(session);
  spec.modulus = Modulus(kReferenceModulus);
  spec.roster = reference_roster();
  spec.metadata = "five stakeholders, m = 10,000,000";
  return spec;
}

/// Runs the five-party example end to end through the transcript.
inline Transcript reference_transcript() {
  const auto spec = reference_spec();
  const Modulus m = spec.modulus;
  Transcript t = append_record(
      Transcript{}, events::CeremonyCreated{
                        std::make_shared<const DrawSpec>(spec)});
  const auto roster = reference_roster();
  for (std::size_t i = 0; i < roster.size(); ++i) {
    auto d = commit(spec.session_id, roster[i],
                    ContributionValue(kReferenceValues[i], m), seeded_mask(i));
    t = append_record(std::move(t), events::CommitmentSubmitted{
                                        roster[i], d, at(1000 + int(i))});
  }
  for (std::size_t i = 0; i < roster.size(); ++i) {
    t = append_record(std::move(t),
                      events::RevealSubmitted{roster[i], kReferenceValues[i],
                                              seeded_mask(i),
                                              at(2000 + int(i))});
  }
  t = append_record(std::move(t),
                    events::Completed{t.state()->outcome->value()});
  return t;
}

}  // namespace fairdraw::testing
