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

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "fairdraw/commitment.hpp"
#include "fairdraw/error.hpp"
#include "fairdraw/modular_draw.hpp"
#include "fairdraw/text.hpp"

namespace fairdraw {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

inline Timestamp timestamp_from_millis(std::int64_t ms) {
  return Timestamp(std::chrono::milliseconds(ms));
}

inline std::int64_t to_millis(Timestamp t) {
  return t.time_since_epoch().count();
}

/// Parameters of one drawing, fixed at creation.
struct DrawSpec {
  std::string session_id;
  Modulus modulus{2};
  std::vector<std::string> roster;
  std::optional<std::vector<std::string>> candidates;
  std::string metadata;
  std::optional<Timestamp> commit_deadline;
  std::optional<Timestamp> reveal_deadline;
  // Session this draw replaces after an abort. Retries must say so.
  std::optional<std::string> predecessor;

  friend bool operator==(const DrawSpec&, const DrawSpec&) = default;
};

enum class Phase { kSetup, kCommit, kReveal, kComplete, kAborted };

constexpr std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::kSetup: return "Setup";
    case Phase::kCommit: return "Commit";
    case Phase::kReveal: return "Reveal";
    case Phase::kComplete: return "Complete";
    case Phase::kAborted: return "Aborted";
  }
  return "?";
}

constexpr bool is_terminal(Phase p) {
  return p == Phase::kComplete || p == Phase::kAborted;
}

/// Immutable snapshot of a ceremony. Every operation returns a new one.
struct CeremonyState {
  std::shared_ptr<const DrawSpec> spec;
  Phase phase = Phase::kSetup;
  std::map<std::string, CommitmentDigest> commitments;
  std::map<std::string, Opening> reveals;
  std::optional<ContributionValue> outcome;
  std::optional<std::string> abort_reason;

  const DrawSpec& draw() const { return *spec; }

  bool in_roster(std::string_view id) const {
    for (const auto& r : spec->roster) {
      if (r == id) return true;
    }
    return false;
  }

  friend bool operator==(const CeremonyState& a, const CeremonyState& b) {
    return *a.spec == *b.spec && a.phase == b.phase &&
           a.commitments == b.commitments && a.reveals == b.reveals &&
           a.outcome == b.outcome && a.abort_reason == b.abort_reason;
  }
};

inline void validate_identifier(std::string_view id, const char* what) {
  FAIRDRAW_ENFORCE(!id.empty(), ErrorCode::kConfiguration,
                   std::string(what) + " must not be empty");
  FAIRDRAW_ENFORCE(id.size() <= kMaxIdentifierLength,
                   ErrorCode::kConfiguration,
                   std::string(what) + " longer than 255 octets");
  FAIRDRAW_ENFORCE(is_valid_utf8(id), ErrorCode::kConfiguration,
                   std::string(what) + " is not valid UTF-8");
}

inline void validate_spec(const DrawSpec& spec) {
  validate_identifier(spec.session_id, "session_id");
  FAIRDRAW_ENFORCE(!spec.roster.empty(), ErrorCode::kConfiguration,
                   "roster must contain at least one stakeholder");
  std::set<std::string_view> seen;
  for (const auto& id : spec.roster) {
    validate_identifier(id, "stakeholder_id");
    FAIRDRAW_ENFORCE(seen.insert(id).second, ErrorCode::kConfiguration,
                     "duplicate stakeholder id '" + id + "'");
  }
  if (spec.candidates) {
    FAIRDRAW_ENFORCE(spec.candidates->size() == spec.modulus.value(),
                     ErrorCode::kConfiguration,
                     "candidate count " +
                         std::to_string(spec.candidates->size()) +
                         " must equal modulus " +
                         std::to_string(spec.modulus.value()));
    for (const auto& c : *spec.candidates) {
      FAIRDRAW_ENFORCE(is_valid_utf8(c), ErrorCode::kConfiguration,
                       "candidate label is not valid UTF-8");
    }
  }
  FAIRDRAW_ENFORCE(is_valid_utf8(spec.metadata), ErrorCode::kConfiguration,
                   "metadata is not valid UTF-8");
  if (spec.commit_deadline && spec.reveal_deadline) {
    FAIRDRAW_ENFORCE(*spec.reveal_deadline >= *spec.commit_deadline,
                     ErrorCode::kConfiguration,
                     "reveal deadline precedes commit deadline");
  }
  if (spec.predecessor) {
    validate_identifier(*spec.predecessor, "predecessor");
    FAIRDRAW_ENFORCE(*spec.predecessor != spec.session_id,
                     ErrorCode::kConfiguration,
                     "a session cannot succeed itself");
  }
}

inline CeremonyState create_ceremony(DrawSpec spec) {
  validate_spec(spec);
  CeremonyState state;
  state.spec = std::make_shared<const DrawSpec>(std::move(spec));
  state.phase = Phase::kCommit;
  return state;
}

inline CeremonyState submit_commitment(const CeremonyState& state,
                                       const std::string& stakeholder_id,
                                       const CommitmentDigest& digest,
                                       Timestamp now) {
  FAIRDRAW_ENFORCE(state.phase == Phase::kCommit, ErrorCode::kPhaseViolation,
                   "commitments are only accepted in Commit phase (phase is " +
                       std::string(to_string(state.phase)) + ")");
  FAIRDRAW_ENFORCE(state.in_roster(stakeholder_id),
                   ErrorCode::kUnknownStakeholder,
                   "'" + stakeholder_id + "' is not in the roster");
  FAIRDRAW_ENFORCE(!state.commitments.contains(stakeholder_id),
                   ErrorCode::kDuplicateCommitment,
                   "'" + stakeholder_id + "' has already committed");
  const auto& deadline = state.draw().commit_deadline;
  FAIRDRAW_ENFORCE(!deadline || now <= *deadline, ErrorCode::kDeadlineExpired,
                   "commit deadline has passed");

  CeremonyState next = state;
  next.commitments.emplace(stakeholder_id, digest);
  if (next.commitments.size() == next.draw().roster.size()) {
    next.phase = Phase::kReveal;
  }
  return next;
}

inline CeremonyState submit_reveal(const CeremonyState& state,
                                   const std::string& stakeholder_id,
                                   const Opening& opening, Timestamp now) {
  // No opening is looked at while any commitment is outstanding.
  FAIRDRAW_ENFORCE(state.phase == Phase::kReveal, ErrorCode::kPhaseViolation,
                   "reveals are only accepted in Reveal phase (phase is " +
                       std::string(to_string(state.phase)) + ")");
  auto committed = state.commitments.find(stakeholder_id);
  FAIRDRAW_ENFORCE(committed != state.commitments.end(),
                   ErrorCode::kUnknownStakeholder,
                   "'" + stakeholder_id + "' has no commitment");
  FAIRDRAW_ENFORCE(!state.reveals.contains(stakeholder_id),
                   ErrorCode::kDuplicateReveal,
                   "'" + stakeholder_id + "' has already revealed");
  const auto& deadline = state.draw().reveal_deadline;
  FAIRDRAW_ENFORCE(!deadline || now <= *deadline, ErrorCode::kDeadlineExpired,
                   "reveal deadline has passed");
  FAIRDRAW_ENFORCE(opening.value.modulus() == state.draw().modulus,
                   ErrorCode::kOutOfRange,
                   "opening modulus differs from the session modulus");
  FAIRDRAW_ENFORCE(verify_opening(committed->second, state.draw().session_id,
                                  stakeholder_id, opening),
                   ErrorCode::kInvalidOpening,
                   "opening for '" + stakeholder_id +
                       "' does not match its commitment");

  CeremonyState next = state;
  next.reveals.emplace(stakeholder_id, opening);
  if (next.reveals.size() == next.draw().roster.size()) {
    std::vector<ContributionValue> values;
    values.reserve(next.reveals.size());
    for (const auto& id : next.draw().roster) {
      values.push_back(next.reveals.at(id).value);
    }
    next.outcome = mod_add(values, next.draw().modulus);
    next.phase = Phase::kComplete;
  }
  return next;
}

/// Aborts are permanent. A retry needs a fresh session naming this one as
/// its predecessor.
inline CeremonyState abort_ceremony(const CeremonyState& state,
                                    std::string reason, Timestamp /*now*/) {
  FAIRDRAW_ENFORCE(
      state.phase == Phase::kCommit || state.phase == Phase::kReveal,
      ErrorCode::kPhaseViolation,
      "cannot abort a ceremony in phase " +
          std::string(to_string(state.phase)));
  CeremonyState next = state;
  next.phase = Phase::kAborted;
  next.abort_reason = std::move(reason);
  return next;
}

inline std::optional<ContributionValue> outcome_of(const CeremonyState& state) {
  if (state.phase != Phase::kComplete) return std::nullopt;
  return state.outcome;
}

}  // namespace fairdraw
