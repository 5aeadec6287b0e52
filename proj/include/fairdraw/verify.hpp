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

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "fairdraw/transcript.hpp"

namespace fairdraw {

struct Finding {
  std::uint64_t seq = 0;
  std::string description;

  friend bool operator==(const Finding&, const Finding&) = default;
};

struct VerificationReport {
  bool chain_ok = true;
  bool phase_order_ok = true;
  bool openings_ok = true;
  bool outcome_ok = true;
  std::optional<ContributionValue> recomputed_outcome;
  std::optional<Phase> final_phase;
  std::vector<Finding> findings;

  bool all_ok() const {
    return chain_ok && phase_order_ok && openings_ok && outcome_ok;
  }

  /// Lowest seq with a finding, if any.
  std::optional<std::uint64_t> first_failing_seq() const {
    std::optional<std::uint64_t> lo;
    for (const auto& f : findings) {
      if (!lo || f.seq < *lo) lo = f.seq;
    }
    return lo;
  }

  friend bool operator==(const VerificationReport&,
                         const VerificationReport&) = default;
};

namespace detail {

// Splits on '\n'. The flag reports whether the input ended mid-line.
inline std::pair<std::vector<std::string_view>, bool> split_lines(
    std::string_view bytes) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < bytes.size()) {
    auto nl = bytes.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.push_back(bytes.substr(start));
      return {lines, true};
    }
    lines.push_back(bytes.substr(start, nl - start));
    start = nl + 1;
  }
  return {lines, false};
}

}  // namespace detail

/// Re-derives everything a third party can check from transcript bytes
/// alone: the hash chain, the phase ordering, every opening and the
/// outcome. Never throws on hostile input.
inline VerificationReport verify_transcript(std::string_view bytes) {
  VerificationReport report;
  auto fail = [&](bool VerificationReport::*flag, std::uint64_t seq,
                  std::string what) {
    report.*flag = false;
    report.findings.push_back({seq, std::move(what)});
  };

  auto [lines, truncated] = detail::split_lines(bytes);
  if (lines.empty()) {
    fail(&VerificationReport::chain_ok, 0, "empty transcript");
    return report;
  }

  ReplayState replay;
  Digest256 expected_prev{};
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto seq = static_cast<std::uint64_t>(i);
    if (truncated && i + 1 == lines.size()) {
      fail(&VerificationReport::chain_ok, seq,
           "unexpected end of transcript inside record " +
               std::to_string(seq));
      break;
    }
    TranscriptRecord rec;
    try {
      rec = record_from_line(lines[i]);
    } catch (const Error& e) {
      fail(&VerificationReport::chain_ok, seq,
           std::string("malformed record: ") + e.what());
      break;
    }

    if (rec.seq != seq) {
      fail(&VerificationReport::chain_ok, seq,
           "sequence number " + std::to_string(rec.seq) + " out of order");
    }
    if (rec.prev_hash != expected_prev) {
      fail(&VerificationReport::chain_ok, seq,
           "prev_hash does not match the preceding record");
    }
    const auto recomputed = hash_record(rec.seq, rec.prev_hash, rec.event);
    if (recomputed != rec.record_hash) {
      fail(&VerificationReport::chain_ok, seq,
           "record_hash does not match record contents");
    }
    expected_prev = rec.record_hash;

    try {
      replay = apply_event(replay, rec.event);
    } catch (const Error& e) {
      switch (e.code()) {
        case ErrorCode::kInvalidOpening:
        case ErrorCode::kOutOfRange:
          fail(&VerificationReport::openings_ok, seq, e.what());
          break;
        case ErrorCode::kDomain:
          if (std::holds_alternative<events::Completed>(rec.event)) {
            fail(&VerificationReport::outcome_ok, seq, e.what());
            break;
          }
          [[fallthrough]];
        default:
          fail(&VerificationReport::phase_order_ok, seq,
               std::string(event_type_name(rec.event)) + " not allowed: " +
                   e.what());
      }
    }
  }

  if (replay.ceremony) {
    report.final_phase = replay.ceremony->phase;
    report.recomputed_outcome = outcome_of(*replay.ceremony);
  }
  return report;
}

inline VerificationReport verify_transcript(const Transcript& t) {
  return verify_transcript(serialize_transcript(t));
}

/// Rebuilds a Transcript from its JSON-lines form. In strict mode any
/// discrepancy throws; otherwise the longest clean prefix is returned.
inline Transcript load_transcript(std::string_view bytes, bool strict = true) {
  auto [lines, truncated] = detail::split_lines(bytes);
  if (truncated) {
    FAIRDRAW_ENFORCE(!strict, ErrorCode::kEncoding,
                     "unexpected end of transcript");
    lines.pop_back();
  }
  Transcript t;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      auto rec = record_from_line(lines[i]);
      auto next = append_record(t, rec.event);
      const auto& built = next.records().back();
      FAIRDRAW_ENFORCE(built.seq == rec.seq && built.prev_hash == rec.prev_hash &&
                           built.record_hash == rec.record_hash,
                       ErrorCode::kEncoding,
                       "record " + std::to_string(i) + " breaks the chain");
      t = std::move(next);
    } catch (const Error& e) {
      if (strict) {
        throw Error(ErrorCode::kEncoding,
                    "record " + std::to_string(i) + ": " + e.what());
      }
      break;
    }
  }
  return t;
}

inline nlohmann::ordered_json report_to_json(const VerificationReport& r) {
  nlohmann::ordered_json j;
  j["all_ok"] = r.all_ok();
  j["chain_ok"] = r.chain_ok;
  j["phase_order_ok"] = r.phase_order_ok;
  j["openings_ok"] = r.openings_ok;
  j["outcome_ok"] = r.outcome_ok;
  j["final_phase"] = r.final_phase
                         ? nlohmann::ordered_json(std::string(
                               to_string(*r.final_phase)))
                         : nlohmann::ordered_json(nullptr);
  j["recomputed_outcome"] =
      r.recomputed_outcome
          ? nlohmann::ordered_json(r.recomputed_outcome->value())
          : nlohmann::ordered_json(nullptr);
  auto findings = nlohmann::ordered_json::array();
  for (const auto& f : r.findings) {
    findings.push_back({{"seq", f.seq}, {"description", f.description}});
  }
  j["findings"] = std::move(findings);
  return j;
}

}  // namespace fairdraw
