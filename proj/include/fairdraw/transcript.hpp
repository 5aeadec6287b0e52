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
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"

#include "fairdraw/ceremony.hpp"
#include "fairdraw/commitment.hpp"
#include "fairdraw/error.hpp"
#include "fairdraw/sha256.hpp"

namespace fairdraw {

inline constexpr std::string_view kRecordDomainTag = "FAIRDRAW-RECORD-V1";

namespace events {

struct CeremonyCreated {
  std::shared_ptr<const DrawSpec> spec;
  friend bool operator==(const CeremonyCreated& a, const CeremonyCreated& b) {
    return *a.spec == *b.spec;
  }
};

struct CommitmentSubmitted {
  std::string stakeholder_id;
  CommitmentDigest digest;
  Timestamp timestamp;
  friend bool operator==(const CommitmentSubmitted&,
                         const CommitmentSubmitted&) = default;
};

// The value travels raw; it is range-checked against the session modulus
// when the event is applied.
struct RevealSubmitted {
  std::string stakeholder_id;
  std::uint64_t value = 0;
  Mask mask;
  Timestamp timestamp;
  friend bool operator==(const RevealSubmitted&,
                         const RevealSubmitted&) = default;
};

struct OpeningRejected {
  std::string stakeholder_id;
  std::string reason;
  Timestamp timestamp;
  friend bool operator==(const OpeningRejected&,
                         const OpeningRejected&) = default;
};

struct Completed {
  std::uint64_t outcome = 0;
  friend bool operator==(const Completed&, const Completed&) = default;
};

struct Aborted {
  std::string reason;
  std::optional<std::string> successor_hint;
  Timestamp timestamp;
  friend bool operator==(const Aborted&, const Aborted&) = default;
};

}  // namespace events

using Event = std::variant<events::CeremonyCreated, events::CommitmentSubmitted,
                           events::RevealSubmitted, events::OpeningRejected,
                           events::Completed, events::Aborted>;

inline std::string_view event_type_name(const Event& e) {
  static constexpr std::string_view kNames[] = {
      "CeremonyCreated", "CommitmentSubmitted", "RevealSubmitted",
      "OpeningRejected", "Completed",           "Aborted"};
  return kNames[e.index()];
}

struct TranscriptRecord {
  std::uint64_t seq = 0;
  Digest256 prev_hash{};
  Event event;
  Digest256 record_hash{};

  friend bool operator==(const TranscriptRecord&,
                         const TranscriptRecord&) = default;
};

// ---------------------------------------------------------------------------
// Binary framing. All integers big-endian; strings and lists carry a u32
// length; optionals a one-octet presence flag.

namespace detail {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out_.push_back(std::uint8_t(v >> s));
  }
  void u64(std::uint64_t v) {
    for (int s = 56; s >= 0; s -= 8) out_.push_back(std::uint8_t(v >> s));
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void bytes(std::span<const std::uint8_t> b) {
    out_.insert(out_.end(), b.begin(), b.end());
  }
  void str(std::string_view s) {
    FAIRDRAW_ENFORCE(s.size() <= UINT32_MAX, ErrorCode::kEncoding,
                     "string too long to frame");
    u32(static_cast<std::uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }
  void str_list(const std::vector<std::string>& v) {
    u32(static_cast<std::uint32_t>(v.size()));
    for (const auto& s : v) str(s);
  }
  template <typename T, typename F>
  void opt(const std::optional<T>& v, F&& put) {
    u8(v ? 1 : 0);
    if (v) put(*v);
  }
  void ts(Timestamp t) { i64(to_millis(t)); }

  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

inline void write_spec(ByteWriter& w, const DrawSpec& s) {
  w.str(s.session_id);
  w.u64(s.modulus.value());
  w.str_list(s.roster);
  w.opt(s.candidates, [&](const auto& c) { w.str_list(c); });
  w.str(s.metadata);
  w.opt(s.commit_deadline, [&](Timestamp t) { w.ts(t); });
  w.opt(s.reveal_deadline, [&](Timestamp t) { w.ts(t); });
  w.opt(s.predecessor, [&](const std::string& p) { w.str(p); });
}

inline void write_event(ByteWriter& w, const Event& event) {
  w.u8(static_cast<std::uint8_t>(event.index() + 1));
  std::visit(
      [&](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, events::CeremonyCreated>) {
          write_spec(w, *e.spec);
        } else if constexpr (std::is_same_v<T, events::CommitmentSubmitted>) {
          w.str(e.stakeholder_id);
          w.bytes(e.digest.bytes);
          w.ts(e.timestamp);
        } else if constexpr (std::is_same_v<T, events::RevealSubmitted>) {
          w.str(e.stakeholder_id);
          w.u64(e.value);
          w.bytes(e.mask.bytes);
          w.ts(e.timestamp);
        } else if constexpr (std::is_same_v<T, events::OpeningRejected>) {
          w.str(e.stakeholder_id);
          w.str(e.reason);
          w.ts(e.timestamp);
        } else if constexpr (std::is_same_v<T, events::Completed>) {
          w.u64(e.outcome);
        } else if constexpr (std::is_same_v<T, events::Aborted>) {
          w.str(e.reason);
          w.opt(e.successor_hint, [&](const std::string& s) { w.str(s); });
          w.ts(e.timestamp);
        }
      },
      event);
}

}  // namespace detail

/// Octets covered by a record's hash.
inline std::vector<std::uint8_t> encode_record(std::uint64_t seq,
                                               const Digest256& prev_hash,
                                               const Event& event) {
  detail::ByteWriter w;
  w.bytes(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(kRecordDomainTag.data()),
      kRecordDomainTag.size()));
  w.u64(seq);
  w.bytes(prev_hash);
  detail::write_event(w, event);
  return w.take();
}

inline Digest256 hash_record(std::uint64_t seq, const Digest256& prev_hash,
                             const Event& event) {
  return sha256(encode_record(seq, prev_hash, event));
}

// ---------------------------------------------------------------------------
// State machine replay.

/// Ceremony state as implied by a sequence of events.
struct ReplayState {
  std::optional<CeremonyState> ceremony;
  bool completion_recorded = false;

  friend bool operator==(const ReplayState&, const ReplayState&) = default;
};

/// Applies one event, throwing `Error` if it is not legal here. The input
/// is never modified.
inline ReplayState apply_event(const ReplayState& current, const Event& event) {
  ReplayState next = current;
  std::visit(
      [&](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, events::CeremonyCreated>) {
          FAIRDRAW_ENFORCE(!current.ceremony, ErrorCode::kPhaseViolation,
                           "CeremonyCreated must be the first record");
          next.ceremony = create_ceremony(*e.spec);
          return;
        } else {
          FAIRDRAW_ENFORCE(current.ceremony.has_value(),
                           ErrorCode::kPhaseViolation,
                           "transcript must begin with CeremonyCreated");
          const CeremonyState& st = *current.ceremony;
          if constexpr (std::is_same_v<T, events::CommitmentSubmitted>) {
            next.ceremony =
                submit_commitment(st, e.stakeholder_id, e.digest, e.timestamp);
          } else if constexpr (std::is_same_v<T, events::RevealSubmitted>) {
            FAIRDRAW_ENFORCE(st.phase == Phase::kReveal,
                             ErrorCode::kPhaseViolation,
                             "reveal outside Reveal phase");
            Opening opening{ContributionValue(e.value, st.draw().modulus),
                            e.mask};
            next.ceremony =
                submit_reveal(st, e.stakeholder_id, opening, e.timestamp);
          } else if constexpr (std::is_same_v<T, events::OpeningRejected>) {
            FAIRDRAW_ENFORCE(st.phase == Phase::kReveal,
                             ErrorCode::kPhaseViolation,
                             "rejected opening outside Reveal phase");
            FAIRDRAW_ENFORCE(st.commitments.contains(e.stakeholder_id) &&
                                 !st.reveals.contains(e.stakeholder_id),
                             ErrorCode::kUnknownStakeholder,
                             "rejected opening for a stakeholder with no "
                             "pending reveal");
          } else if constexpr (std::is_same_v<T, events::Completed>) {
            FAIRDRAW_ENFORCE(
                st.phase == Phase::kComplete && !current.completion_recorded,
                ErrorCode::kPhaseViolation,
                "Completed must directly follow the final reveal");
            FAIRDRAW_ENFORCE(st.outcome && st.outcome->value() == e.outcome,
                             ErrorCode::kDomain,
                             "recorded outcome " + std::to_string(e.outcome) +
                                 " differs from recomputed " +
                                 std::to_string(st.outcome->value()));
            next.completion_recorded = true;
          } else if constexpr (std::is_same_v<T, events::Aborted>) {
            next.ceremony = abort_ceremony(st, e.reason, e.timestamp);
          }
        }
      },
      event);
  return next;
}

// ---------------------------------------------------------------------------

/// Append-only, hash-chained log of one ceremony together with the state it
/// implies.
class Transcript {
 public:
  const std::vector<TranscriptRecord>& records() const { return records_; }
  const ReplayState& replay() const { return replay_; }
  const std::optional<CeremonyState>& state() const {
    return replay_.ceremony;
  }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  Digest256 head_hash() const {
    return records_.empty() ? Digest256{} : records_.back().record_hash;
  }

  friend Transcript append_record(Transcript transcript, Event event);

  friend bool operator==(const Transcript&, const Transcript&) = default;

 private:
  std::vector<TranscriptRecord> records_;
  ReplayState replay_;
};

/// Illegal events throw and leave the caller's transcript untouched.
inline Transcript append_record(Transcript transcript, Event event) {
  ReplayState next = apply_event(transcript.replay_, event);
  TranscriptRecord rec;
  rec.seq = transcript.records_.size();
  rec.prev_hash = transcript.head_hash();
  rec.record_hash = hash_record(rec.seq, rec.prev_hash, event);
  rec.event = std::move(event);
  transcript.records_.push_back(std::move(rec));
  transcript.replay_ = std::move(next);
  return transcript;
}

// ---------------------------------------------------------------------------
// JSON-lines form. Hashes never cover the JSON; parsing is strict so that
// every record has one textual form.

using ordered_json = nlohmann::ordered_json;

namespace detail {

template <typename T, typename F>
ordered_json opt_json(const std::optional<T>& v, F&& f) {
  return v ? ordered_json(f(*v)) : ordered_json(nullptr);
}

inline ordered_json spec_to_json(const DrawSpec& s) {
  ordered_json j;
  j["session_id"] = s.session_id;
  j["modulus"] = s.modulus.value();
  j["roster"] = s.roster;
  j["candidates"] = opt_json(s.candidates, [](const auto& c) { return c; });
  j["metadata"] = s.metadata;
  j["commit_deadline"] = opt_json(s.commit_deadline, to_millis);
  j["reveal_deadline"] = opt_json(s.reveal_deadline, to_millis);
  j["predecessor"] =
      opt_json(s.predecessor, [](const std::string& p) { return p; });
  return j;
}

}  // namespace detail

inline ordered_json event_to_json(const Event& event) {
  ordered_json j;
  j["type"] = std::string(event_type_name(event));
  std::visit(
      [&](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, events::CeremonyCreated>) {
          j["spec"] = detail::spec_to_json(*e.spec);
        } else if constexpr (std::is_same_v<T, events::CommitmentSubmitted>) {
          j["stakeholder_id"] = e.stakeholder_id;
          j["digest"] = e.digest.hex();
          j["timestamp"] = to_millis(e.timestamp);
        } else if constexpr (std::is_same_v<T, events::RevealSubmitted>) {
          j["stakeholder_id"] = e.stakeholder_id;
          j["value"] = e.value;
          j["mask"] = to_hex(e.mask.bytes);
          j["timestamp"] = to_millis(e.timestamp);
        } else if constexpr (std::is_same_v<T, events::OpeningRejected>) {
          j["stakeholder_id"] = e.stakeholder_id;
          j["reason"] = e.reason;
          j["timestamp"] = to_millis(e.timestamp);
        } else if constexpr (std::is_same_v<T, events::Completed>) {
          j["outcome"] = e.outcome;
        } else if constexpr (std::is_same_v<T, events::Aborted>) {
          j["reason"] = e.reason;
          j["successor_hint"] = detail::opt_json(
              e.successor_hint, [](const std::string& s) { return s; });
          j["timestamp"] = to_millis(e.timestamp);
        }
      },
      event);
  return j;
}

inline ordered_json record_to_json(const TranscriptRecord& r) {
  ordered_json j;
  j["seq"] = r.seq;
  j["prev_hash"] = to_hex(r.prev_hash);
  j["event"] = event_to_json(r.event);
  j["record_hash"] = to_hex(r.record_hash);
  return j;
}

inline std::string record_to_line(const TranscriptRecord& r) {
  return record_to_json(r).dump() + "\n";
}

inline std::string serialize_transcript(const Transcript& t) {
  std::string out;
  for (const auto& r : t.records()) out += record_to_line(r);
  return out;
}

namespace detail {

inline void require(bool cond, const std::string& what) {
  if (!cond) throw Error(ErrorCode::kEncoding, what);
}

inline void require_keys(const nlohmann::json& j,
                         std::initializer_list<std::string_view> keys,
                         std::string_view where) {
  require(j.is_object(), std::string(where) + " is not an object");
  require(j.size() == keys.size(),
          std::string(where) + " has unexpected fields");
  for (auto k : keys) {
    require(j.contains(k),
            std::string(where) + " lacks field '" + std::string(k) + "'");
  }
}

inline std::uint64_t get_u64(const nlohmann::json& j, std::string_view key) {
  const auto& v = j.at(key);
  require(v.is_number_unsigned() ||
              (v.is_number_integer() && v.get<std::int64_t>() >= 0 &&
               !v.is_number_float()),
          "field '" + std::string(key) + "' is not an unsigned integer");
  return v.get<std::uint64_t>();
}

inline Timestamp get_ts(const nlohmann::json& j, std::string_view key) {
  const auto& v = j.at(key);
  require(v.is_number_integer(),
          "field '" + std::string(key) + "' is not an integer timestamp");
  if (v.is_number_unsigned()) {
    require(v.get<std::uint64_t>() <= static_cast<std::uint64_t>(INT64_MAX),
            "timestamp out of range");
  }
  return timestamp_from_millis(v.get<std::int64_t>());
}

inline std::string get_str(const nlohmann::json& j, std::string_view key) {
  const auto& v = j.at(key);
  require(v.is_string(), "field '" + std::string(key) + "' is not a string");
  return v.get<std::string>();
}

inline std::vector<std::string> get_str_list(const nlohmann::json& v,
                                             std::string_view key) {
  require(v.is_array(), "field '" + std::string(key) + "' is not an array");
  std::vector<std::string> out;
  out.reserve(v.size());
  for (const auto& e : v) {
    require(e.is_string(),
            "field '" + std::string(key) + "' holds a non-string");
    out.push_back(e.get<std::string>());
  }
  return out;
}

template <std::size_t N>
std::array<std::uint8_t, N> get_hex(const nlohmann::json& j,
                                    std::string_view key) {
  auto s = get_str(j, key);
  auto bytes = from_hex<N>(s);
  require(bytes.has_value(),
          "field '" + std::string(key) + "' is not " + std::to_string(2 * N) +
              " lowercase hex digits");
  return *bytes;
}

template <typename F>
auto get_opt(const nlohmann::json& j, std::string_view key, F&& f)
    -> std::optional<decltype(f(j.at(key)))> {
  const auto& v = j.at(key);
  if (v.is_null()) return std::nullopt;
  return f(v);
}

inline DrawSpec spec_from_json(const nlohmann::json& j) {
  require_keys(j,
               {"session_id", "modulus", "roster", "candidates", "metadata",
                "commit_deadline", "reveal_deadline", "predecessor"},
               "spec");
  DrawSpec s;
  s.session_id = get_str(j, "session_id");
  try {
    s.modulus = Modulus(get_u64(j, "modulus"));
  } catch (const Error& e) {
    throw Error(ErrorCode::kEncoding, e.what());
  }
  s.roster = get_str_list(j.at("roster"), "roster");
  s.candidates = get_opt(j, "candidates", [](const nlohmann::json& v) {
    return get_str_list(v, "candidates");
  });
  s.metadata = get_str(j, "metadata");
  auto ts_of = [](const nlohmann::json& v) {
    nlohmann::json wrap{{"t", v}};
    return get_ts(wrap, "t");
  };
  s.commit_deadline = get_opt(j, "commit_deadline", ts_of);
  s.reveal_deadline = get_opt(j, "reveal_deadline", ts_of);
  s.predecessor = get_opt(j, "predecessor", [](const nlohmann::json& v) {
    require(v.is_string(), "field 'predecessor' is not a string");
    return v.get<std::string>();
  });
  return s;
}

}  // namespace detail

inline Event event_from_json(const nlohmann::json& j) {
  using namespace detail;
  require(j.is_object() && j.contains("type") && j.at("type").is_string(),
          "event lacks a type");
  const auto type = j.at("type").get<std::string>();
  if (type == "CeremonyCreated") {
    require_keys(j, {"type", "spec"}, "event");
    return events::CeremonyCreated{
        std::make_shared<const DrawSpec>(spec_from_json(j.at("spec")))};
  }
  if (type == "CommitmentSubmitted") {
    require_keys(j, {"type", "stakeholder_id", "digest", "timestamp"},
                 "event");
    return events::CommitmentSubmitted{
        get_str(j, "stakeholder_id"),
        CommitmentDigest{get_hex<32>(j, "digest")}, get_ts(j, "timestamp")};
  }
  if (type == "RevealSubmitted") {
    require_keys(j, {"type", "stakeholder_id", "value", "mask", "timestamp"},
                 "event");
    return events::RevealSubmitted{get_str(j, "stakeholder_id"),
                                   get_u64(j, "value"),
                                   Mask{get_hex<32>(j, "mask")},
                                   get_ts(j, "timestamp")};
  }
  if (type == "OpeningRejected") {
    require_keys(j, {"type", "stakeholder_id", "reason", "timestamp"},
                 "event");
    return events::OpeningRejected{get_str(j, "stakeholder_id"),
                                   get_str(j, "reason"),
                                   get_ts(j, "timestamp")};
  }
  if (type == "Completed") {
    require_keys(j, {"type", "outcome"}, "event");
    return events::Completed{get_u64(j, "outcome")};
  }
  if (type == "Aborted") {
    require_keys(j, {"type", "reason", "successor_hint", "timestamp"},
                 "event");
    return events::Aborted{
        get_str(j, "reason"),
        get_opt(j, "successor_hint",
                [](const nlohmann::json& v) {
                  require(v.is_string(), "successor_hint is not a string");
                  return v.get<std::string>();
                }),
        get_ts(j, "timestamp")};
  }
  throw Error(ErrorCode::kEncoding, "unknown event type '" + type + "'");
}

/// Parses one line (without its newline) exactly as written; hashes are
/// carried through, not recomputed.
inline TranscriptRecord record_from_line(std::string_view line) {
  using namespace detail;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kEncoding, std::string("malformed JSON: ") +
                                          e.what());
  }
  try {
    require_keys(j, {"seq", "prev_hash", "event", "record_hash"}, "record");
    TranscriptRecord r;
    r.seq = get_u64(j, "seq");
    r.prev_hash = get_hex<32>(j, "prev_hash");
    r.event = event_from_json(j.at("event"));
    r.record_hash = get_hex<32>(j, "record_hash");
    // Reject any line that does not round-trip to the same bytes.
    require(record_to_json(r).dump() == line, "record is not canonical JSON");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kEncoding, std::string("bad record: ") + e.what());
  }
}

}  // namespace fairdraw
