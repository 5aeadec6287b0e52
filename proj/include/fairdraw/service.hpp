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

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "json.hpp"

#include "fairdraw/ceremony.hpp"
#include "fairdraw/commitment.hpp"
#include "fairdraw/entropy.hpp"
#include "fairdraw/error.hpp"
#include "fairdraw/storage.hpp"
#include "fairdraw/transcript.hpp"
#include "fairdraw/verify.hpp"

namespace fairdraw::service {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;
using namespace std::chrono_literals;

struct ServiceConfig {
  // Empty means in-memory only.
  std::filesystem::path data_dir;
  std::chrono::milliseconds commit_window = 24h;
  std::chrono::milliseconds reveal_window = 24h;
  std::chrono::milliseconds sweep_interval = 1s;
  std::function<Timestamp()> clock;
};

inline Timestamp system_now() {
  return std::chrono::floor<std::chrono::milliseconds>(
      std::chrono::system_clock::now());
}

inline std::string random_hex(std::size_t octets) {
  std::vector<std::uint8_t> buf(octets);
  secure_random_bytes(buf);
  return to_hex(buf);
}

inline std::string token_fingerprint(std::string_view token) {
  return to_hex(Sha256().update(token).finish());
}

/// Session ids appear in URLs and directory names, so the service accepts
/// a conservative alphabet only.
inline bool is_url_safe_id(std::string_view id) {
  if (id.empty() || id.size() > 128) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
           (c >= '0' && c <= '9') || c == '-' || c == '_' || c == '.';
  });
}

struct Session {
  std::mutex mu;
  std::condition_variable changed;
  Transcript transcript;
  // Persisted bytes, served verbatim.
  std::string bytes;
  std::map<std::string, std::string> stakeholder_by_token;  // fingerprint -> id
  std::string admin_fingerprint;
  bool quarantined = false;
  std::string quarantine_reason;
  std::filesystem::path dir;

  bool terminal() const {
    const auto& st = transcript.state();
    if (!st) return true;
    return st->phase == Phase::kAborted ||
           (st->phase == Phase::kComplete &&
            transcript.replay().completion_recorded);
  }
};

struct TranscriptView {
  std::string bytes;
  bool quarantined = false;
  std::string quarantine_reason;
};

/// Hosts ceremonies. Each session's mutations are serialized by its own
/// mutex; the transcript file is appended and synced before any mutation is
/// acknowledged.
class CoordinationService {
 public:
  explicit CoordinationService(ServiceConfig config)
      : config_(std::move(config)) {
    if (!config_.clock) config_.clock = system_now;
    if (!config_.data_dir.empty()) {
      std::filesystem::create_directories(sessions_root());
      load_sessions();
    }
  }

  ~CoordinationService() { stop(); }

  CoordinationService(const CoordinationService&) = delete;
  CoordinationService& operator=(const CoordinationService&) = delete;

  Timestamp now() const { return config_.clock(); }

  // -- lifecycle ------------------------------------------------------------

  void start_sweeper() {
    std::lock_guard lk(sweeper_mu_);
    if (sweeper_.joinable()) return;
    sweeper_ = std::thread([this] {
      std::unique_lock lk(sweeper_mu_);
      while (!stopping_) {
        sweeper_cv_.wait_for(lk, config_.sweep_interval);
        if (stopping_) break;
        lk.unlock();
        sweep_deadlines();
        lk.lock();
      }
    });
  }

  void stop() {
    {
      std::lock_guard lk(sweeper_mu_);
      stopping_ = true;
    }
    sweeper_cv_.notify_all();
    for (auto& s : all_sessions()) {
      std::lock_guard lk(s->mu);
      s->changed.notify_all();
    }
    if (sweeper_.joinable()) sweeper_.join();
  }

  bool stopping() const { return stopping_; }

  // Aborts every session whose deadline has passed.
  void sweep_deadlines() {
    const auto t = now();
    for (auto& s : all_sessions()) {
      std::lock_guard lk(s->mu);
      expire_if_due(*s, t);
    }
  }

  // -- operations -----------------------------------------------------------

  ordered_json create(const json& body) {
    DrawSpec spec = spec_from_request(body);
    std::vector<std::string> tokens;
    tokens.reserve(spec.roster.size());
    for (std::size_t i = 0; i < spec.roster.size(); ++i) {
      tokens.push_back(random_hex(32));
    }
    const std::string admin_token = random_hex(32);

    auto session = std::make_shared<Session>();
    for (std::size_t i = 0; i < spec.roster.size(); ++i) {
      session->stakeholder_by_token.emplace(token_fingerprint(tokens[i]),
                                            spec.roster[i]);
    }
    session->admin_fingerprint = token_fingerprint(admin_token);

    const std::string id = spec.session_id;
    auto spec_ptr = std::make_shared<const DrawSpec>(std::move(spec));
    {
      std::lock_guard lk(registry_mu_);
      FAIRDRAW_ENFORCE(!sessions_.contains(id), ErrorCode::kAlreadyExists,
                       "session '" + id + "' already exists");
      if (spec_ptr->predecessor) check_predecessor(*spec_ptr->predecessor);
      session->transcript =
          append_record(Transcript{}, events::CeremonyCreated{spec_ptr});
      session->bytes = record_to_line(session->transcript.records().front());
      if (!config_.data_dir.empty()) persist_new_session(*session, id);
      sessions_.emplace(id, session);
      if (spec_ptr->predecessor) succeeded_.insert(*spec_ptr->predecessor);
    }

    ordered_json out;
    out["session_id"] = id;
    ordered_json tok = ordered_json::object();
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      tok[spec_ptr->roster[i]] = tokens[i];
    }
    out["tokens"] = std::move(tok);
    out["admin_token"] = admin_token;
    {
      std::lock_guard lk(session->mu);
      out["state"] = snapshot(*session, id);
    }
    return out;
  }

  ordered_json submit_commitment(const std::string& session_id,
                                 std::string_view token, const json& body) {
    auto s = find(session_id);
    std::lock_guard lk(s->mu);
    const auto who = authenticate(*s, token);
    check_writable(*s);
    const auto t = now();
    reject_if_expired(*s, t);
    const auto digest = detail::get_hex<32>(body_object(body), "digest");
    append(*s, events::CommitmentSubmitted{who, CommitmentDigest{digest}, t});
    return snapshot(*s, session_id);
  }

  ordered_json submit_reveal(const std::string& session_id,
                             std::string_view token, const json& body) {
    auto s = find(session_id);
    std::lock_guard lk(s->mu);
    const auto who = authenticate(*s, token);
    check_writable(*s);
    const auto t = now();
    reject_if_expired(*s, t);
    const auto& b = body_object(body);
    const auto value = detail::get_u64(b, "value");
    const auto mask = detail::get_hex<32>(b, "mask");
    try {
      append(*s, events::RevealSubmitted{who, value, Mask{mask}, t});
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kInvalidOpening) {
        // A failed opening is evidence and goes on the record.
        append(*s, events::OpeningRejected{who, e.what(), t});
      }
      throw;
    }
    const auto& st = *s->transcript.state();
    if (st.phase == Phase::kComplete) {
      append(*s, events::Completed{st.outcome->value()});
    }
    return snapshot(*s, session_id);
  }

  ordered_json abort(const std::string& session_id, std::string_view token,
                     const json& body) {
    auto s = find(session_id);
    std::lock_guard lk(s->mu);
    const bool admin = !token.empty() &&
                       token_fingerprint(token) == s->admin_fingerprint;
    if (!admin) authenticate(*s, token);
    check_writable(*s);
    const auto& b = body_object(body);
    FAIRDRAW_ENFORCE(b.contains("reason") && b.at("reason").is_string() &&
                         !b.at("reason").get<std::string>().empty(),
                     ErrorCode::kConfiguration, "abort needs a reason");
    std::optional<std::string> hint;
    if (b.contains("successor_hint") && !b.at("successor_hint").is_null()) {
      FAIRDRAW_ENFORCE(b.at("successor_hint").is_string(),
                       ErrorCode::kConfiguration,
                       "successor_hint must be a string");
      hint = b.at("successor_hint").get<std::string>();
    }
    append(*s, events::Aborted{b.at("reason").get<std::string>(), hint, now()});
    return snapshot(*s, session_id);
  }

  ordered_json state(const std::string& session_id) {
    auto s = find(session_id);
    std::lock_guard lk(s->mu);
    if (!s->quarantined) expire_if_due(*s, now());
    return snapshot(*s, session_id);
  }

  TranscriptView transcript(const std::string& session_id) {
    auto s = find(session_id);
    std::lock_guard lk(s->mu);
    return {s->bytes, s->quarantined, s->quarantine_reason};
  }

  ordered_json whoami(const std::string& session_id, std::string_view token) {
    auto s = find(session_id);
    std::lock_guard lk(s->mu);
    ordered_json out;
    out["session_id"] = session_id;
    out["stakeholder_id"] = authenticate(*s, token);
    return out;
  }

  struct EventBatch {
    std::vector<std::string> lines;  // JSON records, no trailing newline
    std::uint64_t next_seq = 0;
    bool finished = false;           // no record will ever follow
  };

  /// Records from `from_seq` on, blocking up to `wait` for new ones.
  EventBatch events_from(const std::string& session_id, std::uint64_t from_seq,
                         std::chrono::milliseconds wait) {
    auto s = find(session_id);
    std::unique_lock lk(s->mu);
    s->changed.wait_for(lk, wait, [&] {
      return stopping_ || s->transcript.size() > from_seq || s->terminal() ||
             s->quarantined;
    });
    EventBatch batch;
    const auto& recs = s->transcript.records();
    for (auto i = from_seq; i < recs.size(); ++i) {
      auto line = record_to_line(recs[i]);
      line.pop_back();
      batch.lines.push_back(std::move(line));
    }
    batch.next_seq = std::max<std::uint64_t>(from_seq, recs.size());
    batch.finished = (s->terminal() || s->quarantined) &&
                     batch.next_seq >= recs.size();
    return batch;
  }

  std::vector<std::string> session_ids() {
    std::lock_guard lk(registry_mu_);
    std::vector<std::string> ids;
    for (const auto& [id, _] : sessions_) ids.push_back(id);
    return ids;
  }

 private:
  std::filesystem::path sessions_root() const {
    return config_.data_dir / "sessions";
  }

  std::shared_ptr<Session> find(const std::string& id) {
    std::lock_guard lk(registry_mu_);
    auto it = sessions_.find(id);
    FAIRDRAW_ENFORCE(it != sessions_.end(), ErrorCode::kNotFound,
                     "no session '" + id + "'");
    return it->second;
  }

  std::vector<std::shared_ptr<Session>> all_sessions() {
    std::lock_guard lk(registry_mu_);
    std::vector<std::shared_ptr<Session>> out;
    for (auto& [_, s] : sessions_) out.push_back(s);
    return out;
  }

  static const json& body_object(const json& body) {
    FAIRDRAW_ENFORCE(body.is_object(), ErrorCode::kEncoding,
                     "request body must be a JSON object");
    return body;
  }

  static std::string authenticate(const Session& s, std::string_view token) {
    FAIRDRAW_ENFORCE(!token.empty(), ErrorCode::kUnauthorized,
                     "missing bearer token");
    auto it = s.stakeholder_by_token.find(token_fingerprint(token));
    FAIRDRAW_ENFORCE(it != s.stakeholder_by_token.end(),
                     ErrorCode::kUnauthorized,
                     "token is not valid for this session");
    return it->second;
  }

  static void check_writable(const Session& s) {
    FAIRDRAW_ENFORCE(!s.quarantined, ErrorCode::kPhaseViolation,
                     "session is quarantined: " + s.quarantine_reason);
  }

  void append(Session& s, Event event) {
    auto next = append_record(s.transcript, std::move(event));
    auto line = record_to_line(next.records().back());
    if (!config_.data_dir.empty()) {
      storage::append_durably(s.dir / "transcript.jsonl", line);
    }
    s.transcript = std::move(next);
    s.bytes += line;
    s.changed.notify_all();
  }

  // Returns true if this call aborted the session.
  bool expire_if_due(Session& s, Timestamp t) {
    if (s.quarantined || !s.transcript.state()) return false;
    const auto& st = *s.transcript.state();
    const auto& spec = st.draw();
    std::optional<std::string> reason;
    if (st.phase == Phase::kCommit && spec.commit_deadline &&
        t > *spec.commit_deadline) {
      reason = "commit deadline expired with " +
               std::to_string(st.commitments.size()) + " of " +
               std::to_string(spec.roster.size()) + " commitments";
    } else if (st.phase == Phase::kReveal && spec.reveal_deadline &&
               t > *spec.reveal_deadline) {
      reason = "reveal deadline expired with " +
               std::to_string(st.reveals.size()) + " of " +
               std::to_string(spec.roster.size()) + " reveals";
    }
    if (!reason) return false;
    append(s, events::Aborted{*reason, std::nullopt, t});
    return true;
  }

  void reject_if_expired(Session& s, Timestamp t) {
    if (expire_if_due(s, t)) {
      throw Error(ErrorCode::kDeadlineExpired,
                  *s.transcript.state()->abort_reason);
    }
  }

  void check_predecessor(const std::string& pred) {
    auto it = sessions_.find(pred);
    FAIRDRAW_ENFORCE(it != sessions_.end(), ErrorCode::kConfiguration,
                     "predecessor '" + pred + "' is unknown");
    FAIRDRAW_ENFORCE(!succeeded_.contains(pred), ErrorCode::kConfiguration,
                     "predecessor '" + pred + "' already has a successor");
    std::lock_guard lk(it->second->mu);
    const auto& st = it->second->transcript.state();
    FAIRDRAW_ENFORCE(st && st->phase == Phase::kAborted,
                     ErrorCode::kConfiguration,
                     "predecessor '" + pred + "' was not aborted");
  }

  DrawSpec spec_from_request(const json& body) {
    const auto& b = body_object(body);
    static const std::set<std::string> kAllowed = {
        "session_id",      "modulus",         "roster",     "candidates",
        "metadata",        "commit_deadline", "reveal_deadline",
        "predecessor"};
    for (const auto& [k, _] : b.items()) {
      FAIRDRAW_ENFORCE(kAllowed.contains(k), ErrorCode::kConfiguration,
                       "unknown field '" + k + "'");
    }
    DrawSpec spec;
    try {
      if (b.contains("session_id") && !b.at("session_id").is_null()) {
        spec.session_id = detail::get_str(b, "session_id");
        FAIRDRAW_ENFORCE(is_url_safe_id(spec.session_id),
                         ErrorCode::kConfiguration,
                         "session_id must be 1-128 characters of "
                         "[A-Za-z0-9._-]");
      } else {
        spec.session_id = random_hex(16);
      }
      FAIRDRAW_ENFORCE(b.contains("modulus"), ErrorCode::kConfiguration,
                       "modulus is required");
      spec.modulus = Modulus(detail::get_u64(b, "modulus"));
      FAIRDRAW_ENFORCE(b.contains("roster"), ErrorCode::kConfiguration,
                       "roster is required");
      spec.roster = detail::get_str_list(b.at("roster"), "roster");
      if (b.contains("candidates") && !b.at("candidates").is_null()) {
        spec.candidates = detail::get_str_list(b.at("candidates"), "candidates");
      }
      if (b.contains("metadata")) spec.metadata = detail::get_str(b, "metadata");
      const auto t = now();
      spec.commit_deadline =
          b.contains("commit_deadline") && !b.at("commit_deadline").is_null()
              ? detail::get_ts(b, "commit_deadline")
              : t + config_.commit_window;
      spec.reveal_deadline =
          b.contains("reveal_deadline") && !b.at("reveal_deadline").is_null()
              ? detail::get_ts(b, "reveal_deadline")
              : *spec.commit_deadline + config_.reveal_window;
      if (b.contains("predecessor") && !b.at("predecessor").is_null()) {
        spec.predecessor = detail::get_str(b, "predecessor");
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kConfiguration) throw;
      throw Error(ErrorCode::kConfiguration, e.what());
    }
    validate_spec(spec);
    return spec;
  }

  void persist_new_session(Session& s, const std::string& id) {
    s.dir = sessions_root() / to_hex(std::span<const std::uint8_t>(
                                  reinterpret_cast<const std::uint8_t*>(id.data()),
                                  id.size()));
    std::filesystem::create_directories(s.dir);
    ordered_json tok;
    tok["admin"] = s.admin_fingerprint;
    ordered_json st = ordered_json::object();
    for (const auto& [fp, who] : s.stakeholder_by_token) st[fp] = who;
    tok["stakeholders"] = std::move(st);
    storage::write_atomically(s.dir / "tokens.json", tok.dump(), 0600);
    storage::append_durably(s.dir / "transcript.jsonl", s.bytes);
  }

  void load_sessions() {
    for (const auto& entry :
         std::filesystem::directory_iterator(sessions_root())) {
      if (!entry.is_directory()) continue;
      auto s = std::make_shared<Session>();
      s->dir = entry.path();
      std::string id = decode_dir_name(entry.path().filename().string());
      if (id.empty()) continue;
      auto quarantine = [&](std::string why) {
        if (!s->quarantined) {
          s->quarantined = true;
          s->quarantine_reason = std::move(why);
        }
      };
      try {
        auto tok = json::parse(storage::read_file(s->dir / "tokens.json"));
        s->admin_fingerprint = tok.at("admin").get<std::string>();
        for (const auto& [fp, who] : tok.at("stakeholders").items()) {
          s->stakeholder_by_token.emplace(fp, who.get<std::string>());
        }
      } catch (const std::exception& e) {
        quarantine(std::string("token file unreadable: ") + e.what());
      }
      try {
        s->bytes = storage::read_file(s->dir / "transcript.jsonl");
      } catch (const Error& e) {
        quarantine(e.what());
      }
      auto report = verify_transcript(s->bytes);
      if (!report.all_ok()) {
        quarantine("transcript failed verification at seq " +
                   std::to_string(report.first_failing_seq().value_or(0)) +
                   ": " + report.findings.front().description);
      }
      s->transcript = load_transcript(s->bytes, /*strict=*/false);
      if (s->transcript.state() &&
          s->transcript.state()->draw().session_id != id) {
        quarantine("transcript belongs to a different session");
      }
      // A final reveal persisted without its Completed record.
      if (!s->quarantined && s->transcript.state() &&
          s->transcript.state()->phase == Phase::kComplete &&
          !s->transcript.replay().completion_recorded) {
        append(*s, events::Completed{s->transcript.state()->outcome->value()});
      }
      if (s->transcript.state() && s->transcript.state()->draw().predecessor) {
        succeeded_.insert(*s->transcript.state()->draw().predecessor);
      }
      sessions_.emplace(id, std::move(s));
    }
  }

  static std::string decode_dir_name(const std::string& name) {
    if (name.size() % 2 != 0) return {};
    std::string out;
    for (std::size_t i = 0; i < name.size(); i += 2) {
      auto byte = from_hex<1>(std::string_view(name).substr(i, 2));
      if (!byte) return {};
      out.push_back(static_cast<char>((*byte)[0]));
    }
    return out;
  }

  ordered_json snapshot(const Session& s, const std::string& id) const {
    ordered_json out;
    out["session_id"] = id;
    out["quarantined"] = s.quarantined;
    out["quarantine_reason"] = s.quarantined
                                   ? ordered_json(s.quarantine_reason)
                                   : ordered_json(nullptr);
    out["record_count"] = s.transcript.size();
    const auto& maybe = s.transcript.state();
    if (!maybe) {
      out["phase"] = nullptr;
      return out;
    }
    const auto& st = *maybe;
    const auto& spec = st.draw();
    out["phase"] = std::string(to_string(st.phase));
    out["modulus"] = spec.modulus.value();
    out["metadata"] = spec.metadata;
    out["predecessor"] =
        spec.predecessor ? ordered_json(*spec.predecessor) : ordered_json();
    out["commit_deadline"] = spec.commit_deadline
                                 ? ordered_json(to_millis(*spec.commit_deadline))
                                 : ordered_json();
    out["reveal_deadline"] = spec.reveal_deadline
                                 ? ordered_json(to_millis(*spec.reveal_deadline))
                                 : ordered_json();

    std::map<std::string, std::uint64_t> rejected;
    for (const auto& r : s.transcript.records()) {
      if (auto* e = std::get_if<events::OpeningRejected>(&r.event)) {
        ++rejected[e->stakeholder_id];
      }
    }

    const bool values_public =
        st.phase == Phase::kReveal || st.phase == Phase::kComplete ||
        (st.phase == Phase::kAborted &&
         st.commitments.size() == spec.roster.size());
    auto list = ordered_json::array();
    std::vector<ContributionValue> revealed;
    for (const auto& who : spec.roster) {
      ordered_json e;
      e["id"] = who;
      auto c = st.commitments.find(who);
      auto r = st.reveals.find(who);
      e["committed"] = c != st.commitments.end();
      e["digest"] = c != st.commitments.end() ? ordered_json(c->second.hex())
                                              : ordered_json();
      e["revealed"] = r != st.reveals.end();
      if (values_public && r != st.reveals.end()) {
        e["value"] = r->second.value.value();
        e["mask"] = to_hex(r->second.mask.bytes);
        revealed.push_back(r->second.value);
      } else {
        e["value"] = nullptr;
        e["mask"] = nullptr;
      }
      e["rejected_openings"] = rejected[who];
      list.push_back(std::move(e));
    }
    out["stakeholders"] = std::move(list);
    out["committed_count"] = st.commitments.size();
    out["revealed_count"] = st.reveals.size();
    out["partial_sum"] =
        revealed.empty()
            ? ordered_json()
            : ordered_json(mod_add(revealed, spec.modulus).value());
    const auto outcome = outcome_of(st);
    out["outcome"] = outcome ? ordered_json(outcome->value()) : ordered_json();
    out["candidate"] = outcome && spec.candidates
                           ? ordered_json(select_candidate(*outcome,
                                                           *spec.candidates))
                           : ordered_json();
    out["abort_reason"] =
        st.abort_reason ? ordered_json(*st.abort_reason) : ordered_json();
    return out;
  }

  ServiceConfig config_;
  std::mutex registry_mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::set<std::string> succeeded_;

  std::mutex sweeper_mu_;
  std::condition_variable sweeper_cv_;
  std::thread sweeper_;
  std::atomic<bool> stopping_{false};
};

}  // namespace fairdraw::service
