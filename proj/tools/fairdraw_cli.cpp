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

// fairdraw: stakeholder and auditor client.
//
// Exit codes: 0 ok, 1 verification failure, 2 usage error,
// 3 protocol or phase error (including an unreachable server).

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fairdraw/commitment.hpp"
#include "fairdraw/entropy.hpp"
#include "fairdraw/http_client.hpp"
#include "fairdraw/secret_store.hpp"
#include "fairdraw/storage.hpp"
#include "fairdraw/uniformity.hpp"
#include "fairdraw/verify.hpp"

namespace {

using fairdraw::client::CoordinatorClient;
using fairdraw::client::RequestError;
using json = nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitProtocol = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GlobalOptions {
  std::string server = "http://127.0.0.1:8080";
  std::string session;
  std::string token;
  std::string output = "text";
  std::string secrets_dir;
};

bool json_output(const GlobalOptions& g) { return g.output == "json"; }

void require_session(const GlobalOptions& g, bool token_too) {
  if (g.session.empty()) throw UsageError("--session is required");
  if (token_too && g.token.empty()) throw UsageError("--token is required");
}

fairdraw::SecretStore secret_store(const GlobalOptions& g) {
  return fairdraw::SecretStore(g.secrets_dir.empty()
                                   ? fairdraw::SecretStore::default_dir()
                                   : std::filesystem::path(g.secrets_dir));
}

std::string describe_record(const json& rec) {
  const auto& ev = rec.at("event");
  const auto type = ev.at("type").get<std::string>();
  std::string line = "#" + std::to_string(rec.at("seq").get<std::uint64_t>()) +
                     " " + type;
  if (type == "CeremonyCreated") {
    const auto& spec = ev.at("spec");
    line += " session=" + spec.at("session_id").get<std::string>() +
            " m=" + std::to_string(spec.at("modulus").get<std::uint64_t>()) +
            " k=" + std::to_string(spec.at("roster").size());
  } else if (type == "CommitmentSubmitted") {
    line += " " + ev.at("stakeholder_id").get<std::string>() + " digest=" +
            ev.at("digest").get<std::string>();
  } else if (type == "RevealSubmitted") {
    line += " " + ev.at("stakeholder_id").get<std::string>() + " value=" +
            std::to_string(ev.at("value").get<std::uint64_t>());
  } else if (type == "OpeningRejected") {
    line += " " + ev.at("stakeholder_id").get<std::string>() + " reason=" +
            ev.at("reason").get<std::string>();
  } else if (type == "Completed") {
    line += " outcome=" + std::to_string(ev.at("outcome").get<std::uint64_t>());
  } else if (type == "Aborted") {
    line += " reason=" + ev.at("reason").get<std::string>();
  }
  return line;
}

void print_state(const GlobalOptions& g, const json& st) {
  if (json_output(g)) {
    std::cout << st.dump(2) << "\n";
    return;
  }
  std::cout << "session " << st.at("session_id").get<std::string>() << "\n";
  if (st.value("quarantined", false)) {
    std::cout << "QUARANTINED: " << st.at("quarantine_reason").get<std::string>()
              << "\n";
  }
  if (st.at("phase").is_null()) return;
  std::cout << "phase " << st.at("phase").get<std::string>() << "  modulus "
            << st.at("modulus").get<std::uint64_t>() << "\n";
  for (const auto& s : st.at("stakeholders")) {
    std::string status = s.at("revealed").get<bool>()    ? "revealed"
                         : s.at("committed").get<bool>() ? "committed"
                                                         : "waiting";
    std::cout << "  " << s.at("id").get<std::string>() << "  " << status;
    if (!s.at("value").is_null()) {
      std::cout << "  value " << s.at("value").get<std::uint64_t>();
    }
    if (s.at("rejected_openings").get<std::uint64_t>() > 0) {
      std::cout << "  rejected " << s.at("rejected_openings").get<std::uint64_t>();
    }
    std::cout << "\n";
  }
  if (!st.at("outcome").is_null()) {
    std::cout << "outcome " << st.at("outcome").get<std::uint64_t>() << "\n";
  }
  if (!st.at("candidate").is_null()) {
    std::cout << "candidate " << st.at("candidate").get<std::string>() << "\n";
  }
  if (!st.at("abort_reason").is_null()) {
    std::cout << "aborted: " << st.at("abort_reason").get<std::string>() << "\n";
  }
}

std::string resolve_stakeholder(CoordinatorClient& client,
                                const GlobalOptions& g,
                                const std::string& explicit_id) {
  if (!explicit_id.empty()) return explicit_id;
  return client.whoami(g.session, g.token).at("stakeholder_id").get<std::string>();
}

// -- create -----------------------------------------------------------------

struct CreateOptions {
  std::uint64_t modulus = 0;
  std::vector<std::string> roster;
  std::string metadata;
  std::string candidates_file;
  std::string predecessor;
  std::optional<std::int64_t> commit_deadline;
  std::optional<std::int64_t> reveal_deadline;
};

int run_create(const GlobalOptions& g, const CreateOptions& o) {
  json spec;
  if (!g.session.empty()) spec["session_id"] = g.session;
  spec["modulus"] = o.modulus;
  spec["roster"] = o.roster;
  spec["metadata"] = o.metadata;
  if (!o.candidates_file.empty()) {
    std::vector<std::string> labels;
    std::istringstream in(fairdraw::storage::read_file(o.candidates_file));
    for (std::string line; std::getline(in, line);) labels.push_back(line);
    spec["candidates"] = labels;
  }
  if (!o.predecessor.empty()) spec["predecessor"] = o.predecessor;
  if (o.commit_deadline) spec["commit_deadline"] = *o.commit_deadline;
  if (o.reveal_deadline) spec["reveal_deadline"] = *o.reveal_deadline;

  CoordinatorClient client(g.server);
  auto created = client.create(spec);
  if (json_output(g)) {
    std::cout << created.dump(2) << "\n";
  } else {
    std::cout << "session " << created.at("session_id").get<std::string>()
              << "\n";
    std::cout << "admin-token " << created.at("admin_token").get<std::string>()
              << "\n";
    for (const auto& id : o.roster) {
      std::cout << "token " << id << " "
                << created.at("tokens").at(id).get<std::string>() << "\n";
    }
  }
  return kExitOk;
}

// -- commit -----------------------------------------------------------------

struct CommitOptions {
  std::optional<std::uint64_t> value;
  bool random = false;
  bool dice = false;
  std::string stakeholder;
};

// Reads one decimal digit per prompt; the modulus must be a power of ten so
// that every digit string maps to exactly one value.
std::uint64_t read_dice(std::uint64_t modulus) {
  std::uint64_t digits = 0;
  std::uint64_t span = 1;
  while (span < modulus) {
    span *= 10;
    ++digits;
  }
  if (span != modulus) {
    throw UsageError("--dice needs a power-of-ten modulus, session has " +
                     std::to_string(modulus));
  }
  std::uint64_t value = 0;
  for (std::uint64_t i = 0; i < digits; ++i) {
    for (;;) {
      std::cerr << "roll " << (i + 1) << " of " << digits
                << ", enter the 10-sided die face (0-9): " << std::flush;
      std::string line;
      if (!std::getline(std::cin, line)) {
        throw UsageError("unexpected end of input while reading dice");
      }
      line.erase(std::remove_if(line.begin(), line.end(), ::isspace),
                 line.end());
      if (line.size() == 1 && line[0] >= '0' && line[0] <= '9') {
        value = value * 10 + static_cast<std::uint64_t>(line[0] - '0');
        break;
      }
      std::cerr << "not a single digit, try again\n";
    }
  }
  return value;
}

int run_commit(const GlobalOptions& g, const CommitOptions& o) {
  require_session(g, true);
  const int sources = (o.value ? 1 : 0) + (o.random ? 1 : 0) + (o.dice ? 1 : 0);
  if (sources != 1) {
    throw UsageError("choose exactly one of --value, --random, --dice");
  }

  CoordinatorClient client(g.server);
  const auto who = resolve_stakeholder(client, g, o.stakeholder);
  auto store = secret_store(g);
  if (store.has_secret(g.session, who) || store.has_receipt(g.session, who)) {
    throw ProtocolError("already committed in session " + g.session +
                        " (local secret exists in " + store.dir().string() +
                        ")");
  }
  const auto st = client.state(g.session);
  if (st.at("phase") != "Commit") {
    throw ProtocolError("PhaseViolation: commitments are only accepted in "
                        "Commit phase (phase is " +
                        st.at("phase").get<std::string>() + ")");
  }
  const fairdraw::Modulus m(st.at("modulus").get<std::uint64_t>());

  std::uint64_t raw = 0;
  if (o.value) {
    raw = *o.value;
    if (raw >= m.value()) {
      throw UsageError("value " + std::to_string(raw) +
                       " is out of range: must be below " +
                       std::to_string(m.value()));
    }
  } else if (o.random) {
    raw = fairdraw::secure_uniform(m).value();
  } else {
    raw = read_dice(m.value());
  }

  const fairdraw::ContributionValue value(raw, m);
  const auto mask = fairdraw::new_mask();
  const auto digest = fairdraw::commit(g.session, who, value, mask);

  fairdraw::LocalSecret secret{g.session, who, m.value(), raw, mask,
                               digest.hex()};
  // Written before submission so a crash cannot orphan a commitment.
  store.save(secret);
  json snap;
  try {
    snap = client.commit(g.session, g.token, digest.hex());
  } catch (const RequestError& e) {
    if (e.status() != 0) store.discard(g.session, who);
    throw;
  }
  if (json_output(g)) {
    json out{{"stakeholder_id", who},
             {"digest", digest.hex()},
             {"state", snap}};
    std::cout << out.dump(2) << "\n";
  } else {
    std::cout << "committed " << who << " digest " << digest.hex() << "\n";
    std::cout << "phase " << snap.at("phase").get<std::string>() << "\n";
  }
  return kExitOk;
}

// -- reveal -----------------------------------------------------------------

struct RevealOptions {
  std::string stakeholder;
  bool retain = false;
};

void print_reveal_result(const GlobalOptions& g, const json& snap,
                         const std::string& who, bool already) {
  if (json_output(g)) {
    std::cout << json{{"stakeholder_id", who},
                      {"already_revealed", already},
                      {"state", snap}}
                     .dump(2)
              << "\n";
    return;
  }
  std::cout << (already ? "already revealed " : "revealed ") << who << "\n";
  if (!snap.at("outcome").is_null()) {
    std::cout << "outcome " << snap.at("outcome").get<std::uint64_t>() << "\n";
  } else {
    std::cout << "phase " << snap.at("phase").get<std::string>() << ", "
              << snap.at("revealed_count").get<std::uint64_t>() << " of "
              << snap.at("stakeholders").size() << " revealed\n";
  }
}

int run_reveal(const GlobalOptions& g, const RevealOptions& o) {
  require_session(g, true);
  CoordinatorClient client(g.server);
  const auto who = resolve_stakeholder(client, g, o.stakeholder);
  auto store = secret_store(g);
  auto secret = store.load(g.session, who);
  if (!secret) {
    if (store.has_receipt(g.session, who)) {
      print_reveal_result(g, client.state(g.session), who, true);
      return kExitOk;
    }
    throw UsageError("no local secret for stakeholder '" + who +
                     "' in session " + g.session + " under " +
                     store.dir().string() +
                     "; run 'commit' first or point --secrets-dir at the "
                     "directory used when committing");
  }

  // Nothing secret leaves this process unless the server is in Reveal.
  auto st = client.state(g.session);
  for (const auto& s : st.at("stakeholders")) {
    if (s.at("id") == who && s.at("revealed").get<bool>()) {
      store.mark_revealed(*secret, o.retain);
      print_reveal_result(g, st, who, true);
      return kExitOk;
    }
  }
  if (st.at("phase") != "Reveal") {
    throw ProtocolError("PhaseViolation: reveals are only accepted in Reveal "
                        "phase (phase is " +
                        st.at("phase").get<std::string>() + ")");
  }
  json snap;
  try {
    snap = client.reveal(g.session, g.token, secret->value,
                         fairdraw::to_hex(secret->mask.bytes));
  } catch (const RequestError& e) {
    if (e.code() == "DuplicateReveal") {
      store.mark_revealed(*secret, o.retain);
      print_reveal_result(g, client.state(g.session), who, true);
      return kExitOk;
    }
    throw;
  }
  store.mark_revealed(*secret, o.retain);
  print_reveal_result(g, snap, who, false);
  return kExitOk;
}

// -- status / watch -----------------------------------------------------------

int run_status(const GlobalOptions& g) {
  require_session(g, false);
  CoordinatorClient client(g.server);
  print_state(g, client.state(g.session));
  return kExitOk;
}

struct WatchOptions {
  std::uint64_t from_seq = 0;
  int max_retries = 20;
};

int run_watch(const GlobalOptions& g, const WatchOptions& o) {
  require_session(g, false);
  CoordinatorClient client(g.server);
  std::uint64_t next = o.from_seq;
  std::optional<std::string> terminal;
  int exit_code = kExitOk;
  int failures = 0;
  while (!terminal) {
    try {
      next = client.stream_events(g.session, next, [&](const json& rec) {
        if (json_output(g)) {
          std::cout << rec.dump() << "\n";
        } else {
          std::cout << describe_record(rec) << "\n";
        }
        std::cout.flush();
        const auto type = rec.at("event").at("type").get<std::string>();
        if (type == "Completed") {
          terminal = "outcome " +
                     std::to_string(
                         rec.at("event").at("outcome").get<std::uint64_t>());
        } else if (type == "Aborted") {
          terminal = "aborted: " +
                     rec.at("event").at("reason").get<std::string>();
          exit_code = kExitProtocol;
        }
        return !terminal;
      });
      failures = 0;
      if (!terminal) {
        // The server closed a stream that never reached a terminal event
        // (quarantined session or shutdown). Check before retrying.
        auto st = client.state(g.session);
        if (st.value("quarantined", false)) {
          throw ProtocolError("session is quarantined");
        }
      }
    } catch (const RequestError& e) {
      if (e.status() != 0 || ++failures > o.max_retries) throw;
      std::cerr << "connection lost, resuming from seq " << next << "\n";
      std::this_thread::sleep_for(std::chrono::milliseconds(200 * failures));
    }
  }
  if (!json_output(g)) std::cout << *terminal << "\n";
  return exit_code;
}

// -- verify / audit ---------------------------------------------------------

int run_verify(const GlobalOptions& g, const std::string& file) {
  std::string bytes;
  try {
    bytes = fairdraw::storage::read_file(file);
  } catch (const fairdraw::Error& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  }
  const auto report = fairdraw::verify_transcript(bytes);
  if (json_output(g)) {
    std::cout << fairdraw::report_to_json(report).dump(2) << "\n";
  } else {
    for (const auto& f : report.findings) {
      std::cout << "seq " << f.seq << ": " << f.description << "\n";
    }
    std::cout << (report.all_ok() ? "OK" : "FAILED")
              << " chain=" << report.chain_ok
              << " phase_order=" << report.phase_order_ok
              << " openings=" << report.openings_ok
              << " outcome=" << report.outcome_ok << "\n";
    if (report.recomputed_outcome) {
      std::cout << "recomputed outcome " << report.recomputed_outcome->value()
                << "\n";
    }
  }
  return report.all_ok() ? kExitOk : kExitVerifyFailed;
}

int run_audit(const GlobalOptions& g, const std::string& dir,
              std::uint64_t bins) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".jsonl") {
      files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<fairdraw::Transcript> transcripts;
  bool any_bad = false;
  for (const auto& f : files) {
    const auto bytes = fairdraw::storage::read_file(f);
    const auto report = fairdraw::verify_transcript(bytes);
    if (!report.all_ok()) {
      std::cerr << f.string() << ": verification failed\n";
      any_bad = true;
      continue;
    }
    auto t = fairdraw::load_transcript(bytes);
    if (t.state() && t.state()->phase == fairdraw::Phase::kComplete) {
      transcripts.push_back(std::move(t));
    }
  }
  if (any_bad) return kExitVerifyFailed;
  if (transcripts.empty()) throw UsageError("no completed transcripts in " + dir);
  const auto summary = fairdraw::audit_outcomes(transcripts, bins);
  if (json_output(g)) {
    std::cout << fairdraw::summary_to_json(summary).dump(2) << "\n";
  } else {
    std::cout << "ceremonies " << summary.total << "\n";
    std::cout << "counts";
    for (auto c : summary.counts) std::cout << " " << c;
    std::cout << "\nchi-square " << summary.statistic << " dof " << summary.dof
              << " p-value " << summary.p_value << "\n";
    if (summary.warning) std::cout << "warning: " << *summary.warning << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fairdraw: multi-stakeholder commit-reveal drawing client"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  if (const char* env = std::getenv("FAIRDRAW_SERVER")) g.server = env;
  app.add_option("--server", g.server, "Coordinator base URL");
  app.add_option("--session", g.session, "Ceremony session id");
  app.add_option("--token", g.token, "Stakeholder bearer token")
      ->envname("FAIRDRAW_TOKEN");
  app.add_option("--output", g.output, "Output format")
      ->check(CLI::IsMember({"text", "json"}));
  app.add_option("--secrets-dir", g.secrets_dir,
                 "Where commit secrets are kept between phases");

  CreateOptions create_opts;
  auto* create = app.add_subcommand("create", "Create a ceremony");
  create->add_option("--modulus,-m", create_opts.modulus, "Modulus m")
      ->required();
  create->add_option("--roster", create_opts.roster, "Stakeholder ids")
      ->required()
      ->delimiter(',');
  create->add_option("--metadata", create_opts.metadata, "Free text");
  create->add_option("--candidates-file", create_opts.candidates_file,
                     "One candidate label per line; count must equal m");
  create->add_option("--predecessor", create_opts.predecessor,
                     "Aborted session this draw replaces");
  create->add_option("--commit-deadline", create_opts.commit_deadline,
                     "Unix milliseconds");
  create->add_option("--reveal-deadline", create_opts.reveal_deadline,
                     "Unix milliseconds");

  CommitOptions commit_opts;
  auto* commit = app.add_subcommand("commit", "Commit to a contribution");
  commit->add_option("--value", commit_opts.value, "Contribution in [0, m)");
  commit->add_flag("--random", commit_opts.random,
                   "Draw the contribution from local secure entropy");
  commit->add_flag("--dice", commit_opts.dice,
                   "Enter 10-sided dice rolls one digit at a time");
  commit->add_option("--stakeholder", commit_opts.stakeholder,
                     "Stakeholder id (default: asked from the server)");

  RevealOptions reveal_opts;
  auto* reveal = app.add_subcommand("reveal", "Reveal a committed value");
  reveal->add_option("--stakeholder", reveal_opts.stakeholder,
                     "Stakeholder id (default: asked from the server)");
  reveal->add_flag("--retain-secret", reveal_opts.retain,
                   "Keep the local secret after revealing");

  auto* status = app.add_subcommand("status", "Show ceremony state");

  WatchOptions watch_opts;
  auto* watch = app.add_subcommand("watch", "Follow ceremony events live");
  watch->add_option("--from-seq", watch_opts.from_seq, "First seq to show");

  std::string verify_file;
  auto* verify = app.add_subcommand("verify", "Verify a transcript offline");
  verify->add_option("transcript", verify_file, "Transcript file")->required();

  std::string audit_dir;
  std::uint64_t audit_bins = 10;
  auto* audit =
      app.add_subcommand("audit", "Chi-square audit over many transcripts");
  audit->add_option("directory", audit_dir, "Directory of .jsonl transcripts")
      ->required();
  audit->add_option("--bins", audit_bins, "Number of equal bins (divides m)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*create) return run_create(g, create_opts);
    if (*commit) return run_commit(g, commit_opts);
    if (*reveal) return run_reveal(g, reveal_opts);
    if (*status) return run_status(g);
    if (*watch) return run_watch(g, watch_opts);
    if (*verify) return run_verify(g, verify_file);
    if (*audit) return run_audit(g, audit_dir, audit_bins);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const RequestError& e) {
    std::cerr << "error: " << e.code() << ": " << e.what() << "\n";
    return e.status() == 400 ? kExitUsage : kExitProtocol;
  } catch (const ProtocolError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitProtocol;
  } catch (const fairdraw::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == fairdraw::ErrorCode::kDomain ||
                   e.code() == fairdraw::ErrorCode::kOutOfRange
               ? kExitUsage
               : kExitProtocol;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitProtocol;
  }
  return kExitUsage;
}
