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

#include "fairdraw/service.hpp"

#include <atomic>
#include <fstream>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "gtest/gtest.h"

#include "fairdraw/http_server.hpp"
#include "fairdraw/verify.hpp"
#include "support/ceremony_driver.hpp"
#include "support/fixtures.hpp"
#include "support/temp_dir.hpp"

namespace fairdraw::service {
namespace {

using client::RequestError;
using testing::ScriptedCeremony;

// A controllable clock shared with the service.
struct FakeClock {
  std::atomic<std::int64_t> ms{1'700'000'000'000};
  Timestamp operator()() const { return timestamp_from_millis(ms.load()); }
};

class ServiceFixture : public ::testing::Test {
 protected:
  void SetUp() override { boot(); }
  void TearDown() override { shutdown(); }

  void boot() {
    ServiceConfig cfg;
    cfg.data_dir = dir_.path();
    cfg.sweep_interval = std::chrono::milliseconds(20);
    cfg.clock = [this] { return clock_(); };
    service_ = std::make_unique<CoordinationService>(cfg);
    frontend_ = std::make_unique<HttpFrontend>(*service_);
    port_ = frontend_->bind("127.0.0.1", 0);
    frontend_->start();
  }

  void shutdown() {
    if (frontend_) frontend_->stop();
    frontend_.reset();
    service_.reset();
  }

  void reboot() {
    shutdown();
    boot();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

  std::unique_ptr<ScriptedCeremony> reference(const std::string& id = "reference") {
    return std::make_unique<ScriptedCeremony>(url(), testing::reference_request(id));
  }

  static int status_of(const std::function<void()>& f, std::string* code = nullptr) {
    try {
      f();
    } catch (const RequestError& e) {
      if (code) *code = e.code();
      return e.status();
    }
    return 200;
  }

  testing::TempDir dir_;
  FakeClock clock_;
  std::unique_ptr<CoordinationService> service_;
  std::unique_ptr<HttpFrontend> frontend_;
  int port_ = 0;
};

TEST_F(ServiceFixture, CreateRejectsBadSpecs) {
  auto c = reference();
  EXPECT_EQ(c->client.state(c->session).at("phase"), "Commit");

  std::string code;
  auto empty = testing::reference_request("empty");
  empty["roster"] = nlohmann::json::array();
  EXPECT_EQ(status_of([&] { c->client.create(empty); }, &code), 400);
  EXPECT_EQ(code, "ConfigurationError");

  EXPECT_EQ(status_of([&] { c->client.create(testing::reference_request()); }, &code),
            409);
  EXPECT_EQ(code, "AlreadyExists");

  auto bad_id = testing::reference_request("has space");
  EXPECT_EQ(status_of([&] { c->client.create(bad_id); }), 400);

  auto tiny = testing::reference_request("tiny");
  tiny["modulus"] = 1;
  EXPECT_EQ(status_of([&] { c->client.create(tiny); }), 400);

  auto extra = testing::reference_request("extra");
  extra["surprise"] = true;
  EXPECT_EQ(status_of([&] { c->client.create(extra); }), 400);
}

TEST_F(ServiceFixture, DefaultDeadlinesAreApplied) {
  auto c = reference();
  auto st = c->client.state(c->session);
  const auto now = clock_.ms.load();
  EXPECT_EQ(st.at("commit_deadline").get<std::int64_t>(), now + 24 * 3600'000);
  EXPECT_EQ(st.at("reveal_deadline").get<std::int64_t>(), now + 48 * 3600'000);
}

TEST_F(ServiceFixture, ReferenceDrawEndToEnd) {
  auto c = reference();
  const auto roster = testing::reference_roster();
  for (std::size_t i = 0; i < roster.size(); ++i) {
    auto snap = c->commit(roster[i], testing::kReferenceValues[i]);
    EXPECT_EQ(snap.at("phase"), i + 1 < roster.size() ? "Commit" : "Reveal");
  }
  nlohmann::json last;
  for (const auto& id : roster) last = c->reveal(id);
  EXPECT_EQ(last.at("phase"), "Complete");
  EXPECT_EQ(last.at("outcome").get<std::uint64_t>(), testing::kReferenceOutcome);

  auto t = c->client.transcript(c->session);
  const auto report = verify_transcript(t.body);
  EXPECT_TRUE(report.all_ok());
  EXPECT_EQ(report.recomputed_outcome->value(), testing::kReferenceOutcome);
  EXPECT_EQ(load_transcript(t.body).size(), 12u);
  EXPECT_FALSE(t.headers.count(kQuarantineHeader));
}

TEST_F(ServiceFixture, CommitErrorsAndAuth) {
  auto c = reference();
  const auto before = c->client.transcript(c->session).body;
  std::string code;
  EXPECT_EQ(status_of([&] {
              c->client.commit(c->session, "bogus", std::string(64, '0'));
            }, &code),
            401);
  EXPECT_EQ(status_of([&] {
              c->client.commit(c->session, "", std::string(64, '0'));
            }),
            401);
  EXPECT_EQ(c->client.transcript(c->session).body, before);

  c->commit("S0", 1);
  EXPECT_EQ(status_of([&] { c->commit("S0", 2); }, &code), 409);
  EXPECT_EQ(code, "DuplicateCommitment");
  EXPECT_EQ(status_of([&] {
              c->client.commit(c->session, c->tokens["S1"], "not-hex");
            }),
            400);
  EXPECT_EQ(status_of([&] { c->client.state("missing"); }, &code), 404);
}

TEST_F(ServiceFixture, TokenIsolation) {
  auto c = reference();
  // S0's token always acts as S0, whatever the body says.
  c->client.commit(c->session, c->tokens["S0"], std::string(64, 'a'));
  auto st = c->client.state(c->session);
  EXPECT_TRUE(st.at("stakeholders")[0].at("committed").get<bool>());
  EXPECT_FALSE(st.at("stakeholders")[1].at("committed").get<bool>());
  EXPECT_EQ(st.at("stakeholders")[0].at("digest"), std::string(64, 'a'));

  auto other = reference("other");
  EXPECT_EQ(status_of([&] {
              c->client.commit(other->session, c->tokens["S1"],
                               std::string(64, 'b'));
            }),
            401);
  EXPECT_EQ(c->client.whoami(c->session, c->tokens["S3"])
                .at("stakeholder_id"),
            "S3");
}

TEST_F(ServiceFixture, RevealRules) {
  auto c = reference();
  const auto roster = testing::reference_roster();
  for (std::size_t i = 0; i + 1 < roster.size(); ++i) {
    c->commit(roster[i], testing::kReferenceValues[i]);
  }
  std::string code;
  EXPECT_EQ(status_of([&] { c->reveal("S0"); }, &code), 409);
  EXPECT_EQ(code, "PhaseViolation");
  c->commit("S4", testing::kReferenceValues[4]);

  // Mismatched opening: rejected and recorded.
  const auto good = c->values["S2"];
  c->values["S2"] = good + 1;
  EXPECT_EQ(status_of([&] { c->reveal("S2"); }, &code), 422);
  EXPECT_EQ(code, "InvalidOpening");
  c->values["S2"] = good;
  auto t = load_transcript(c->client.transcript(c->session).body);
  EXPECT_TRUE(std::holds_alternative<events::OpeningRejected>(
      t.records().back().event));
  auto st = c->client.state(c->session);
  EXPECT_EQ(st.at("stakeholders")[2].at("rejected_openings"), 1);

  // Out of range value.
  EXPECT_EQ(status_of([&] {
              c->client.reveal(c->session, c->tokens["S2"],
                               testing::kReferenceModulus, to_hex(c->masks["S2"].bytes));
            }, &code),
            422);
  EXPECT_EQ(code, "OutOfRange");

  c->reveal("S2");
  EXPECT_EQ(status_of([&] { c->reveal("S2"); }, &code), 409);
  EXPECT_EQ(code, "DuplicateReveal");
  EXPECT_TRUE(verify_transcript(c->client.transcript(c->session).body).all_ok());
}

TEST_F(ServiceFixture, StateProjectionNeverLeaksBeforeReveal) {
  auto c = reference();
  const auto roster = testing::reference_roster();
  for (int i : {1, 3, 4}) c->commit(roster[i], testing::kReferenceValues[i]);
  auto st = c->client.state(c->session);
  EXPECT_EQ(st.at("phase"), "Commit");
  EXPECT_EQ(st.at("committed_count"), 3);
  std::vector<bool> committed;
  for (const auto& s : st.at("stakeholders")) {
    committed.push_back(s.at("committed").get<bool>());
    EXPECT_TRUE(s.at("value").is_null());
    EXPECT_TRUE(s.at("mask").is_null());
  }
  EXPECT_EQ(committed, (std::vector<bool>{false, true, false, true, true}));
  const auto text = st.dump() + c->client.transcript(c->session).body;
  for (int i : {1, 3, 4}) {
    EXPECT_EQ(text.find(std::to_string(testing::kReferenceValues[i])),
              std::string::npos);
    EXPECT_EQ(text.find(to_hex(c->masks[roster[i]].bytes)), std::string::npos);
  }

  for (int i : {0, 2}) c->commit(roster[i], testing::kReferenceValues[i]);
  for (int i : {0, 1, 2, 3}) c->reveal(roster[i]);
  st = c->client.state(c->session);
  EXPECT_EQ(st.at("phase"), "Reveal");
  EXPECT_EQ(st.at("revealed_count"), 4);
  EXPECT_EQ(st.at("stakeholders")[3].at("value"), testing::kReferenceValues[3]);
  EXPECT_TRUE(st.at("stakeholders")[4].at("value").is_null());
  EXPECT_TRUE(st.at("outcome").is_null());
  std::uint64_t partial = 0;
  for (int i : {0, 1, 2, 3}) partial += testing::kReferenceValues[i];
  EXPECT_EQ(st.at("partial_sum"), partial % testing::kReferenceModulus);

  c->reveal("S4");
  st = c->client.state(c->session);
  EXPECT_EQ(st.at("outcome"), testing::kReferenceOutcome);
}

TEST_F(ServiceFixture, CandidatesAreSelectedOnCompletion) {
  nlohmann::json spec{{"session_id", "judges"},
                      {"modulus", 3},
                      {"roster", {"a", "b"}},
                      {"candidates", {"Judge A", "Judge B", "Judge C"}}};
  ScriptedCeremony c(url(), spec);
  c.commit("a", 2);
  c.commit("b", 2);
  c.reveal("a");
  auto st = c.reveal("b");
  EXPECT_EQ(st.at("outcome"), 1);
  EXPECT_EQ(st.at("candidate"), "Judge B");

  spec["session_id"] = "judges2";
  spec["modulus"] = 4;
  EXPECT_EQ(status_of([&] { c.client.create(spec); }), 400);
}

TEST_F(ServiceFixture, InProgressTranscriptIsValidPrefix) {
  auto c = reference();
  c->commit("S0", 5);
  c->commit("S1", 6);
  auto report = verify_transcript(c->client.transcript(c->session).body);
  EXPECT_TRUE(report.all_ok());
  EXPECT_EQ(report.final_phase, Phase::kCommit);
}

std::vector<nlohmann::json> collect(client::CoordinatorClient& cli,
                                    const std::string& session,
                                    std::uint64_t from) {
  std::vector<nlohmann::json> out;
  cli.stream_events(session, from, [&](const nlohmann::json& r) {
    out.push_back(r);
    return true;
  });
  return out;
}

TEST_F(ServiceFixture, EventStreamReplayAndResume) {
  auto c = reference();
  const auto roster = testing::reference_roster();
  for (std::size_t i = 0; i < roster.size(); ++i) {
    c->commit(roster[i], testing::kReferenceValues[i]);
  }
  for (const auto& id : roster) c->reveal(id);

  auto all = collect(c->client, c->session, 0);
  ASSERT_EQ(all.size(), 12u);
  for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(all[i].at("seq"), i);

  auto tail = collect(c->client, c->session, 6);
  ASSERT_EQ(tail.size(), 6u);
  EXPECT_EQ(tail.front().at("seq"), 6);
  EXPECT_EQ(tail.back().at("seq"), 11);

  auto again = collect(c->client, c->session, 0);
  EXPECT_EQ(again, all);

  std::string code;
  EXPECT_EQ(status_of([&] { collect(c->client, "missing", 0); }, &code), 404);
}

TEST_F(ServiceFixture, LiveSubscribersSeeEveryEventOnceInOrder) {
  auto c = reference();
  std::vector<nlohmann::json> seen_a, seen_b;
  auto watch = [&](std::vector<nlohmann::json>& sink) {
    client::CoordinatorClient cli(url());
    cli.stream_events(c->session, 0, [&](const nlohmann::json& r) {
      sink.push_back(r);
      return true;
    });
  };
  std::thread a(watch, std::ref(seen_a));
  std::thread b(watch, std::ref(seen_b));
  const auto roster = testing::reference_roster();
  for (std::size_t i = 0; i < roster.size(); ++i) {
    c->commit(roster[i], testing::kReferenceValues[i]);
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  for (const auto& id : roster) c->reveal(id);
  a.join();
  b.join();
  ASSERT_EQ(seen_a.size(), 12u);
  EXPECT_EQ(seen_a, seen_b);
  for (std::size_t i = 0; i < seen_a.size(); ++i) {
    EXPECT_EQ(seen_a[i].at("seq"), i);
  }
  EXPECT_EQ(seen_a.back().at("event").at("outcome"), testing::kReferenceOutcome);
}

TEST_F(ServiceFixture, ConcurrentCommitsAreLinearized) {
  std::vector<std::string> roster;
  for (int i = 0; i < 24; ++i) roster.push_back("p" + std::to_string(i));
  ScriptedCeremony c(url(), {{"session_id", "crowd"},
                             {"modulus", 1000},
                             {"roster", roster}});
  std::vector<std::thread> threads;
  std::vector<std::string> digests(roster.size());
  std::atomic<int> failures{0};
  for (std::size_t i = 0; i < roster.size(); ++i) {
    threads.emplace_back([&, i] {
      client::CoordinatorClient cli(url());
      const auto mask = testing::seeded_mask(i);
      digests[i] = commit("crowd", roster[i],
                          ContributionValue(i, Modulus(1000)), mask)
                       .hex();
      try {
        cli.commit("crowd", c.tokens[roster[i]], digests[i]);
      } catch (const RequestError&) {
        ++failures;
      }
    });
  }
  for (auto& t : threads) t.join();
  ASSERT_EQ(failures.load(), 0);
  auto t = load_transcript(c.client.transcript("crowd").body);
  EXPECT_EQ(t.size(), roster.size() + 1);
  EXPECT_EQ(t.state()->phase, Phase::kReveal);
  for (std::size_t i = 0; i < roster.size(); ++i) {
    EXPECT_EQ(t.state()->commitments.at(roster[i]).hex(), digests[i]);
  }
}

TEST_F(ServiceFixture, DeadlinesAbortLazilyAndBySweeper) {
  auto spec = testing::reference_request("late");
  spec["commit_deadline"] = clock_.ms.load() + 1000;
  ScriptedCeremony c(url(), spec);
  c.commit("S0", 1);
  clock_.ms += 1001;
  std::string code;
  EXPECT_EQ(status_of([&] { c.commit("S1", 1); }, &code), 409);
  EXPECT_EQ(code, "DeadlineExpired");
  auto st = c.client.state("late");
  EXPECT_EQ(st.at("phase"), "Aborted");
  EXPECT_NE(st.at("abort_reason").get<std::string>().find("commit deadline"),
            std::string::npos);

  auto spec2 = testing::reference_request("swept");
  spec2["commit_deadline"] = clock_.ms.load() + 1000;
  ScriptedCeremony c2(url(), spec2);
  service_->start_sweeper();
  clock_.ms += 2000;
  // The sweeper runs every 20 ms.
  auto stream = collect(c2.client, "swept", 0);
  ASSERT_EQ(stream.size(), 2u);
  EXPECT_EQ(stream.back().at("event").at("type"), "Aborted");
}

TEST_F(ServiceFixture, AbortAndRetryChain) {
  auto c = reference("first");
  c->commit("S0", 1);
  std::string code;
  EXPECT_EQ(status_of([&] {
              c->client.abort(c->session, "bogus", "x");
            }),
            401);
  auto st = c->client.abort(c->session, c->admin_token, "stakeholder S3 unreachable");
  EXPECT_EQ(st.at("phase"), "Aborted");
  EXPECT_EQ(status_of([&] { c->commit("S1", 1); }, &code), 409);
  EXPECT_EQ(code, "PhaseViolation");

  auto retry = testing::reference_request("second");
  retry["predecessor"] = "first";
  ScriptedCeremony second(url(), retry);
  EXPECT_EQ(second.client.state("second").at("predecessor"), "first");
  auto t = load_transcript(second.client.transcript("second").body);
  EXPECT_EQ(std::get<events::CeremonyCreated>(t.records()[0].event)
                .spec->predecessor,
            "first");

  auto third = testing::reference_request("third");
  third["predecessor"] = "first";
  EXPECT_EQ(status_of([&] { c->client.create(third); }), 400);
  third["predecessor"] = "second";  // not aborted
  EXPECT_EQ(status_of([&] { c->client.create(third); }), 400);
  third["predecessor"] = "nowhere";
  EXPECT_EQ(status_of([&] { c->client.create(third); }), 400);
}

TEST_F(ServiceFixture, CompletedCeremonyCannotBeAborted) {
  ScriptedCeremony c(url(), {{"session_id", "done"},
                             {"modulus", 12},
                             {"roster", {"a"}}});
  c.commit("a", 3);
  c.reveal("a");
  std::string code;
  EXPECT_EQ(status_of([&] { c.client.abort("done", c.admin_token, "x"); }, &code),
            409);
  EXPECT_EQ(code, "PhaseViolation");
}

TEST_F(ServiceFixture, RestartResumesFromPersistedTranscript) {
  auto c = reference();
  const auto roster = testing::reference_roster();
  for (std::size_t i = 0; i < 3; ++i) c->commit(roster[i], testing::kReferenceValues[i]);
  const auto bytes = c->client.transcript(c->session).body;

  reboot();
  c->client = client::CoordinatorClient(url());
  EXPECT_EQ(c->client.transcript(c->session).body, bytes);
  auto st = c->client.state(c->session);
  EXPECT_EQ(st.at("phase"), "Commit");
  EXPECT_EQ(st.at("committed_count"), 3);
  for (std::size_t i = 3; i < 5; ++i) c->commit(roster[i], testing::kReferenceValues[i]);
  nlohmann::json last;
  for (const auto& id : roster) last = c->reveal(id);
  EXPECT_EQ(last.at("outcome"), testing::kReferenceOutcome);
}

TEST_F(ServiceFixture, CorruptTranscriptIsQuarantined) {
  auto c = reference();
  c->commit("S0", 1);
  c->commit("S1", 2);
  shutdown();

  std::filesystem::path file;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir_.path())) {
    if (e.path().filename() == "transcript.jsonl") file = e.path();
  }
  ASSERT_FALSE(file.empty());
  auto bytes = storage::read_file(file);
  const auto pos = bytes.find("\"digest\":\"") + 10;
  bytes[pos] = bytes[pos] == '0' ? '1' : '0';
  { std::ofstream(file, std::ios::binary | std::ios::trunc) << bytes; }

  boot();
  c->client = client::CoordinatorClient(url());
  auto t = c->client.transcript(c->session);
  EXPECT_EQ(t.body, bytes);
  ASSERT_TRUE(t.headers.count(kQuarantineHeader));
  EXPECT_NE(t.headers.find(kQuarantineHeader)->second.find("quarantined"),
            std::string::npos);
  auto st = c->client.state(c->session);
  EXPECT_TRUE(st.at("quarantined").get<bool>());
  std::string code;
  EXPECT_EQ(status_of([&] { c->commit("S2", 3); }, &code), 409);
  // Not repaired on disk either.
  EXPECT_EQ(storage::read_file(file), bytes);
}

TEST(ServiceInMemoryTest, WorksWithoutDataDir) {
  CoordinationService svc(ServiceConfig{});
  auto created = svc.create({{"modulus", 12}, {"roster", {"a"}}});
  const auto id = created.at("session_id").get<std::string>();
  EXPECT_EQ(id.size(), 32u);
  const auto token = created.at("tokens").at("a").get<std::string>();
  EXPECT_GE(token.size(), 32u);
  const auto mask = new_mask();
  svc.submit_commitment(
      id, token,
      {{"digest", commit(id, "a", ContributionValue(4, Modulus(12)), mask).hex()}});
  auto st = svc.submit_reveal(id, token, {{"value", 4}, {"mask", to_hex(mask.bytes)}});
  EXPECT_EQ(st.at("outcome"), 4);
  EXPECT_EQ(svc.transcript(id).bytes.size(),
            serialize_transcript(load_transcript(svc.transcript(id).bytes)).size());
}

}  // namespace
}  // namespace fairdraw::service
