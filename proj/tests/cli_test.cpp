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

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gtest/gtest.h"

#include "fairdraw/fairdraw.hpp"
#include "fairdraw/http_client.hpp"
#include "fairdraw/secret_store.hpp"
#include "fairdraw/storage.hpp"
#include "support/ceremony_driver.hpp"
#include "support/fixtures.hpp"
#include "support/process.hpp"
#include "support/temp_dir.hpp"

namespace fairdraw {
namespace {

using testing::ProcessResult;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    server_ = std::make_unique<testing::ServerProcess>(FAIRDRAW_SERVER_PATH,
                                                       (data_.path() / "data").string());
  }

  ProcessResult cli(std::vector<std::string> args, const std::string& input = {},
                    const std::string& token = {}) {
    std::vector<std::string> argv = {FAIRDRAW_CLI_PATH, "--server", server_->url()};
    argv.insert(argv.end(), args.begin(), args.end());
    std::map<std::string, std::string> env = {
        {"FAIRDRAW_SECRETS_DIR", (data_.path() / "secrets").string()},
        {"FAIRDRAW_TOKEN", token}};
    return testing::run_process(argv, input, env);
  }

  // Creates the five-party reference ceremony via the CLI; returns tokens.
  std::map<std::string, std::string> create_reference(const std::string& session = "reference") {
    auto r = cli({"create", "--session", session, "-m", "10000000", "--roster",
                  "S0,S1,S2,S3,S4"});
    EXPECT_EQ(r.exit_code, 0) << r.err;
    std::map<std::string, std::string> tokens;
    std::istringstream in(r.out);
    std::string word, id, tok;
    while (in >> word) {
      if (word == "token" && in >> id >> tok) tokens[id] = tok;
      if (word == "admin-token" && in >> tok) tokens["admin"] = tok;
    }
    EXPECT_EQ(tokens.size(), 6u) << r.out;
    return tokens;
  }

  ProcessResult commit_value(const std::string& session, const std::string& token,
                             std::uint64_t v) {
    return cli({"commit", "--session", session, "--value", std::to_string(v)}, {}, token);
  }

  std::string transcript_file(const std::string& session) {
    client::CoordinatorClient c(server_->url());
    const auto path = data_.path() / (session + ".jsonl");
    std::ofstream(path, std::ios::binary) << c.transcript(session).body;
    return path.string();
  }

  void run_reference(const std::map<std::string, std::string>& tokens,
                const std::string& session = "reference") {
    const auto roster = testing::reference_roster();
    for (std::size_t i = 0; i < roster.size(); ++i) {
      auto r = commit_value(session, tokens.at(roster[i]), testing::kReferenceValues[i]);
      ASSERT_EQ(r.exit_code, 0) << r.err;
    }
    for (const auto& id : roster) {
      auto r = cli({"reveal", "--session", session}, {}, tokens.at(id));
      ASSERT_EQ(r.exit_code, 0) << r.err;
    }
  }

  testing::TempDir data_;
  std::unique_ptr<testing::ServerProcess> server_;
};

TEST_F(CliTest, CommitValidatesRangeLocally) {
  auto tokens = create_reference();
  auto r = commit_value("reference", tokens["S0"], 10'000'000);
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.err.find("range"), std::string::npos) << r.err;
  client::CoordinatorClient c(server_->url());
  EXPECT_EQ(c.state("reference").at("committed_count"), 0);

  r = commit_value("reference", tokens["S0"], 1'610'027);
  EXPECT_EQ(r.exit_code, 0) << r.err;
  EXPECT_NE(r.out.find("committed S0 digest "), std::string::npos);
  EXPECT_EQ(c.state("reference").at("committed_count"), 1);

  // A second commit is refused before contacting the server.
  r = commit_value("reference", tokens["S0"], 5);
  EXPECT_NE(r.exit_code, 0);
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(cli({"commit"}).exit_code, 2);
  EXPECT_EQ(cli({"bogus"}).exit_code, 2);
  auto tokens = create_reference();
  EXPECT_EQ(cli({"commit", "--session", "reference", "--value", "1", "--random"}, {},
                tokens["S0"]).exit_code,
            2);
}

TEST_F(CliTest, DiceEntry) {
  auto tokens = create_reference();
  auto r = cli({"commit", "--session", "reference", "--dice"}, "5\n7\n5\n7\n9\n8\n9\n",
               tokens["S4"]);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  // Reveal later shows the composed value.
  const auto roster = testing::reference_roster();
  for (std::size_t i = 0; i < 4; ++i) {
    ASSERT_EQ(commit_value("reference", tokens[roster[i]], testing::kReferenceValues[i]).exit_code, 0);
  }
  for (const auto& id : roster) {
    ASSERT_EQ(cli({"reveal", "--session", "reference"}, {}, tokens[id]).exit_code, 0);
  }
  client::CoordinatorClient c(server_->url());
  auto st = c.state("reference");
  EXPECT_EQ(st.at("stakeholders")[4].at("value"), 5'757'989);
  EXPECT_EQ(st.at("outcome"), testing::kReferenceOutcome);
}

TEST_F(CliTest, DiceRejectsBadDigits) {
  auto tokens = create_reference();
  auto r = cli({"commit", "--session", "reference", "--dice"}, "5\nx\n", tokens["S4"]);
  EXPECT_NE(r.exit_code, 0);
  client::CoordinatorClient c(server_->url());
  EXPECT_EQ(c.state("reference").at("committed_count"), 0);
}

TEST_F(CliTest, RevealLifecycle) {
  auto tokens = create_reference();
  ASSERT_EQ(commit_value("reference", tokens["S0"], 1).exit_code, 0);
  auto r = cli({"reveal", "--session", "reference"}, {}, tokens["S0"]);
  EXPECT_EQ(r.exit_code, 3) << r.out << r.err;
  client::CoordinatorClient c(server_->url());
  // Nothing went to the server.
  EXPECT_EQ(load_transcript(c.transcript("reference").body).size(), 2u);

  r = cli({"reveal", "--session", "reference"}, {}, tokens["S1"]);
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.err.find("secret"), std::string::npos) << r.err;
}

TEST_F(CliTest, ReferenceDrawOutcomeAndIdempotentReveal) {
  auto tokens = create_reference();
  const auto roster = testing::reference_roster();
  for (std::size_t i = 0; i < roster.size(); ++i) {
    ASSERT_EQ(commit_value("reference", tokens[roster[i]], testing::kReferenceValues[i]).exit_code, 0);
  }
  ProcessResult last;
  for (const auto& id : roster) {
    last = cli({"reveal", "--session", "reference"}, {}, tokens[id]);
    ASSERT_EQ(last.exit_code, 0) << last.err;
  }
  EXPECT_NE(last.out.find("outcome 6932980"), std::string::npos) << last.out;
  auto again = cli({"reveal", "--session", "reference"}, {}, tokens["S2"]);
  EXPECT_EQ(again.exit_code, 0) << again.err;
  EXPECT_NE(again.out.find("already revealed"), std::string::npos);

  auto status = cli({"status", "--session", "reference"});
  EXPECT_EQ(status.exit_code, 0);
  EXPECT_NE(status.out.find("outcome 6932980"), std::string::npos);
}

TEST_F(CliTest, VerifyCleanTamperedAndTruncated) {
  auto tokens = create_reference();
  run_reference(tokens);
  const auto file = transcript_file("reference");
  auto r = cli({"verify", file});
  EXPECT_EQ(r.exit_code, 0) << r.out;
  EXPECT_NE(r.out.find("6932980"), std::string::npos);

  auto bytes = storage::read_file(file);
  // Change S3's revealed value in record 8.
  const auto pos = bytes.find("7664824");
  ASSERT_NE(pos, std::string::npos);
  auto tampered = bytes;
  tampered[pos] = '8';
  std::ofstream(file + ".bad", std::ios::binary) << tampered;
  r = cli({"verify", file + ".bad"});
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.out.find("seq 9"), std::string::npos) << r.out;

  std::ofstream(file + ".cut", std::ios::binary) << bytes.substr(0, bytes.size() - 20);
  r = cli({"verify", file + ".cut"});
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.out.find("unexpected end"), std::string::npos) << r.out;

  EXPECT_EQ(cli({"verify", file + ".missing"}).exit_code, 2);
}

TEST_F(CliTest, WatchCompletedAndResumed) {
  auto tokens = create_reference();
  run_reference(tokens);
  auto r = cli({"watch", "--session", "reference"});
  EXPECT_EQ(r.exit_code, 0) << r.err;
  std::istringstream in(r.out);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  ASSERT_EQ(lines.size(), 13u) << r.out;
  EXPECT_EQ(lines[0].rfind("#0 ", 0), 0u);
  EXPECT_EQ(lines.back(), "outcome 6932980");

  r = cli({"watch", "--session", "reference", "--from-seq", "6"});
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_EQ(r.out.rfind("#6 ", 0), 0u) << r.out;
  EXPECT_EQ(r.out.find("#5 "), std::string::npos);
}

TEST_F(CliTest, WatchAbortedExitsProtocol) {
  auto tokens = create_reference();
  client::CoordinatorClient c(server_->url());
  c.abort("reference", tokens["admin"], "called off");
  auto r = cli({"watch", "--session", "reference"});
  EXPECT_EQ(r.exit_code, 3);
  EXPECT_NE(r.out.find("aborted: called off"), std::string::npos) << r.out;
}

TEST_F(CliTest, AuditDirectory) {
  const auto dir = data_.path() / "audit";
  std::filesystem::create_directories(dir);
  for (int s = 0; s < 20; ++s) {
    const auto id = "a" + std::to_string(s);
    testing::ScriptedCeremony c(server_->url(), {{"session_id", id},
                                                 {"modulus", 10},
                                                 {"roster", {"x", "y"}}});
    c.commit("x", s % 10);
    c.commit("y", (s * 7) % 10);
    c.reveal("x");
    c.reveal("y");
    std::ofstream(dir / (id + ".jsonl"), std::ios::binary)
        << c.client.transcript(id).body;
  }
  auto r = cli({"audit", dir.string(), "--bins", "10", "--output", "json"});
  ASSERT_EQ(r.exit_code, 0) << r.err;
  auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j.at("total"), 20);
  EXPECT_EQ(j.at("bins"), 10);

  EXPECT_EQ(cli({"audit", dir.string(), "--bins", "3"}).exit_code, 2);
  std::ofstream(dir / "broken.jsonl") << "not json\n";
  EXPECT_EQ(cli({"audit", dir.string(), "--bins", "10"}).exit_code, 1);
}

// The --random path uses the same sampler; check it directly at scale.
TEST(RandomContribution, UniformOverHundredThousandDraws) {
  const Modulus m(100);
  std::vector<std::uint64_t> counts(100, 0);
  for (int i = 0; i < 100'000; ++i) ++counts[secure_uniform(m).value()];
  EXPECT_GT(chi_square_uniformity(counts).p_value, 0.001);
}

TEST_F(CliTest, RandomCommitIsInRange) {
  auto tokens = create_reference();
  auto r = cli({"commit", "--session", "reference", "--random"}, {}, tokens["S0"]);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  SecretStore store(data_.path() / "secrets");
  auto secret = store.load("reference", "S0");
  ASSERT_TRUE(secret);
  EXPECT_LT(secret->value, testing::kReferenceModulus);
}

}  // namespace
}  // namespace fairdraw
