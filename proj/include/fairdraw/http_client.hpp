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
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

#ifndef CPPHTTPLIB_LISTEN_BACKLOG
#define CPPHTTPLIB_LISTEN_BACKLOG 512
#endif
#include "httplib.h"
#include "json.hpp"

namespace fairdraw::client {

using json = nlohmann::json;

/// A non-2xx reply or a transport failure. `status` is 0 for the latter.
class RequestError : public std::runtime_error {
 public:
  RequestError(int status, std::string code, const std::string& message)
      : std::runtime_error(message), status_(status), code_(std::move(code)) {}

  int status() const noexcept { return status_; }
  const std::string& code() const noexcept { return code_; }

 private:
  int status_;
  std::string code_;
};

struct RawResponse {
  int status = 0;
  std::string body;
  httplib::Headers headers;
};

/// Thin synchronous client for the coordinator API.
class CoordinatorClient {
 public:
  explicit CoordinatorClient(std::string base_url)
      : base_url_(std::move(base_url)) {}

  json create(const json& spec) {
    return call("POST", "/v1/ceremonies", "", spec.dump());
  }

  json state(const std::string& session) {
    return call("GET", path(session), "", "");
  }

  json whoami(const std::string& session, const std::string& token) {
    return call("GET", path(session) + "/whoami", token, "");
  }

  json commit(const std::string& session, const std::string& token,
              const std::string& digest_hex) {
    return call("POST", path(session) + "/commitments", token,
                json{{"digest", digest_hex}}.dump());
  }

  json reveal(const std::string& session, const std::string& token,
              std::uint64_t value, const std::string& mask_hex) {
    return call("POST", path(session) + "/reveals", token,
                json{{"value", value}, {"mask", mask_hex}}.dump());
  }

  json abort(const std::string& session, const std::string& token,
             const std::string& reason) {
    return call("POST", path(session) + "/abort", token,
                json{{"reason", reason}}.dump());
  }

  RawResponse transcript(const std::string& session) {
    auto cli = make_client();
    auto res = cli->Get(path(session) + "/transcript");
    if (!res) transport_error(res.error());
    RawResponse out{res->status, res->body, res->headers};
    if (res->status >= 300) raise(res->status, res->body);
    return out;
  }

  /// Streams records (one JSON object each) from `from_seq`. The callback
  /// returns false to stop early. Returns the seq after the last record
  /// delivered; throws RequestError when the connection fails.
  std::uint64_t stream_events(const std::string& session,
                              std::uint64_t from_seq,
                              const std::function<bool(const json&)>& on_record) {
    auto cli = make_client();
    cli->set_read_timeout(std::chrono::seconds(30));
    std::string buffer;
    std::uint64_t next = from_seq;
    bool stopped = false;
    int status = 0;
    std::string error_body;
    auto res = cli->Get(
        path(session) + "/events?from_seq=" + std::to_string(from_seq),
        [&](const httplib::Response& r) {
          status = r.status;
          return true;
        },
        [&](const char* data, std::size_t len) {
          if (status >= 300) {
            error_body.append(data, len);
            return true;
          }
          buffer.append(data, len);
          std::size_t end;
          while ((end = buffer.find("\n\n")) != std::string::npos) {
            std::string frame = buffer.substr(0, end);
            buffer.erase(0, end + 2);
            std::string payload;
            std::size_t pos = 0;
            while (pos < frame.size()) {
              auto nl = frame.find('\n', pos);
              auto line = frame.substr(pos, nl == std::string::npos
                                                ? std::string::npos
                                                : nl - pos);
              if (line.rfind("data: ", 0) == 0) payload += line.substr(6);
              if (nl == std::string::npos) break;
              pos = nl + 1;
            }
            if (payload.empty()) continue;
            auto rec = json::parse(payload);
            next = rec.at("seq").get<std::uint64_t>() + 1;
            if (!on_record(rec)) {
              stopped = true;
              return false;
            }
          }
          return true;
        });
    if (stopped) return next;
    if (!res) transport_error(res.error(), next);
    if (res->status >= 300) raise(res->status, error_body);
    return next;
  }

  const std::string& base_url() const { return base_url_; }

 private:
  static std::string path(const std::string& session) {
    return "/v1/ceremonies/" + session;
  }

  std::unique_ptr<httplib::Client> make_client() const {
    auto cli = std::make_unique<httplib::Client>(base_url_);
    cli->set_connection_timeout(std::chrono::seconds(5));
    cli->set_read_timeout(std::chrono::seconds(30));
    return cli;
  }

  [[noreturn]] static void transport_error(httplib::Error err,
                                           std::uint64_t next_seq = 0) {
    throw RequestError(0, "TransportError",
                       "connection failed: " + httplib::to_string(err) +
                           " (next seq " + std::to_string(next_seq) + ")");
  }

  [[noreturn]] static void raise(int status, const std::string& body) {
    std::string code = "HttpError";
    std::string message = "HTTP " + std::to_string(status);
    try {
      auto j = json::parse(body);
      code = j.value("error", code);
      message = j.value("message", message);
    } catch (const json::exception&) {
    }
    throw RequestError(status, code, message);
  }

  json call(const std::string& method, const std::string& p,
            const std::string& token, const std::string& body) {
    auto cli = make_client();
    httplib::Headers headers;
    if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);
    httplib::Result res =
        method == "GET"
            ? cli->Get(p, headers)
            : cli->Post(p, headers, body, "application/json");
    if (!res) transport_error(res.error());
    if (res->status >= 300) raise(res->status, res->body);
    return json::parse(res->body);
  }

  std::string base_url_;
};

}  // namespace fairdraw::client
