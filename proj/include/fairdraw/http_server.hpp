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
#include <memory>
#include <string>
#include <thread>

#ifndef CPPHTTPLIB_LISTEN_BACKLOG
#define CPPHTTPLIB_LISTEN_BACKLOG 512
#endif
#include "httplib.h"
#include "json.hpp"

#include "fairdraw/error.hpp"
#include "fairdraw/service.hpp"

namespace fairdraw::service {

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDomain:
    case ErrorCode::kConfiguration:
    case ErrorCode::kEncoding:
      return 400;
    case ErrorCode::kUnauthorized:
      return 401;
    case ErrorCode::kNotFound:
      return 404;
    case ErrorCode::kPhaseViolation:
    case ErrorCode::kDuplicateCommitment:
    case ErrorCode::kDuplicateReveal:
    case ErrorCode::kDeadlineExpired:
    case ErrorCode::kAlreadyExists:
      return 409;
    case ErrorCode::kUnknownStakeholder:
    case ErrorCode::kInvalidOpening:
    case ErrorCode::kOutOfRange:
      return 422;
    case ErrorCode::kEntropyUnavailable:
    case ErrorCode::kIo:
      return 500;
  }
  return 500;
}

inline constexpr const char* kQuarantineHeader = "X-FairDraw-Warning";

/// JSON-over-HTTP front end for a CoordinationService, plus a server-sent
/// event stream per session.
class HttpFrontend {
 public:
  explicit HttpFrontend(CoordinationService& service) : service_(service) {
    server_.new_task_queue = [] { return new httplib::ThreadPool(64); };
    install_routes();
  }

  ~HttpFrontend() { stop(); }

  /// Binds; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port) {
    if (port == 0) {
      port_ = server_.bind_to_any_port(host);
    } else {
      port_ = server_.bind_to_port(host, port) ? port : -1;
    }
    FAIRDRAW_ENFORCE(port_ > 0, ErrorCode::kIo,
                     "cannot bind " + host + ":" + std::to_string(port));
    return port_;
  }

  void listen() { server_.listen_after_bind(); }

  void start() {
    thread_ = std::thread([this] { listen(); });
    server_.wait_until_ready();
  }

  void stop() {
    service_.stop();
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const { return port_; }

 private:
  static std::string bearer(const httplib::Request& req) {
    auto h = req.get_header_value("Authorization");
    constexpr std::string_view kPrefix = "Bearer ";
    if (h.rfind(kPrefix, 0) == 0) return h.substr(kPrefix.size());
    return {};
  }

  static json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    try {
      return json::parse(req.body);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kEncoding, std::string("bad JSON body: ") +
                                            e.what());
    }
  }

  static void send_json(httplib::Response& res, int status,
                        const ordered_json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  template <typename F>
  static void guarded(httplib::Response& res, F&& f) {
    try {
      f();
    } catch (const Error& e) {
      ordered_json body;
      body["error"] = std::string(to_string(e.code()));
      body["message"] = e.what();
      send_json(res, http_status(e.code()), body);
    } catch (const std::exception& e) {
      ordered_json body;
      body["error"] = "InternalError";
      body["message"] = e.what();
      send_json(res, 500, body);
    }
  }

  void install_routes() {
    constexpr auto kId = R"(/v1/ceremonies/([A-Za-z0-9._-]+))";
    const std::string id_re = kId;

    server_.Post("/v1/ceremonies", [this](const auto& req, auto& res) {
      guarded(res, [&] { send_json(res, 201, service_.create(parse_body(req))); });
    });
    server_.Get(id_re, [this](const auto& req, auto& res) {
      guarded(res, [&] { send_json(res, 200, service_.state(req.matches[1])); });
    });
    server_.Get(id_re + "/whoami", [this](const auto& req, auto& res) {
      guarded(res, [&] {
        send_json(res, 200, service_.whoami(req.matches[1], bearer(req)));
      });
    });
    server_.Post(id_re + "/commitments", [this](const auto& req, auto& res) {
      guarded(res, [&] {
        send_json(res, 200,
                  service_.submit_commitment(req.matches[1], bearer(req),
                                             parse_body(req)));
      });
    });
    server_.Post(id_re + "/reveals", [this](const auto& req, auto& res) {
      guarded(res, [&] {
        send_json(res, 200,
                  service_.submit_reveal(req.matches[1], bearer(req),
                                         parse_body(req)));
      });
    });
    server_.Post(id_re + "/abort", [this](const auto& req, auto& res) {
      guarded(res, [&] {
        send_json(res, 200,
                  service_.abort(req.matches[1], bearer(req), parse_body(req)));
      });
    });
    server_.Get(id_re + "/transcript", [this](const auto& req, auto& res) {
      guarded(res, [&] {
        auto view = service_.transcript(req.matches[1]);
        if (view.quarantined) {
          res.set_header(kQuarantineHeader,
                         "quarantined: " + view.quarantine_reason);
        }
        res.status = 200;
        res.set_content(view.bytes, "application/x-ndjson");
      });
    });
    server_.Get(id_re + "/events", [this](const auto& req, auto& res) {
      guarded(res, [&] { stream_events(req, res); });
    });
  }

  void stream_events(const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    std::uint64_t from = 0;
    if (req.has_param("from_seq")) {
      try {
        from = std::stoull(req.get_param_value("from_seq"));
      } catch (const std::exception&) {
        throw Error(ErrorCode::kConfiguration, "from_seq must be an integer");
      }
    }
    // Fails with NotFound before any stream is opened.
    service_.events_from(id, from, std::chrono::milliseconds(0));

    auto next = std::make_shared<std::uint64_t>(from);
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider(
        "text/event-stream",
        [this, id, next](std::size_t, httplib::DataSink& sink) {
          while (sink.is_writable() && !service_.stopping()) {
            CoordinationService::EventBatch batch;
            try {
              batch = service_.events_from(id, *next,
                                           std::chrono::milliseconds(250));
            } catch (const Error&) {
              return false;
            }
            for (std::size_t i = 0; i < batch.lines.size(); ++i) {
              std::string frame = "id: " + std::to_string(*next + i) +
                                  "\ndata: " + batch.lines[i] + "\n\n";
              if (!sink.write(frame.data(), frame.size())) return false;
            }
            *next = batch.next_seq;
            if (batch.finished) {
              sink.done();
              return true;
            }
            if (!batch.lines.empty()) return true;
          }
          return false;
        });
  }

  CoordinationService& service_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
};

}  // namespace fairdraw::service
