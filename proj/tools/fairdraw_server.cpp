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

// fairdraw-server: hosts ceremonies over HTTP.

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "fairdraw/http_server.hpp"
#include "fairdraw/service.hpp"

namespace {

fairdraw::service::HttpFrontend* g_frontend = nullptr;

void handle_signal(int) {
  // Every acknowledged mutation is already on disk.
  if (g_frontend != nullptr) std::quick_exit(0);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fairdraw-server: commit-reveal ceremony coordinator"};

  std::string host = "127.0.0.1";
  int port = 8080;
  std::string data_dir = "fairdraw-data";
  double commit_hours = 24.0;
  double reveal_hours = 24.0;
  double sweep_seconds = 1.0;

  app.add_option("--host", host, "Listen address")->envname("FAIRDRAW_HOST");
  app.add_option("--port", port, "Listen port (0 picks a free one)")
      ->envname("FAIRDRAW_PORT");
  app.add_option("--data-dir", data_dir, "Transcript and token storage")
      ->envname("FAIRDRAW_DATA_DIR");
  app.add_option("--commit-window-hours", commit_hours,
                 "Default commit deadline after creation")
      ->envname("FAIRDRAW_COMMIT_WINDOW_HOURS");
  app.add_option("--reveal-window-hours", reveal_hours,
                 "Default reveal deadline after the commit deadline")
      ->envname("FAIRDRAW_REVEAL_WINDOW_HOURS");
  app.add_option("--sweep-seconds", sweep_seconds,
                 "Interval between deadline sweeps")
      ->envname("FAIRDRAW_SWEEP_SECONDS");
  CLI11_PARSE(app, argc, argv);

  using std::chrono::duration;
  using std::chrono::duration_cast;
  using std::chrono::milliseconds;
  fairdraw::service::ServiceConfig config;
  config.data_dir = data_dir;
  config.commit_window =
      duration_cast<milliseconds>(duration<double, std::ratio<3600>>(commit_hours));
  config.reveal_window =
      duration_cast<milliseconds>(duration<double, std::ratio<3600>>(reveal_hours));
  config.sweep_interval =
      duration_cast<milliseconds>(duration<double>(sweep_seconds));

  try {
    fairdraw::service::CoordinationService service(config);
    fairdraw::service::HttpFrontend frontend(service);
    const int bound = frontend.bind(host, port);
    g_frontend = &frontend;
    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);
    service.start_sweeper();
    std::cout << "fairdraw-server listening on " << host << ":" << bound
              << std::endl;
    for (const auto& id : service.session_ids()) {
      auto st = service.state(id);
      if (st.value("quarantined", false)) {
        std::cerr << "quarantined session " << id << ": "
                  << st.at("quarantine_reason").get<std::string>() << "\n";
      }
    }
    frontend.listen();
  } catch (const std::exception& e) {
    std::cerr << "fatal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
