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

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "fairdraw/error.hpp"

namespace fairdraw::storage {

namespace detail {

class Fd {
 public:
  explicit Fd(int fd) : fd_(fd) {}
  ~Fd() {
    if (fd_ >= 0) ::close(fd_);
  }
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  int get() const { return fd_; }

 private:
  int fd_;
};

inline Error io_error(const std::string& what, const std::filesystem::path& p) {
  return Error(ErrorCode::kIo, what + " " + p.string() + ": " +
                                   std::strerror(errno));
}

inline void write_all(int fd, std::string_view bytes,
                      const std::filesystem::path& p) {
  while (!bytes.empty()) {
    auto n = ::write(fd, bytes.data(), bytes.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw io_error("write", p);
    }
    bytes.remove_prefix(static_cast<std::size_t>(n));
  }
}

inline void fsync_dir(const std::filesystem::path& dir) {
  Fd fd(::open(dir.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC));
  if (fd.get() >= 0) ::fsync(fd.get());
}

}  // namespace detail

/// Appends and fsyncs before returning. A crash either keeps the whole
/// write or leaves a torn tail that verification will flag.
inline void append_durably(const std::filesystem::path& file,
                           std::string_view bytes, mode_t mode = 0644) {
  const bool existed = std::filesystem::exists(file);
  detail::Fd fd(
      ::open(file.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, mode));
  if (fd.get() < 0) throw detail::io_error("open", file);
  detail::write_all(fd.get(), bytes, file);
  if (::fsync(fd.get()) != 0) throw detail::io_error("fsync", file);
  if (!existed) detail::fsync_dir(file.parent_path());
}

/// Replaces `file` atomically via a synced temporary and rename.
inline void write_atomically(const std::filesystem::path& file,
                             std::string_view bytes, mode_t mode = 0644) {
  auto tmp = file;
  tmp += ".tmp";
  {
    detail::Fd fd(
        ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, mode));
    if (fd.get() < 0) throw detail::io_error("open", tmp);
    detail::write_all(fd.get(), bytes, tmp);
    if (::fsync(fd.get()) != 0) throw detail::io_error("fsync", tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, file, ec);
  if (ec) {
    throw Error(ErrorCode::kIo, "rename " + tmp.string() + ": " + ec.message());
  }
  detail::fsync_dir(file.parent_path());
}

inline std::string read_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace fairdraw::storage
