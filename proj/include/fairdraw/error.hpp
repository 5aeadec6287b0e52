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

#include <stdexcept>
#include <string>
#include <string_view>

namespace fairdraw {

enum class ErrorCode {
  kDomain,
  kConfiguration,
  kEncoding,
  kEntropyUnavailable,
  kPhaseViolation,
  kUnknownStakeholder,
  kDuplicateCommitment,
  kDuplicateReveal,
  kDeadlineExpired,
  kInvalidOpening,
  kOutOfRange,
  kNotFound,
  kUnauthorized,
  kAlreadyExists,
  kIo,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDomain: return "DomainError";
    case ErrorCode::kConfiguration: return "ConfigurationError";
    case ErrorCode::kEncoding: return "EncodingError";
    case ErrorCode::kEntropyUnavailable: return "EntropyUnavailable";
    case ErrorCode::kPhaseViolation: return "PhaseViolation";
    case ErrorCode::kUnknownStakeholder: return "UnknownStakeholder";
    case ErrorCode::kDuplicateCommitment: return "DuplicateCommitment";
    case ErrorCode::kDuplicateReveal: return "DuplicateReveal";
    case ErrorCode::kDeadlineExpired: return "DeadlineExpired";
    case ErrorCode::kInvalidOpening: return "InvalidOpening";
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kUnauthorized: return "Unauthorized";
    case ErrorCode::kAlreadyExists: return "AlreadyExists";
    case ErrorCode::kIo: return "IoError";
  }
  return "UnknownError";
}

/// The single exception type thrown by the library. `code()` is stable and
/// is what the service and CLI surface to clients.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

#define FAIRDRAW_ENFORCE(cond, code, msg)       \
  do {                                          \
    if (!(cond)) {                              \
      throw ::fairdraw::Error((code), (msg));   \
    }                                           \
  } while (false)

}  // namespace fairdraw
