// Copyright 2026 The ocec-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace ocec {

enum class Errc {
  structural,        // input of the wrong shape (length, range)
  bad_length,        // wire buffer of the wrong size
  yield_exhausted,   // not enough stable bits before t_max
  already_registered,
  busy,              // SM already has a session in flight
  not_found,
  duplicate_id,
  keystore_corrupt,
  io,
  malformed_script,
  config,
};

inline const char* errc_name(Errc code) {
  switch (code) {
    case Errc::structural: return "Structural";
    case Errc::bad_length: return "BadLength";
    case Errc::yield_exhausted: return "YieldExhausted";
    case Errc::already_registered: return "AlreadyRegistered";
    case Errc::busy: return "Busy";
    case Errc::not_found: return "NotFound";
    case Errc::duplicate_id: return "DuplicateId";
    case Errc::keystore_corrupt: return "KeystoreCorrupt";
    case Errc::io: return "Io";
    case Errc::malformed_script: return "MalformedScript";
    case Errc::config: return "Config";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace ocec
