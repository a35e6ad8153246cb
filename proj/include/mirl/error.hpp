// Copyright 2026 The mirl Authors. All Rights Reserved.
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

#ifndef MIRL_ERROR_HPP_
#define MIRL_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace mirl {

enum class ErrorCode {
  kInvalidArgument = 1,
  kIo = 2,
  kFormat = 3,
  kDimensionMismatch = 4,
  kRuntime = 5,
};

// Base exception for the library. The C API maps `code()` onto its status
// enum, so every throw site picks the code that describes the failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline Error invalid_argument(const std::string& what) {
  return Error(ErrorCode::kInvalidArgument, what);
}
inline Error io_error(const std::string& what) {
  return Error(ErrorCode::kIo, what);
}
inline Error format_error(const std::string& what) {
  return Error(ErrorCode::kFormat, what);
}
inline Error dimension_error(const std::string& what) {
  return Error(ErrorCode::kDimensionMismatch, what);
}
inline Error runtime_error(const std::string& what) {
  return Error(ErrorCode::kRuntime, what);
}

}  // namespace mirl

#endif  // MIRL_ERROR_HPP_
