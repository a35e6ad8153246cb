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

#ifndef MIRL_SRC_TEXT_IO_HPP_
#define MIRL_SRC_TEXT_IO_HPP_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mirl::text {

// Shortest representation that parses back to the identical double.
std::string format_double(double v);
void append_double(std::string& out, double v);

// Whitespace tokenizer with typed, error-reporting reads. Every failure is a
// format error naming `context`.
class TokenReader {
 public:
  TokenReader(std::string_view line, std::string context);

  bool done() const;
  std::size_t remaining_tokens() const;
  std::string_view next();
  void expect(std::string_view literal);
  double next_double();
  std::int64_t next_int();
  std::uint64_t next_uint();

 private:
  [[noreturn]] void fail(const std::string& what) const;
  std::string_view line_;
  std::size_t pos_ = 0;
  std::string context_;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);
std::vector<std::string_view> split_lines(std::string_view text);

// 64-bit FNV-1a, rendered as 16 hex digits.
std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t v);

}  // namespace mirl::text

#endif  // MIRL_SRC_TEXT_IO_HPP_
