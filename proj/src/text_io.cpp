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

#include "text_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mirl/error.hpp"

namespace mirl::text {

std::string format_double(double v) {
  std::string s;
  append_double(s, v);
  return s;
}

void append_double(std::string& out, double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

TokenReader::TokenReader(std::string_view line, std::string context)
    : line_(line), context_(std::move(context)) {}

bool TokenReader::done() const {
  std::size_t p = pos_;
  while (p < line_.size() && (line_[p] == ' ' || line_[p] == '\t' || line_[p] == '\r'))
    ++p;
  return p >= line_.size();
}

std::size_t TokenReader::remaining_tokens() const {
  std::size_t count = 0;
  bool in_token = false;
  for (std::size_t p = pos_; p < line_.size(); ++p) {
    const bool space = line_[p] == ' ' || line_[p] == '\t' || line_[p] == '\r';
    if (!space && !in_token) ++count;
    in_token = !space;
  }
  return count;
}

std::string_view TokenReader::next() {
  while (pos_ < line_.size() &&
         (line_[pos_] == ' ' || line_[pos_] == '\t' || line_[pos_] == '\r'))
    ++pos_;
  if (pos_ >= line_.size()) fail("unexpected end of record");
  const std::size_t start = pos_;
  while (pos_ < line_.size() && line_[pos_] != ' ' && line_[pos_] != '\t' &&
         line_[pos_] != '\r')
    ++pos_;
  return line_.substr(start, pos_ - start);
}

void TokenReader::expect(std::string_view literal) {
  auto tok = next();
  if (tok != literal)
    fail("expected '" + std::string(literal) + "', got '" + std::string(tok) + "'");
}

double TokenReader::next_double() {
  auto tok = next();
  double v = 0.0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    fail("bad real '" + std::string(tok) + "'");
  return v;
}

std::int64_t TokenReader::next_int() {
  auto tok = next();
  std::int64_t v = 0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    fail("bad integer '" + std::string(tok) + "'");
  return v;
}

std::uint64_t TokenReader::next_uint() {
  auto tok = next();
  std::uint64_t v = 0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    fail("bad unsigned integer '" + std::string(tok) + "'");
  return v;
}

void TokenReader::fail(const std::string& what) const {
  throw format_error(context_ + ": " + what);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw io_error("read failure on '" + path + "'");
  return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot open '" + path + "' for writing");
  out << contents;
  out.flush();
  if (!out) throw io_error("write failure on '" + path + "'");
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

}  // namespace mirl::text
