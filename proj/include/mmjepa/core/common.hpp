// Copyright 2026 the mmjepa authors
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

#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmjepa {

using Shape = std::vector<int64_t>;

inline int64_t numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

[[noreturn]] inline void fail(const std::string& msg) {
  throw std::invalid_argument(msg);
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) fail(msg);
}

// Boolean query-by-key admissibility matrix for masked attention.
// true = the query row may attend to the key column.
struct AttentionMask {
  int64_t rows = 0;
  int64_t cols = 0;
  std::vector<uint8_t> allow;

  AttentionMask() = default;
  AttentionMask(int64_t r, int64_t c, bool init = false)
      : rows(r), cols(c), allow(static_cast<size_t>(r * c), init ? 1 : 0) {}

  static AttentionMask full(int64_t r, int64_t c) { return AttentionMask(r, c, true); }

  bool at(int64_t r, int64_t c) const { return allow[static_cast<size_t>(r * cols + c)] != 0; }
  void set(int64_t r, int64_t c, bool v) { allow[static_cast<size_t>(r * cols + c)] = v ? 1 : 0; }

  int64_t allowed_in_row(int64_t r) const {
    int64_t n = 0;
    for (int64_t c = 0; c < cols; ++c) n += allow[static_cast<size_t>(r * cols + c)];
    return n;
  }
};

}  // namespace mmjepa
