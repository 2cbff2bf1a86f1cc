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
#include <map>
#include <utility>

namespace mmjepa {

// Multiply-add accounting. Ops report their forward (and backward) work to
// the meter installed for the current thread, if any. Conventions, used by
// both the counters and the analytic formulas in profile/:
//   - matmul(m x k times k x n): m*k*n
//   - elementwise multiply / divide / square / scale: 1 per element
//   - elementwise transcendental (exp, log, cos, sin, sqrt, gelu, softplus):
//     1 per element
//   - masked softmax: 2 per allowed entry (exp + renormalizing divide)
//   - layer norm: 4 per element
//   - pure additions, copies, slices, reshapes: 0
class Meter {
 public:
  enum class Section { other = 0, attention = 1, mlp = 2, stem = 3, loss = 4 };

  void add(int64_t madds) {
    total_ += madds;
    if (scoped_) sections_[{layer_, section_}] += madds;
  }

  int64_t total() const { return total_; }

  int64_t section_madds(int layer, Section s) const {
    auto it = sections_.find({layer, s});
    return it == sections_.end() ? 0 : it->second;
  }

  void set_scope(int layer, Section s) {
    layer_ = layer;
    section_ = s;
    scoped_ = true;
  }
  void clear_scope() { scoped_ = false; }

  void reset() {
    total_ = 0;
    sections_.clear();
    scoped_ = false;
  }

 private:
  int64_t total_ = 0;
  std::map<std::pair<int, Section>, int64_t> sections_;
  int layer_ = 0;
  Section section_ = Section::other;
  bool scoped_ = false;
};

inline Meter*& active_meter() {
  thread_local Meter* meter = nullptr;
  return meter;
}

inline void count_madds(int64_t n) {
  if (Meter* m = active_meter()) m->add(n);
}

// Installs a meter for the current thread for the lifetime of the guard.
class MeterGuard {
 public:
  explicit MeterGuard(Meter& m) : prev_(active_meter()) { active_meter() = &m; }
  ~MeterGuard() { active_meter() = prev_; }
  MeterGuard(const MeterGuard&) = delete;
  MeterGuard& operator=(const MeterGuard&) = delete;

 private:
  Meter* prev_;
};

// Tags subsequent op counts with (layer, section); forward work only, since
// backward closures run outside any scope.
class SectionGuard {
 public:
  SectionGuard(int layer, Meter::Section s) {
    if (Meter* m = active_meter()) {
      m_ = m;
      m->set_scope(layer, s);
    }
  }
  ~SectionGuard() {
    if (m_) m_->clear_scope();
  }
  SectionGuard(const SectionGuard&) = delete;
  SectionGuard& operator=(const SectionGuard&) = delete;

 private:
  Meter* m_ = nullptr;
};

}  // namespace mmjepa
