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
#include <random>
#include <vector>

namespace mmjepa {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from (base, stream, index). Used to make
// dataset iteration, view sampling, and direction resampling pure functions
// of their coordinates.
inline uint64_t mix_seed(uint64_t base, uint64_t stream, uint64_t index = 0) {
  return splitmix64(splitmix64(base ^ splitmix64(stream)) ^ splitmix64(index));
}

template <typename T>
std::vector<T> normal_vec(size_t n, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<T> out(n);
  for (auto& v : out) v = static_cast<T>(dist(rng));
  return out;
}

// Truncated normal: rejection-samples until |x| <= clip * stddev.
template <typename T>
std::vector<T> trunc_normal_vec(size_t n, double stddev, double clip, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<T> out(n);
  for (auto& v : out) {
    double x = dist(rng);
    while (std::abs(x) > clip * stddev) x = dist(rng);
    v = static_cast<T>(x);
  }
  return out;
}

}  // namespace mmjepa
