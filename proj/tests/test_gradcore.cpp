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

#include <catch2/catch_amalgamated.hpp>

#include "mmjepa/core/grad_check.hpp"
#include "mmjepa/core/ops.hpp"
#include "support/gradsuite.hpp"

using namespace mmjepa;
using D = Tensor<double>;

TEST_CASE("masked softmax of equal scores splits mass over allowed keys") {
  auto mask = AttentionMask::full(1, 2);
  D s = D::from({1, 2}, {0.0, 0.0});
  D y = masked_softmax(s, mask);
  CHECK(y.value()[0] == 0.5);
  CHECK(y.value()[1] == 0.5);
}

TEST_CASE("masked softmax zeroes disallowed keys and renormalizes") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> vals(-3.0, 3.0);
  std::uniform_int_distribution<int> coin(0, 1);
  for (int round = 0; round < 20; ++round) {
    const int64_t m = 3 + round % 4, n = 2 + round % 5;
    AttentionMask mask(m, n);
    for (int64_t i = 0; i < m; ++i) {
      for (int64_t j = 0; j < n; ++j) mask.set(i, j, coin(rng) != 0);
      mask.set(i, round % n, true);
    }
    std::vector<double> data(static_cast<size_t>(m * n));
    for (auto& v : data) v = vals(rng);
    D y = masked_softmax(D::from({m, n}, data), mask);
    for (int64_t i = 0; i < m; ++i) {
      double row_sum = 0.0;
      for (int64_t j = 0; j < n; ++j) {
        if (!mask.at(i, j)) {
          CHECK(y.at(i, j) == 0.0);  // exactly zero, not merely small
        }
        row_sum += y.at(i, j);
      }
      CHECK(row_sum == Catch::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("masked softmax rejects a row with no allowed keys") {
  AttentionMask mask(2, 2);
  mask.set(0, 0, true);
  mask.set(0, 1, true);
  D s = D::zeros({2, 2});
  CHECK_THROWS_AS(masked_softmax(s, mask), std::invalid_argument);
}

TEST_CASE("matmul against identity returns the input exactly") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> vals(-5.0, 5.0);
  std::vector<double> data(12);
  for (auto& v : data) v = vals(rng);
  D a = D::from({3, 4}, data);
  std::vector<double> eye(16, 0.0);
  for (int i = 0; i < 4; ++i) eye[static_cast<size_t>(i * 4 + i)] = 1.0;
  D y = matmul(a, D::from({4, 4}, eye));
  for (size_t i = 0; i < data.size(); ++i) CHECK(y.value()[i] == data[i]);
}

TEST_CASE("matmul rejects nonconforming shapes with both shapes named") {
  D a = D::zeros({2, 3});
  D b = D::zeros({4, 2});
  try {
    matmul(a, b);
    FAIL("expected an exception");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[4x2]") != std::string::npos);
  }
}

TEST_CASE("layer norm of a constant row is exactly zero") {
  D a = D::full({2, 5}, 3.25);
  D y = layer_norm(a);
  for (double v : y.value()) CHECK(v == 0.0);
}

TEST_CASE("backward of sum of squares") {
  D x = D::param({2}, {1.0, 2.0});
  D loss = sum(square(x));
  backward(loss);
  CHECK(x.grad()[0] == Catch::Approx(2.0));
  CHECK(x.grad()[1] == Catch::Approx(4.0));
}

TEST_CASE("fan-out accumulates additively") {
  D x = D::param({3}, {0.5, -1.0, 2.0});
  D y = add(x, x);
  D loss = sum(y);
  backward(loss);
  for (double g : x.grad()) CHECK(g == 2.0);
}

TEST_CASE("backward rejects non-scalar roots") {
  D x = D::param({2, 2}, {1, 2, 3, 4});
  D y = square(x);
  CHECK_THROWS_AS(backward(y), std::invalid_argument);
}

TEST_CASE("forward results are deterministic") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> vals(-1.0, 1.0);
  std::vector<double> da(24), db(24);
  for (auto& v : da) v = vals(rng);
  for (auto& v : db) v = vals(rng);
  D a1 = D::from({4, 6}, da), b1 = D::from({6, 4}, db);
  D a2 = D::from({4, 6}, da), b2 = D::from({6, 4}, db);
  D y1 = gelu(matmul(a1, b1));
  D y2 = gelu(matmul(a2, b2));
  CHECK(y1.value() == y2.value());
}

TEST_CASE("every op passes finite-difference checks on 10 random instances") {
  for (const auto& c : gradsuite::op_grad_cases()) {
    DYNAMIC_SECTION("op " << c.name) {
      for (uint64_t i = 0; i < 10; ++i) {
        auto report = c.run(splitmix64(0x5eedULL + i * 1000003ULL + std::hash<std::string>{}(c.name)));
        INFO(c.name << " instance " << i << ": " << report.detail
                    << " max_rel_err=" << report.max_rel_err);
        CHECK(report.pass);
      }
    }
  }
}

TEST_CASE("grad_check on a constant function reports zero error") {
  D x = D::param({3}, {1.0, 2.0, 3.0});
  auto report = grad_check<double>(
      [](const D&) { return D::scalar(4.0); }, x, 1e-5, 1e-3);
  CHECK(report.pass);
  CHECK(report.max_rel_err == 0.0);
}

TEST_CASE("grad_check flags non-finite losses") {
  D x = D::param({1}, {1.0});
  auto report = grad_check<double>(
      [](const D& v) { return mmjepa::log(scalar_mul(v, -1.0)); }, x, 1e-5, 1e-3);
  CHECK_FALSE(report.pass);
  CHECK(report.detail.find("non-finite") != std::string::npos);
}

TEST_CASE("gather treats index -1 as zero and routes no gradient there") {
  D x = D::param({2, 2}, {1.0, 2.0, 3.0, 4.0});
  D y = gather_flat(x, {3, -1, 0}, {3});
  CHECK(y.value() == std::vector<double>{4.0, 0.0, 1.0});
  D loss = sum(square(y));
  backward(loss);
  CHECK(x.grad() == std::vector<double>{2.0, 0.0, 0.0, 8.0});
}
