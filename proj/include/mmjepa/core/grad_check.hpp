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

#include <cmath>
#include <functional>
#include <string>

#include "mmjepa/core/ops.hpp"

namespace mmjepa {

struct GradCheckReport {
  bool pass = false;
  double max_rel_err = 0.0;
  std::string detail;
};

// Compares the analytic gradient of f(x) against central finite differences.
// Relative error uses a denominator floor of 1e-3 so that near-zero gradients
// are judged on an absolute scale; a constant f reports error exactly 0.
// Non-finite values anywhere are reported as a failure with their location.
template <typename T>
GradCheckReport grad_check(const std::function<Tensor<T>(const Tensor<T>&)>& f, Tensor<T> x,
                           double step, double tol) {
  require(step > 0, "grad_check requires step > 0");
  GradCheckReport report;

  x.zero_grad();
  Tensor<T> loss = f(x);
  require(loss.size() == 1, "grad_check builder must produce a scalar loss");
  if (!std::isfinite(static_cast<double>(loss.item()))) {
    report.detail = "non-finite loss at base point";
    return report;
  }
  backward(loss);
  std::vector<double> analytic(x.grad().begin(), x.grad().end());

  for (size_t i = 0; i < x.value().size(); ++i) {
    if (!std::isfinite(analytic[i])) {
      report.detail = "non-finite analytic gradient at index " + std::to_string(i);
      return report;
    }
    const T saved = x.value()[i];
    x.value()[i] = saved + static_cast<T>(step);
    const double fp = static_cast<double>(f(x).item());
    x.value()[i] = saved - static_cast<T>(step);
    const double fm = static_cast<double>(f(x).item());
    x.value()[i] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      report.detail = "non-finite perturbed loss at index " + std::to_string(i);
      return report;
    }
    const double numeric = (fp - fm) / (2.0 * step);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-3});
    const double rel = std::abs(analytic[i] - numeric) / denom;
    if (rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.detail = "worst index " + std::to_string(i) + ": analytic " +
                      std::to_string(analytic[i]) + " vs numeric " + std::to_string(numeric);
    }
  }
  report.pass = report.max_rel_err <= tol;
  return report;
}

}  // namespace mmjepa
