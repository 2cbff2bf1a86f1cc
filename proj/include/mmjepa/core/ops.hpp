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

#include <algorithm>
#include <cmath>
#include <memory>

#include "mmjepa/core/meter.hpp"
#include "mmjepa/core/tensor.hpp"

namespace mmjepa {

namespace detail {

template <typename T>
void check_rank2(const Tensor<T>& a, const char* op) {
  require(a.rank() == 2, std::string(op) + " expects a rank-2 tensor, got " + shape_str(a.shape()));
}

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + " shape mismatch: " + shape_str(a.shape()) +
                                      " vs " + shape_str(b.shape()));
}

}  // namespace detail

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_rank2(a, "matmul");
  detail::check_rank2(b, "matmul");
  const int64_t m = a.rows(), k = a.cols(), n = b.cols();
  require(b.rows() == k, "matmul shape mismatch: " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
  std::vector<T> out(static_cast<size_t>(m * n), T(0));
  const auto& av = a.value();
  const auto& bv = b.value();
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t kk = 0; kk < k; ++kk) {
      const T aik = av[static_cast<size_t>(i * k + kk)];
      if (aik == T(0)) continue;
      const T* brow = bv.data() + kk * n;
      T* orow = out.data() + i * n;
      for (int64_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
    }
  }
  count_madds(m * k * n);
  return detail::make_result<T>(
      "matmul", {m, n}, std::move(out), {a, b},
      [m, k, n](typename Tensor<T>::Node& o) {
        auto& A = *o.inputs[0];
        auto& B = *o.inputs[1];
        if (A.needs_grad) {
          for (int64_t i = 0; i < m; ++i) {
            for (int64_t kk = 0; kk < k; ++kk) {
              const T* grow = o.grad.data() + i * n;
              const T* brow = B.value.data() + kk * n;
              T acc = T(0);
              for (int64_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
              A.grad[static_cast<size_t>(i * k + kk)] += acc;
            }
          }
          count_madds(m * k * n);
        }
        if (B.needs_grad) {
          for (int64_t kk = 0; kk < k; ++kk) {
            for (int64_t i = 0; i < m; ++i) {
              const T aik = A.value[static_cast<size_t>(i * k + kk)];
              if (aik == T(0)) continue;
              const T* grow = o.grad.data() + i * n;
              T* brow = B.grad.data() + kk * n;
              for (int64_t j = 0; j < n; ++j) brow[j] += aik * grow[j];
            }
          }
          count_madds(m * k * n);
        }
      });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "add");
  std::vector<T> out(a.value().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return detail::make_result<T>("add", a.shape(), std::move(out), {a, b},
                                [](typename Tensor<T>::Node& o) {
                                  auto& A = *o.inputs[0];
                                  auto& B = *o.inputs[1];
                                  if (A.needs_grad)
                                    for (size_t i = 0; i < o.grad.size(); ++i) A.grad[i] += o.grad[i];
                                  if (B.needs_grad)
                                    for (size_t i = 0; i < o.grad.size(); ++i) B.grad[i] += o.grad[i];
                                });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "sub");
  std::vector<T> out(a.value().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  return detail::make_result<T>("sub", a.shape(), std::move(out), {a, b},
                                [](typename Tensor<T>::Node& o) {
                                  auto& A = *o.inputs[0];
                                  auto& B = *o.inputs[1];
                                  if (A.needs_grad)
                                    for (size_t i = 0; i < o.grad.size(); ++i) A.grad[i] += o.grad[i];
                                  if (B.needs_grad)
                                    for (size_t i = 0; i < o.grad.size(); ++i) B.grad[i] -= o.grad[i];
                                });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "mul");
  std::vector<T> out(a.value().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  count_madds(static_cast<int64_t>(out.size()));
  return detail::make_result<T>(
      "mul", a.shape(), std::move(out), {a, b}, [](typename Tensor<T>::Node& o) {
        auto& A = *o.inputs[0];
        auto& B = *o.inputs[1];
        if (A.needs_grad) {
          for (size_t i = 0; i < o.grad.size(); ++i) A.grad[i] += o.grad[i] * B.value[i];
          count_madds(static_cast<int64_t>(o.grad.size()));
        }
        if (B.needs_grad) {
          for (size_t i = 0; i < o.grad.size(); ++i) B.grad[i] += o.grad[i] * A.value[i];
          count_madds(static_cast<int64_t>(o.grad.size()));
        }
      });
}

template <typename T>
Tensor<T> scalar_mul(const Tensor<T>& a, T c) {
  std::vector<T> out(a.value().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = c * a.value()[i];
  count_madds(static_cast<int64_t>(out.size()));
  return detail::make_result<T>("scalar_mul", a.shape(), std::move(out), {a},
                                [c](typename Tensor<T>::Node& o) {
                                  auto& A = *o.inputs[0];
                                  if (!A.needs_grad) return;
                                  for (size_t i = 0; i < o.grad.size(); ++i)
                                    A.grad[i] += c * o.grad[i];
                                  count_madds(static_cast<int64_t>(o.grad.size()));
                                });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  require(numel(shape) == a.size(), "reshape from " + shape_str(a.shape()) + " to " +
                                        shape_str(shape) + " changes element count");
  return detail::make_result<T>("reshape", std::move(shape), a.value(), {a},
                                [](typename Tensor<T>::Node& o) {
                                  auto& A = *o.inputs[0];
                                  if (!A.needs_grad) return;
                                  for (size_t i = 0; i < o.grad.size(); ++i) A.grad[i] += o.grad[i];
                                });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  detail::check_rank2(a, "transpose");
  const int64_t m = a.rows(), n = a.cols();
  std::vector<T> out(static_cast<size_t>(m * n));
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) out[static_cast<size_t>(j * m + i)] = a.value()[static_cast<size_t>(i * n + j)];
  return detail::make_result<T>("transpose", {n, m}, std::move(out), {a},
                                [m, n](typename Tensor<T>::Node& o) {
                                  auto& A = *o.inputs[0];
                                  if (!A.needs_grad) return;
                                  for (int64_t i = 0; i < m; ++i)
                                    for (int64_t j = 0; j < n; ++j)
                                      A.grad[static_cast<size_t>(i * n + j)] +=
                                          o.grad[static_cast<size_t>(j * m + i)];
                                });
}

// Concatenates rank-2 tensors along axis 0 (rows) or 1 (columns).
template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
  require(!parts.empty(), "concat of zero tensors");
  require(axis == 0 || axis == 1, "concat axis must be 0 or 1");
  for (const auto& p : parts) detail::check_rank2(p, "concat");
  int64_t rows = 0, cols = 0;
  if (axis == 0) {
    cols = parts[0].cols();
    for (const auto& p : parts) {
      require(p.cols() == cols, "concat column mismatch: " + shape_str(p.shape()));
      rows += p.rows();
    }
  } else {
    rows = parts[0].rows();
    for (const auto& p : parts) {
      require(p.rows() == rows, "concat row mismatch: " + shape_str(p.shape()));
      cols += p.cols();
    }
  }
  std::vector<T> out(static_cast<size_t>(rows * cols));
  if (axis == 0) {
    size_t off = 0;
    for (const auto& p : parts) {
      std::copy(p.value().begin(), p.value().end(), out.begin() + static_cast<ptrdiff_t>(off));
      off += p.value().size();
    }
  } else {
    int64_t coff = 0;
    for (const auto& p : parts) {
      const int64_t pc = p.cols();
      for (int64_t i = 0; i < rows; ++i)
        std::copy(p.value().begin() + i * pc, p.value().begin() + (i + 1) * pc,
                  out.begin() + i * cols + coff);
      coff += pc;
    }
  }
  return detail::make_result<T>(
      "concat", {rows, cols}, std::move(out), parts,
      [axis, rows, cols](typename Tensor<T>::Node& o) {
        if (axis == 0) {
          size_t off = 0;
          for (auto& inp : o.inputs) {
            if (inp->needs_grad)
              for (size_t i = 0; i < inp->value.size(); ++i) inp->grad[i] += o.grad[off + i];
            off += inp->value.size();
          }
        } else {
          int64_t coff = 0;
          for (auto& inp : o.inputs) {
            const int64_t pc = inp->shape[1];
            if (inp->needs_grad)
              for (int64_t i = 0; i < rows; ++i)
                for (int64_t j = 0; j < pc; ++j)
                  inp->grad[static_cast<size_t>(i * pc + j)] +=
                      o.grad[static_cast<size_t>(i * cols + coff + j)];
            coff += pc;
          }
        }
      });
}

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& a, int64_t start, int64_t len) {
  detail::check_rank2(a, "slice_rows");
  require(start >= 0 && len >= 1 && start + len <= a.rows(),
          "slice_rows [" + std::to_string(start) + ", " + std::to_string(start + len) +
              ") out of range for " + shape_str(a.shape()));
  const int64_t n = a.cols();
  std::vector<T> out(a.value().begin() + start * n, a.value().begin() + (start + len) * n);
  return detail::make_result<T>("slice_rows", {len, n}, std::move(out), {a},
                                [start, n](typename Tensor<T>::Node& o) {
                                  auto& A = *o.inputs[0];
                                  if (!A.needs_grad) return;
                                  const size_t off = static_cast<size_t>(start * n);
                                  for (size_t i = 0; i < o.grad.size(); ++i)
                                    A.grad[off + i] += o.grad[i];
                                });
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& a, int64_t start, int64_t len) {
  detail::check_rank2(a, "slice_cols");
  require(start >= 0 && len >= 1 && start + len <= a.cols(),
          "slice_cols [" + std::to_string(start) + ", " + std::to_string(start + len) +
              ") out of range for " + shape_str(a.shape()));
  const int64_t m = a.rows(), n = a.cols();
  std::vector<T> out(static_cast<size_t>(m * len));
  for (int64_t i = 0; i < m; ++i)
    std::copy(a.value().begin() + i * n + start, a.value().begin() + i * n + start + len,
              out.begin() + i * len);
  return detail::make_result<T>("slice_cols", {m, len}, std::move(out), {a},
                                [start, len, m, n](typename Tensor<T>::Node& o) {
                                  auto& A = *o.inputs[0];
                                  if (!A.needs_grad) return;
                                  for (int64_t i = 0; i < m; ++i)
                                    for (int64_t j = 0; j < len; ++j)
                                      A.grad[static_cast<size_t>(i * n + start + j)] +=
                                          o.grad[static_cast<size_t>(i * len + j)];
                                });
}

// Element gather over the flattened input; index -1 reads as zero (used for
// zero padding). Backward scatter-adds through the same map.
template <typename T>
Tensor<T> gather_flat(const Tensor<T>& a, std::vector<int64_t> indices, Shape out_shape) {
  require(numel(out_shape) == static_cast<int64_t>(indices.size()),
          "gather_flat index count does not match output shape " + shape_str(out_shape));
  const int64_t limit = a.size();
  for (int64_t idx : indices)
    require(idx >= -1 && idx < limit, "gather_flat index " + std::to_string(idx) +
                                          " out of range for " + shape_str(a.shape()));
  std::vector<T> out(indices.size());
  for (size_t i = 0; i < indices.size(); ++i)
    out[i] = indices[i] >= 0 ? a.value()[static_cast<size_t>(indices[i])] : T(0);
  auto idx = std::make_shared<std::vector<int64_t>>(std::move(indices));
  return detail::make_result<T>("gather", std::move(out_shape), std::move(out), {a},
                                [idx](typename Tensor<T>::Node& o) {
                                  auto& A = *o.inputs[0];
                                  if (!A.needs_grad) return;
                                  for (size_t i = 0; i < o.grad.size(); ++i)
                                    if ((*idx)[i] >= 0)
                                      A.grad[static_cast<size_t>((*idx)[i])] += o.grad[i];
                                });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T s = T(0);
  for (T v : a.value()) s += v;
  return detail::make_result<T>("sum", {1}, {s}, {a}, [](typename Tensor<T>::Node& o) {
    auto& A = *o.inputs[0];
    if (!A.needs_grad) return;
    for (size_t i = 0; i < A.grad.size(); ++i) A.grad[i] += o.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  T s = T(0);
  for (T v : a.value()) s += v;
  const T inv = T(1) / static_cast<T>(a.size());
  count_madds(1);
  return detail::make_result<T>("mean", {1}, {s * inv}, {a},
                                [inv](typename Tensor<T>::Node& o) {
                                  auto& A = *o.inputs[0];
                                  if (!A.needs_grad) return;
                                  const T g = o.grad[0] * inv;
                                  for (size_t i = 0; i < A.grad.size(); ++i) A.grad[i] += g;
                                });
}

namespace detail {

// fwd(x) -> y; dfd(x, y) -> dy/dx.
template <typename T, typename F, typename DF>
Tensor<T> unary_op(const char* name, const Tensor<T>& a, F fwd, DF dfd) {
  std::vector<T> out(a.value().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = fwd(a.value()[i]);
  count_madds(static_cast<int64_t>(out.size()));
  return make_result<T>(name, a.shape(), std::move(out), {a},
                        [dfd](typename Tensor<T>::Node& o) {
                          auto& A = *o.inputs[0];
                          if (!A.needs_grad) return;
                          for (size_t i = 0; i < o.grad.size(); ++i)
                            A.grad[i] += o.grad[i] * dfd(A.value[i], o.value[i]);
                          count_madds(static_cast<int64_t>(o.grad.size()));
                        });
}

}  // namespace detail

template <typename T>
Tensor<T> square(const Tensor<T>& a) {
  return detail::unary_op(
      "square", a, [](T x) { return x * x; }, [](T x, T) { return T(2) * x; });
}

template <typename T>
Tensor<T> sqrt(const Tensor<T>& a) {
  return detail::unary_op(
      "sqrt", a, [](T x) { return std::sqrt(x); },
      [](T, T y) { return T(1) / (T(2) * y); });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& a) {
  return detail::unary_op(
      "exp", a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> log(const Tensor<T>& a) {
  return detail::unary_op(
      "log", a, [](T x) { return std::log(x); }, [](T x, T) { return T(1) / x; });
}

template <typename T>
Tensor<T> cos(const Tensor<T>& a) {
  return detail::unary_op(
      "cos", a, [](T x) { return std::cos(x); }, [](T x, T) { return -std::sin(x); });
}

template <typename T>
Tensor<T> sin(const Tensor<T>& a) {
  return detail::unary_op(
      "sin", a, [](T x) { return std::sin(x); }, [](T x, T) { return std::cos(x); });
}

// tanh approximation; the closed-form derivative keeps finite-difference
// checks tight without the erf branch.
template <typename T>
Tensor<T> gelu(const Tensor<T>& a) {
  constexpr T kC0 = T(0.7978845608028654);  // sqrt(2/pi)
  constexpr T kC1 = T(0.044715);
  return detail::unary_op(
      "gelu", a,
      [](T x) {
        const T u = kC0 * (x + kC1 * x * x * x);
        return T(0.5) * x * (T(1) + std::tanh(u));
      },
      [](T x, T) {
        const T u = kC0 * (x + kC1 * x * x * x);
        const T t = std::tanh(u);
        const T du = kC0 * (T(1) + T(3) * kC1 * x * x);
        return T(0.5) * (T(1) + t) + T(0.5) * x * (T(1) - t * t) * du;
      });
}

template <typename T>
Tensor<T> softplus(const Tensor<T>& a) {
  return detail::unary_op(
      "softplus", a,
      [](T x) { return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x))); },
      [](T x, T) {
        if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
        const T e = std::exp(x);
        return e / (T(1) + e);
      });
}

// Replicates a row vector ({n} or {1,n}) down `rows` rows.
template <typename T>
Tensor<T> broadcast_rows(const Tensor<T>& v, int64_t rows) {
  require(v.rank() == 1 || (v.rank() == 2 && v.rows() == 1),
          "broadcast_rows expects a row vector, got " + shape_str(v.shape()));
  require(rows >= 1, "broadcast_rows needs rows >= 1");
  const int64_t n = v.size();
  std::vector<T> out(static_cast<size_t>(rows * n));
  for (int64_t i = 0; i < rows; ++i)
    std::copy(v.value().begin(), v.value().end(), out.begin() + i * n);
  return detail::make_result<T>("broadcast_rows", {rows, n}, std::move(out), {v},
                                [rows, n](typename Tensor<T>::Node& o) {
                                  auto& V = *o.inputs[0];
                                  if (!V.needs_grad) return;
                                  for (int64_t i = 0; i < rows; ++i)
                                    for (int64_t j = 0; j < n; ++j)
                                      V.grad[static_cast<size_t>(j)] +=
                                          o.grad[static_cast<size_t>(i * n + j)];
                                });
}

// Replicates a column vector ({m} or {m,1}) across `cols` columns.
template <typename T>
Tensor<T> broadcast_cols(const Tensor<T>& v, int64_t cols) {
  require(v.rank() == 1 || (v.rank() == 2 && v.cols() == 1),
          "broadcast_cols expects a column vector, got " + shape_str(v.shape()));
  require(cols >= 1, "broadcast_cols needs cols >= 1");
  const int64_t m = v.size();
  std::vector<T> out(static_cast<size_t>(m * cols));
  for (int64_t i = 0; i < m; ++i)
    std::fill(out.begin() + i * cols, out.begin() + (i + 1) * cols, v.value()[static_cast<size_t>(i)]);
  return detail::make_result<T>("broadcast_cols", {m, cols}, std::move(out), {v},
                                [m, cols](typename Tensor<T>::Node& o) {
                                  auto& V = *o.inputs[0];
                                  if (!V.needs_grad) return;
                                  for (int64_t i = 0; i < m; ++i) {
                                    T acc = T(0);
                                    for (int64_t j = 0; j < cols; ++j)
                                      acc += o.grad[static_cast<size_t>(i * cols + j)];
                                    V.grad[static_cast<size_t>(i)] += acc;
                                  }
                                });
}

// Row-wise standardization without the affine part; epsilon keeps the
// constant-row case well defined (output exactly zero there).
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& a, T eps = T(1e-5)) {
  detail::check_rank2(a, "layer_norm");
  const int64_t m = a.rows(), n = a.cols();
  std::vector<T> out(static_cast<size_t>(m * n));
  auto sigma = std::make_shared<std::vector<T>>(static_cast<size_t>(m));
  for (int64_t i = 0; i < m; ++i) {
    const T* row = a.value().data() + i * n;
    T mu = T(0);
    for (int64_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<T>(n);
    T var = T(0);
    for (int64_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<T>(n);
    const T sd = std::sqrt(var + eps);
    (*sigma)[static_cast<size_t>(i)] = sd;
    T* orow = out.data() + i * n;
    for (int64_t j = 0; j < n; ++j) orow[j] = (row[j] - mu) / sd;
  }
  count_madds(4 * m * n);
  return detail::make_result<T>(
      "layer_norm", {m, n}, std::move(out), {a},
      [m, n, sigma](typename Tensor<T>::Node& o) {
        auto& A = *o.inputs[0];
        if (!A.needs_grad) return;
        for (int64_t i = 0; i < m; ++i) {
          const T* g = o.grad.data() + i * n;
          const T* xh = o.value.data() + i * n;
          T s1 = T(0), s2 = T(0);
          for (int64_t j = 0; j < n; ++j) {
            s1 += g[j];
            s2 += g[j] * xh[j];
          }
          s1 /= static_cast<T>(n);
          s2 /= static_cast<T>(n);
          const T inv_sd = T(1) / (*sigma)[static_cast<size_t>(i)];
          T* ag = A.grad.data() + i * n;
          for (int64_t j = 0; j < n; ++j) ag[j] += (g[j] - s1 - xh[j] * s2) * inv_sd;
        }
        count_madds(4 * m * n);
      });
}

// Row-wise softmax restricted to the allowed keys of the mask. Disallowed
// entries are exactly zero in the output and receive exactly zero gradient.
// The rowwise max over allowed keys is subtracted before exponentiation.
template <typename T>
Tensor<T> masked_softmax(const Tensor<T>& scores, std::shared_ptr<const AttentionMask> mask) {
  detail::check_rank2(scores, "masked_softmax");
  require(mask != nullptr, "masked_softmax requires a mask");
  const int64_t m = scores.rows(), n = scores.cols();
  require(mask->rows == m && mask->cols == n,
          "masked_softmax mask shape [" + std::to_string(mask->rows) + "x" +
              std::to_string(mask->cols) + "] does not match scores " + shape_str(scores.shape()));
  std::vector<T> out(static_cast<size_t>(m * n), T(0));
  int64_t allowed_total = 0;
  for (int64_t i = 0; i < m; ++i) {
    const T* row = scores.value().data() + i * n;
    T mx = -std::numeric_limits<T>::infinity();
    int64_t allowed = 0;
    for (int64_t j = 0; j < n; ++j) {
      if (!mask->at(i, j)) continue;
      ++allowed;
      mx = std::max(mx, row[j]);
    }
    require(allowed >= 1,
            "masked_softmax row " + std::to_string(i) + " has no allowed keys (malformed mask)");
    allowed_total += allowed;
    T z = T(0);
    T* orow = out.data() + i * n;
    for (int64_t j = 0; j < n; ++j) {
      if (!mask->at(i, j)) continue;
      orow[j] = std::exp(row[j] - mx);
      z += orow[j];
    }
    const T inv = T(1) / z;
    for (int64_t j = 0; j < n; ++j)
      if (mask->at(i, j)) orow[j] *= inv;
  }
  count_madds(2 * allowed_total);
  return detail::make_result<T>(
      "masked_softmax", {m, n}, std::move(out), {scores},
      [m, n, mask, allowed_total](typename Tensor<T>::Node& o) {
        auto& A = *o.inputs[0];
        if (!A.needs_grad) return;
        for (int64_t i = 0; i < m; ++i) {
          const T* g = o.grad.data() + i * n;
          const T* y = o.value.data() + i * n;
          T dot = T(0);
          for (int64_t j = 0; j < n; ++j)
            if (mask->at(i, j)) dot += g[j] * y[j];
          T* ag = A.grad.data() + i * n;
          for (int64_t j = 0; j < n; ++j)
            if (mask->at(i, j)) ag[j] += y[j] * (g[j] - dot);
        }
        count_madds(2 * allowed_total);
      });
}

template <typename T>
Tensor<T> masked_softmax(const Tensor<T>& scores, const AttentionMask& mask) {
  return masked_softmax(scores, std::make_shared<const AttentionMask>(mask));
}

template <typename T>
Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) {
  return add(a, b);
}
template <typename T>
Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) {
  return sub(a, b);
}
template <typename T>
Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) {
  return mul(a, b);
}
template <typename T>
Tensor<T> operator*(T c, const Tensor<T>& a) {
  return scalar_mul(a, c);
}

}  // namespace mmjepa
