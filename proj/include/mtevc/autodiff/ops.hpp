// Copyright 2026 The mtevc Authors
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
#include <vector>

#include "mtevc/autodiff/tensor.hpp"

namespace mtevc::autodiff {

namespace detail {

template <class S>
void check_same_shape(const Tensor<S>& a, const Tensor<S>& b,
                      const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

}  // namespace detail

// --- Elementwise binary ----------------------------------------------------

template <class S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  detail::check_same_shape(a, b, "add");
  SVec<S> out(a.size());
  for (long i = 0; i < a.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  auto ai = a.impl(), bi = b.impl();
  return make_result<S>(
      a.shape(), std::move(out), {a, b},
      [ai, bi](TensorImpl<S>& self) {
        if (ai->requires_grad)
          for (size_t i = 0; i < self.grad.size(); ++i)
            ai->grad[i] += self.grad[i];
        if (bi->requires_grad)
          for (size_t i = 0; i < self.grad.size(); ++i)
            bi->grad[i] += self.grad[i];
      },
      "add");
}

template <class S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
  detail::check_same_shape(a, b, "sub");
  SVec<S> out(a.size());
  for (long i = 0; i < a.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  auto ai = a.impl(), bi = b.impl();
  return make_result<S>(
      a.shape(), std::move(out), {a, b},
      [ai, bi](TensorImpl<S>& self) {
        if (ai->requires_grad)
          for (size_t i = 0; i < self.grad.size(); ++i)
            ai->grad[i] += self.grad[i];
        if (bi->requires_grad)
          for (size_t i = 0; i < self.grad.size(); ++i)
            bi->grad[i] -= self.grad[i];
      },
      "sub");
}

template <class S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  detail::check_same_shape(a, b, "mul");
  SVec<S> out(a.size());
  for (long i = 0; i < a.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  auto ai = a.impl(), bi = b.impl();
  return make_result<S>(
      a.shape(), std::move(out), {a, b},
      [ai, bi](TensorImpl<S>& self) {
        if (ai->requires_grad)
          for (size_t i = 0; i < self.grad.size(); ++i)
            ai->grad[i] += self.grad[i] * bi->value[i];
        if (bi->requires_grad)
          for (size_t i = 0; i < self.grad.size(); ++i)
            bi->grad[i] += self.grad[i] * ai->value[i];
      },
      "mul");
}

template <class S>
Tensor<S> scale(const Tensor<S>& a, S c) {
  SVec<S> out(a.size());
  for (long i = 0; i < a.size(); ++i) out[i] = a.data()[i] * c;
  auto ai = a.impl();
  return make_result<S>(
      a.shape(), std::move(out), {a},
      [ai, c](TensorImpl<S>& self) {
        if (ai->requires_grad)
          for (size_t i = 0; i < self.grad.size(); ++i)
            ai->grad[i] += self.grad[i] * c;
      },
      "scale");
}

template <class S>
Tensor<S> add_scalar(const Tensor<S>& a, S c) {
  SVec<S> out(a.size());
  for (long i = 0; i < a.size(); ++i) out[i] = a.data()[i] + c;
  auto ai = a.impl();
  return make_result<S>(
      a.shape(), std::move(out), {a},
      [ai](TensorImpl<S>& self) {
        if (ai->requires_grad)
          for (size_t i = 0; i < self.grad.size(); ++i)
            ai->grad[i] += self.grad[i];
      },
      "add_scalar");
}

// --- Broadcast against a row or column vector ------------------------------

// x [R, C] + b [1, C], broadcast over rows.
template <class S>
Tensor<S> add_rowvec(const Tensor<S>& x, const Tensor<S>& b) {
  if (x.rank() != 2 || b.rank() != 2 || b.dim(0) != 1 || b.dim(1) != x.dim(1))
    throw ShapeError("add_rowvec: got " + shape_str(x.shape()) + " and " +
                     shape_str(b.shape()));
  const long R = x.dim(0), C = x.dim(1);
  SVec<S> out(x.size());
  for (long r = 0; r < R; ++r)
    for (long c = 0; c < C; ++c)
      out[r * C + c] = x.data()[r * C + c] + b.data()[c];
  auto xi = x.impl(), bi = b.impl();
  return make_result<S>(
      x.shape(), std::move(out), {x, b},
      [xi, bi, R, C](TensorImpl<S>& self) {
        if (xi->requires_grad)
          for (size_t i = 0; i < self.grad.size(); ++i)
            xi->grad[i] += self.grad[i];
        if (bi->requires_grad)
          for (long r = 0; r < R; ++r)
            for (long c = 0; c < C; ++c)
              bi->grad[c] += self.grad[r * C + c];
      },
      "add_rowvec");
}

// x [R, C] + b [R, 1], broadcast over columns.
template <class S>
Tensor<S> add_colvec(const Tensor<S>& x, const Tensor<S>& b) {
  if (x.rank() != 2 || b.rank() != 2 || b.dim(1) != 1 || b.dim(0) != x.dim(0))
    throw ShapeError("add_colvec: got " + shape_str(x.shape()) + " and " +
                     shape_str(b.shape()));
  const long R = x.dim(0), C = x.dim(1);
  SVec<S> out(x.size());
  for (long r = 0; r < R; ++r)
    for (long c = 0; c < C; ++c)
      out[r * C + c] = x.data()[r * C + c] + b.data()[r];
  auto xi = x.impl(), bi = b.impl();
  return make_result<S>(
      x.shape(), std::move(out), {x, b},
      [xi, bi, R, C](TensorImpl<S>& self) {
        if (xi->requires_grad)
          for (size_t i = 0; i < self.grad.size(); ++i)
            xi->grad[i] += self.grad[i];
        if (bi->requires_grad)
          for (long r = 0; r < R; ++r)
            for (long c = 0; c < C; ++c)
              bi->grad[r] += self.grad[r * C + c];
      },
      "add_colvec");
}

// x [R, C] * s [R, 1], broadcast over columns.
template <class S>
Tensor<S> mul_colvec(const Tensor<S>& x, const Tensor<S>& s) {
  if (x.rank() != 2 || s.rank() != 2 || s.dim(1) != 1 || s.dim(0) != x.dim(0))
    throw ShapeError("mul_colvec: got " + shape_str(x.shape()) + " and " +
                     shape_str(s.shape()));
  const long R = x.dim(0), C = x.dim(1);
  SVec<S> out(x.size());
  for (long r = 0; r < R; ++r)
    for (long c = 0; c < C; ++c)
      out[r * C + c] = x.data()[r * C + c] * s.data()[r];
  auto xi = x.impl(), si = s.impl();
  return make_result<S>(
      x.shape(), std::move(out), {x, s},
      [xi, si, R, C](TensorImpl<S>& self) {
        if (xi->requires_grad)
          for (long r = 0; r < R; ++r)
            for (long c = 0; c < C; ++c)
              xi->grad[r * C + c] += self.grad[r * C + c] * si->value[r];
        if (si->requires_grad)
          for (long r = 0; r < R; ++r)
            for (long c = 0; c < C; ++c)
              si->grad[r] += self.grad[r * C + c] * xi->value[r * C + c];
      },
      "mul_colvec");
}

// --- Unary activations -----------------------------------------------------

template <class S>
Tensor<S> tanh(const Tensor<S>& x) {
  SVec<S> out(x.size());
  for (long i = 0; i < x.size(); ++i) out[i] = std::tanh(x.data()[i]);
  auto xi = x.impl();
  return make_result<S>(
      x.shape(), std::move(out), {x},
      [xi](TensorImpl<S>& self) {
        if (!xi->requires_grad) return;
        for (size_t i = 0; i < self.grad.size(); ++i) {
          S y = self.value[i];
          xi->grad[i] += self.grad[i] * (S(1) - y * y);
        }
      },
      "tanh");
}

template <class S>
Tensor<S> sigmoid(const Tensor<S>& x) {
  SVec<S> out(x.size());
  for (long i = 0; i < x.size(); ++i)
    out[i] = S(1) / (S(1) + std::exp(-x.data()[i]));
  auto xi = x.impl();
  return make_result<S>(
      x.shape(), std::move(out), {x},
      [xi](TensorImpl<S>& self) {
        if (!xi->requires_grad) return;
        for (size_t i = 0; i < self.grad.size(); ++i) {
          S y = self.value[i];
          xi->grad[i] += self.grad[i] * y * (S(1) - y);
        }
      },
      "sigmoid");
}

template <class S>
Tensor<S> relu(const Tensor<S>& x) {
  SVec<S> out(x.size());
  for (long i = 0; i < x.size(); ++i) out[i] = std::max(x.data()[i], S(0));
  auto xi = x.impl();
  return make_result<S>(
      x.shape(), std::move(out), {x},
      [xi](TensorImpl<S>& self) {
        if (!xi->requires_grad) return;
        for (size_t i = 0; i < self.grad.size(); ++i)
          if (self.value[i] > S(0)) xi->grad[i] += self.grad[i];
      },
      "relu");
}

template <class S>
Tensor<S> softsign(const Tensor<S>& x) {
  SVec<S> out(x.size());
  for (long i = 0; i < x.size(); ++i) {
    S v = x.data()[i];
    out[i] = v / (S(1) + std::abs(v));
  }
  auto xi = x.impl();
  return make_result<S>(
      x.shape(), std::move(out), {x},
      [xi](TensorImpl<S>& self) {
        if (!xi->requires_grad) return;
        for (size_t i = 0; i < self.grad.size(); ++i) {
          S d = S(1) + std::abs(xi->value[i]);
          xi->grad[i] += self.grad[i] / (d * d);
        }
      },
      "softsign");
}

template <class S>
Tensor<S> exp(const Tensor<S>& x) {
  SVec<S> out(x.size());
  for (long i = 0; i < x.size(); ++i) out[i] = std::exp(x.data()[i]);
  auto xi = x.impl();
  return make_result<S>(
      x.shape(), std::move(out), {x},
      [xi](TensorImpl<S>& self) {
        if (!xi->requires_grad) return;
        for (size_t i = 0; i < self.grad.size(); ++i)
          xi->grad[i] += self.grad[i] * self.value[i];
      },
      "exp");
}

// ln|x|; derivative 1/x. Rejects exact zeros.
template <class S>
Tensor<S> log_abs(const Tensor<S>& x) {
  SVec<S> out(x.size());
  for (long i = 0; i < x.size(); ++i) {
    S v = x.data()[i];
    if (v == S(0)) throw SingularityError("log_abs: zero input");
    out[i] = std::log(std::abs(v));
  }
  auto xi = x.impl();
  return make_result<S>(
      x.shape(), std::move(out), {x},
      [xi](TensorImpl<S>& self) {
        if (!xi->requires_grad) return;
        for (size_t i = 0; i < self.grad.size(); ++i)
          xi->grad[i] += self.grad[i] / xi->value[i];
      },
      "log_abs");
}

// --- Shape ops -------------------------------------------------------------

template <class S>
Tensor<S> transpose(const Tensor<S>& x) {
  if (x.rank() != 2) throw ShapeError("transpose: expected rank-2 tensor");
  const long R = x.dim(0), C = x.dim(1);
  SVec<S> out(x.size());
  for (long r = 0; r < R; ++r)
    for (long c = 0; c < C; ++c) out[c * R + r] = x.data()[r * C + c];
  auto xi = x.impl();
  return make_result<S>(
      {C, R}, std::move(out), {x},
      [xi, R, C](TensorImpl<S>& self) {
        if (!xi->requires_grad) return;
        for (long r = 0; r < R; ++r)
          for (long c = 0; c < C; ++c)
            xi->grad[r * C + c] += self.grad[c * R + r];
      },
      "transpose");
}

template <class S>
Tensor<S> reshape(const Tensor<S>& x, Shape shape) {
  if (numel(shape) != x.size())
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                     shape_str(shape));
  SVec<S> out(x.values());
  auto xi = x.impl();
  return make_result<S>(
      std::move(shape), std::move(out), {x},
      [xi](TensorImpl<S>& self) {
        if (!xi->requires_grad) return;
        for (size_t i = 0; i < self.grad.size(); ++i)
          xi->grad[i] += self.grad[i];
      },
      "reshape");
}

template <class S>
Tensor<S> reverse_rows(const Tensor<S>& x) {
  if (x.rank() != 2) throw ShapeError("reverse_rows: expected rank-2 tensor");
  const long R = x.dim(0), C = x.dim(1);
  SVec<S> out(x.size());
  for (long r = 0; r < R; ++r)
    for (long c = 0; c < C; ++c)
      out[r * C + c] = x.data()[(R - 1 - r) * C + c];
  auto xi = x.impl();
  return make_result<S>(
      x.shape(), std::move(out), {x},
      [xi, R, C](TensorImpl<S>& self) {
        if (!xi->requires_grad) return;
        for (long r = 0; r < R; ++r)
          for (long c = 0; c < C; ++c)
            xi->grad[(R - 1 - r) * C + c] += self.grad[r * C + c];
      },
      "reverse_rows");
}

template <class S>
Tensor<S> slice_rows(const Tensor<S>& x, long r0, long r1) {
  if (x.rank() != 2) throw ShapeError("slice_rows: expected rank-2 tensor");
  if (r0 < 0 || r1 > x.dim(0) || r0 >= r1)
    throw ShapeError("slice_rows: range [" + std::to_string(r0) + "," +
                     std::to_string(r1) + ") invalid for " +
                     shape_str(x.shape()));
  const long C = x.dim(1), n = r1 - r0;
  SVec<S> out(x.data() + r0 * C, x.data() + r1 * C);
  auto xi = x.impl();
  return make_result<S>(
      {n, C}, std::move(out), {x},
      [xi, r0, C](TensorImpl<S>& self) {
        if (!xi->requires_grad) return;
        for (size_t i = 0; i < self.grad.size(); ++i)
          xi->grad[r0 * C + i] += self.grad[i];
      },
      "slice_rows");
}

template <class S>
Tensor<S> slice_cols(const Tensor<S>& x, long c0, long c1) {
  if (x.rank() != 2) throw ShapeError("slice_cols: expected rank-2 tensor");
  if (c0 < 0 || c1 > x.dim(1) || c0 >= c1)
    throw ShapeError("slice_cols: range [" + std::to_string(c0) + "," +
                     std::to_string(c1) + ") invalid for " +
                     shape_str(x.shape()));
  const long R = x.dim(0), C = x.dim(1), n = c1 - c0;
  SVec<S> out(R * n);
  for (long r = 0; r < R; ++r)
    for (long c = 0; c < n; ++c) out[r * n + c] = x.data()[r * C + c0 + c];
  auto xi = x.impl();
  return make_result<S>(
      {R, n}, std::move(out), {x},
      [xi, c0, R, C, n](TensorImpl<S>& self) {
        if (!xi->requires_grad) return;
        for (long r = 0; r < R; ++r)
          for (long c = 0; c < n; ++c)
            xi->grad[r * C + c0 + c] += self.grad[r * n + c];
      },
      "slice_cols");
}

template <class S>
Tensor<S> concat_rows(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1))
    throw ShapeError("concat_rows: got " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  const long Ra = a.dim(0), Rb = b.dim(0), C = a.dim(1);
  SVec<S> out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.data(), a.data() + a.size());
  out.insert(out.end(), b.data(), b.data() + b.size());
  auto ai = a.impl(), bi = b.impl();
  return make_result<S>(
      {Ra + Rb, C}, std::move(out), {a, b},
      [ai, bi, Ra, C](TensorImpl<S>& self) {
        const long na = Ra * C;
        if (ai->requires_grad)
          for (long i = 0; i < na; ++i) ai->grad[i] += self.grad[i];
        if (bi->requires_grad)
          for (size_t i = na; i < self.grad.size(); ++i)
            bi->grad[i - na] += self.grad[i];
      },
      "concat_rows");
}

template <class S>
Tensor<S> concat_cols(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(0) != b.dim(0))
    throw ShapeError("concat_cols: got " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  const long R = a.dim(0), Ca = a.dim(1), Cb = b.dim(1);
  SVec<S> out(R * (Ca + Cb));
  for (long r = 0; r < R; ++r) {
    std::copy(a.data() + r * Ca, a.data() + (r + 1) * Ca,
              out.begin() + r * (Ca + Cb));
    std::copy(b.data() + r * Cb, b.data() + (r + 1) * Cb,
              out.begin() + r * (Ca + Cb) + Ca);
  }
  auto ai = a.impl(), bi = b.impl();
  return make_result<S>(
      {R, Ca + Cb}, std::move(out), {a, b},
      [ai, bi, R, Ca, Cb](TensorImpl<S>& self) {
        const long C = Ca + Cb;
        for (long r = 0; r < R; ++r) {
          if (ai->requires_grad)
            for (long c = 0; c < Ca; ++c)
              ai->grad[r * Ca + c] += self.grad[r * C + c];
          if (bi->requires_grad)
            for (long c = 0; c < Cb; ++c)
              bi->grad[r * Cb + c] += self.grad[r * C + Ca + c];
        }
      },
      "concat_cols");
}

// Repeat a [1, C] row n times into [n, C].
template <class S>
Tensor<S> tile_rows(const Tensor<S>& row, long n) {
  if (row.rank() != 2 || row.dim(0) != 1)
    throw ShapeError("tile_rows: expected [1, C], got " +
                     shape_str(row.shape()));
  const long C = row.dim(1);
  SVec<S> out(n * C);
  for (long r = 0; r < n; ++r)
    std::copy(row.data(), row.data() + C, out.begin() + r * C);
  auto ri = row.impl();
  return make_result<S>(
      {n, C}, std::move(out), {row},
      [ri, n, C](TensorImpl<S>& self) {
        if (!ri->requires_grad) return;
        for (long r = 0; r < n; ++r)
          for (long c = 0; c < C; ++c) ri->grad[c] += self.grad[r * C + c];
      },
      "tile_rows");
}

// --- Reductions (accumulate in double) -------------------------------------

template <class S>
Tensor<S> sum(const Tensor<S>& x) {
  double acc = 0.0;
  for (long i = 0; i < x.size(); ++i) acc += static_cast<double>(x.data()[i]);
  auto xi = x.impl();
  return make_result<S>(
      {1}, {static_cast<S>(acc)}, {x},
      [xi](TensorImpl<S>& self) {
        if (!xi->requires_grad) return;
        for (size_t i = 0; i < xi->grad.size(); ++i)
          xi->grad[i] += self.grad[0];
      },
      "sum");
}

template <class S>
Tensor<S> mean(const Tensor<S>& x) {
  if (x.size() == 0) throw ShapeError("mean: empty tensor");
  double acc = 0.0;
  for (long i = 0; i < x.size(); ++i) acc += static_cast<double>(x.data()[i]);
  const long n = x.size();
  auto xi = x.impl();
  return make_result<S>(
      {1}, {static_cast<S>(acc / n)}, {x},
      [xi, n](TensorImpl<S>& self) {
        if (!xi->requires_grad) return;
        S g = self.grad[0] / static_cast<S>(n);
        for (size_t i = 0; i < xi->grad.size(); ++i) xi->grad[i] += g;
      },
      "mean");
}

// --- Matrix product --------------------------------------------------------

template <class S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw ShapeError("matmul: got " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  const long M = a.dim(0), K = a.dim(1), N = b.dim(1);
  SVec<S> out(M * N);
  mat_view(out, M, N).noalias() = mat2d(a) * mat2d(b);
  auto ai = a.impl(), bi = b.impl();
  return make_result<S>(
      {M, N}, std::move(out), {a, b},
      [ai, bi, M, K, N](TensorImpl<S>& self) {
        CMatMap<S> g(self.grad.data(), M, N);
        if (ai->requires_grad) {
          CMatMap<S> bm(bi->value.data(), K, N);
          MatMap<S>(ai->grad.data(), M, K).noalias() += g * bm.transpose();
        }
        if (bi->requires_grad) {
          CMatMap<S> am(ai->value.data(), M, K);
          MatMap<S>(bi->grad.data(), K, N).noalias() += am.transpose() * g;
        }
      },
      "matmul");
}

// Affine layer y = x * w + b with x [N, in], w [in, out], b [1, out].
template <class S>
Tensor<S> dense(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b) {
  return add_rowvec(matmul(x, w), b);
}

// --- Losses ----------------------------------------------------------------

// Mean absolute error over all elements. Subgradient 0 at ties.
template <class S>
Tensor<S> l1_loss(const Tensor<S>& pred, const Tensor<S>& target) {
  detail::check_same_shape(pred, target, "l1_loss");
  if (pred.size() == 0) throw ShapeError("l1_loss: empty tensor");
  double acc = 0.0;
  for (long i = 0; i < pred.size(); ++i)
    acc += std::abs(static_cast<double>(pred.data()[i]) -
                    static_cast<double>(target.data()[i]));
  const long n = pred.size();
  auto pi = pred.impl(), ti = target.impl();
  return make_result<S>(
      {1}, {static_cast<S>(acc / n)}, {pred, target},
      [pi, ti, n](TensorImpl<S>& self) {
        S g = self.grad[0] / static_cast<S>(n);
        for (long i = 0; i < n; ++i) {
          S d = pi->value[i] - ti->value[i];
          S s = d > S(0) ? g : (d < S(0) ? -g : S(0));
          if (pi->requires_grad) pi->grad[i] += s;
          if (ti->requires_grad) ti->grad[i] -= s;
        }
      },
      "l1_loss");
}

// Softmax cross entropy from raw logits [N, C] against integer targets,
// averaged over rows. Uses the shifted log-sum-exp for stability.
template <class S>
Tensor<S> cross_entropy_with_logits(const Tensor<S>& logits,
                                    const std::vector<int>& targets) {
  if (logits.rank() != 2)
    throw ShapeError("cross_entropy_with_logits: expected [N, C] logits");
  const long N = logits.dim(0), C = logits.dim(1);
  if (static_cast<long>(targets.size()) != N)
    throw ShapeError("cross_entropy_with_logits: " + std::to_string(targets.size()) +
                     " targets for " + std::to_string(N) + " rows");
  for (int t : targets)
    if (t < 0 || t >= C)
      throw InvalidInput("cross_entropy_with_logits: target " + std::to_string(t) +
                         " outside [0," + std::to_string(C) + ")");
  double acc = 0.0;
  // Per-row softmax denominators are reused by the backward pass.
  auto softmax = std::make_shared<SVec<S>>(N * C);
  for (long r = 0; r < N; ++r) {
    const S* row = logits.data() + r * C;
    S m = *std::max_element(row, row + C);
    double z = 0.0;
    for (long c = 0; c < C; ++c) z += std::exp(static_cast<double>(row[c] - m));
    double lse = static_cast<double>(m) + std::log(z);
    acc += lse - static_cast<double>(row[targets[r]]);
    for (long c = 0; c < C; ++c)
      (*softmax)[r * C + c] =
          static_cast<S>(std::exp(static_cast<double>(row[c] - m)) / z);
  }
  auto li = logits.impl();
  auto tgt = std::make_shared<std::vector<int>>(targets);
  return make_result<S>(
      {1}, {static_cast<S>(acc / N)}, {logits},
      [li, softmax, tgt, N, C](TensorImpl<S>& self) {
        if (!li->requires_grad) return;
        S g = self.grad[0] / static_cast<S>(N);
        for (long r = 0; r < N; ++r) {
          for (long c = 0; c < C; ++c)
            li->grad[r * C + c] += g * (*softmax)[r * C + c];
          li->grad[r * C + (*tgt)[r]] -= g;
        }
      },
      "cross_entropy_with_logits");
}

// Negative log density of z under a standard normal, summed over elements:
// 0.5 * sum(z^2 + ln(2*pi)).
template <class S>
Tensor<S> gaussian_nll(const Tensor<S>& z) {
  const double kLn2Pi = 1.8378770664093453;
  double acc = 0.0;
  for (long i = 0; i < z.size(); ++i) {
    double v = static_cast<double>(z.data()[i]);
    acc += 0.5 * (v * v + kLn2Pi);
  }
  auto zi = z.impl();
  return make_result<S>(
      {1}, {static_cast<S>(acc)}, {z},
      [zi](TensorImpl<S>& self) {
        if (!zi->requires_grad) return;
        for (size_t i = 0; i < zi->grad.size(); ++i)
          zi->grad[i] += self.grad[0] * zi->value[i];
      },
      "gaussian_nll");
}

// Row-wise softmax of [N, C].
template <class S>
Tensor<S> softmax_rows(const Tensor<S>& x) {
  if (x.rank() != 2) throw ShapeError("softmax_rows: expected rank-2 tensor");
  const long N = x.dim(0), C = x.dim(1);
  SVec<S> out(x.size());
  for (long r = 0; r < N; ++r) {
    const S* row = x.data() + r * C;
    S m = *std::max_element(row, row + C);
    double z = 0.0;
    for (long c = 0; c < C; ++c) z += std::exp(static_cast<double>(row[c] - m));
    for (long c = 0; c < C; ++c)
      out[r * C + c] =
          static_cast<S>(std::exp(static_cast<double>(row[c] - m)) / z);
  }
  auto xi = x.impl();
  return make_result<S>(
      x.shape(), std::move(out), {x},
      [xi, N, C](TensorImpl<S>& self) {
        if (!xi->requires_grad) return;
        for (long r = 0; r < N; ++r) {
          double dot = 0.0;
          for (long c = 0; c < C; ++c)
            dot += static_cast<double>(self.grad[r * C + c]) *
                   static_cast<double>(self.value[r * C + c]);
          for (long c = 0; c < C; ++c)
            xi->grad[r * C + c] +=
                self.value[r * C + c] *
                (self.grad[r * C + c] - static_cast<S>(dot));
        }
      },
      "softmax_rows");
}

}  // namespace mtevc::autodiff
