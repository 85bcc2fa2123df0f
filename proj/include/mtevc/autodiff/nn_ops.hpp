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

#include <memory>
#include <vector>

#include "mtevc/autodiff/ops.hpp"
#include "mtevc/autodiff/tensor.hpp"

namespace mtevc::autodiff {

enum class PadMode { kCausal, kSame, kValid };

namespace detail {

inline long ceil_div(long a, long b) {
  return a >= 0 ? (a + b - 1) / b : -((-a) / b);
}

inline long floor_div(long a, long b) {
  return a >= 0 ? a / b : -(((-a) + b - 1) / b);
}

// Copies a [A, B, K] kernel into tap-major form where tap k occupies the
// contiguous rows [k*rows, (k+1)*rows). swap_ab reads the kernel with its
// first two axes exchanged, which is how a shared kernel is seen from the
// transposed side.
template <class S>
EMat<S> tap_major_kernel(const S* w, long a, long b, long k, bool swap_ab) {
  const long rows = swap_ab ? b : a;
  const long cols = swap_ab ? a : b;
  EMat<S> out(k * rows, cols);
  for (long i = 0; i < a; ++i)
    for (long j = 0; j < b; ++j)
      for (long t = 0; t < k; ++t) {
        const S v = w[(i * b + j) * k + t];
        if (swap_ab)
          out(t * rows + j, i) = v;
        else
          out(t * rows + i, j) = v;
      }
  return out;
}

template <class S>
void scatter_tap_major(S* dw, const EMat<S>& dtap, long a, long b, long k,
                       bool swap_ab) {
  const long rows = swap_ab ? b : a;
  for (long i = 0; i < a; ++i)
    for (long j = 0; j < b; ++j)
      for (long t = 0; t < k; ++t) {
        const S v = swap_ab ? dtap(t * rows + j, i) : dtap(t * rows + i, j);
        dw[(i * b + j) * k + t] += v;
      }
}

}  // namespace detail

// Dilated 1-D convolution over [channels, time] data, no bias.
//   x [Cin, T], kernel [Cout, Cin, K] -> y [Cout, T_out]
// Causal padding puts (K-1)*dilation zeros on the left only, so y[:, t]
// depends on x[:, <= t] and the length is preserved at stride 1. Same
// padding centers the kernel (odd K) and also preserves length; valid
// padding adds none.
template <class S>
Tensor<S> conv1d(const Tensor<S>& x, const Tensor<S>& w, long dilation = 1,
                 PadMode pad = PadMode::kCausal, long stride = 1) {
  if (x.rank() != 2 || w.rank() != 3)
    throw ShapeError("conv1d: expected x [Cin, T] and kernel [Cout, Cin, K]");
  if (dilation < 1 || stride < 1)
    throw InvalidInput("conv1d: dilation and stride must be >= 1");
  const long cin = x.dim(0), T = x.dim(1);
  const long cout = w.dim(0), kernel = w.dim(2);
  if (w.dim(1) != cin)
    throw ShapeError("conv1d: kernel expects " + std::to_string(w.dim(1)) +
                     " input channels, input has " + std::to_string(cin));
  if (pad == PadMode::kSame && kernel % 2 == 0)
    throw InvalidInput("conv1d: same padding requires an odd kernel");
  const long span = (kernel - 1) * dilation;
  const long pad_left = pad == PadMode::kCausal ? span
                        : pad == PadMode::kSame ? span / 2
                                                : 0;
  const long pad_right = pad == PadMode::kSame ? span / 2 : 0;
  if (T + pad_left + pad_right < span + 1)
    throw ShapeError("conv1d: input length " + std::to_string(T) +
                     " shorter than kernel span " + std::to_string(span + 1));
  const long t_out = (T + pad_left + pad_right - span - 1) / stride + 1;

  EMat<S> taps = detail::tap_major_kernel(w.data(), cout, cin, kernel, false);
  SVec<S> out(cout * t_out, S(0));
  {
    auto y = mat_view(out, cout, t_out);
    auto xm = mat2d(x);
    for (long k = 0; k < kernel; ++k) {
      const long off = k * dilation - pad_left;
      const long j0 = std::max(0L, detail::ceil_div(-off, stride));
      const long j1 =
          std::min(t_out - 1, detail::floor_div(T - 1 - off, stride));
      if (j0 > j1) continue;
      auto wk = taps.block(k * cout, 0, cout, cin);
      if (stride == 1) {
        y.block(0, j0, cout, j1 - j0 + 1).noalias() +=
            wk * xm.block(0, j0 + off, cin, j1 - j0 + 1);
      } else {
        for (long j = j0; j <= j1; ++j)
          y.col(j).noalias() += wk * xm.col(j * stride + off);
      }
    }
  }

  auto xi = x.impl(), wi = w.impl();
  return make_result<S>(
      {cout, t_out}, std::move(out), {x, w},
      [xi, wi, kernel, dilation, stride, pad_left, cin, cout, T,
       t_out](TensorImpl<S>& self) {
        CMatMap<S> g(self.grad.data(), cout, t_out);
        CMatMap<S> xm(xi->value.data(), cin, T);
        EMat<S> taps =
            detail::tap_major_kernel(wi->value.data(), cout, cin, kernel,
                                     false);
        EMat<S> dtaps;
        if (wi->requires_grad) dtaps = EMat<S>::Zero(kernel * cout, cin);
        for (long k = 0; k < kernel; ++k) {
          const long off = k * dilation - pad_left;
          const long j0 = std::max(0L, detail::ceil_div(-off, stride));
          const long j1 =
              std::min(t_out - 1, detail::floor_div(T - 1 - off, stride));
          if (j0 > j1) continue;
          auto wk = taps.block(k * cout, 0, cout, cin);
          if (stride == 1) {
            const long n = j1 - j0 + 1;
            auto gb = g.block(0, j0, cout, n);
            if (xi->requires_grad) {
              MatMap<S> dx(xi->grad.data(), cin, T);
              dx.block(0, j0 + off, cin, n).noalias() += wk.transpose() * gb;
            }
            if (wi->requires_grad)
              dtaps.block(k * cout, 0, cout, cin).noalias() +=
                  gb * xm.block(0, j0 + off, cin, n).transpose();
          } else {
            for (long j = j0; j <= j1; ++j) {
              const long src = j * stride + off;
              if (xi->requires_grad) {
                MatMap<S> dx(xi->grad.data(), cin, T);
                dx.col(src).noalias() += wk.transpose() * g.col(j);
              }
              if (wi->requires_grad)
                dtaps.block(k * cout, 0, cout, cin).noalias() +=
                    g.col(j) * xm.col(src).transpose();
            }
          }
        }
        if (wi->requires_grad)
          detail::scatter_tap_major(wi->grad.data(), dtaps, cout, cin, kernel,
                                    false);
      },
      "conv1d");
}

// Transposed 1-D convolution (stride-s upsampling), no bias.
//   x [Cin, T], kernel [Cin, Cout, K] -> y [Cout, T*s]
// The kernel's first axis matches this op's input channels, so a kernel
// shared with conv1d acts as its adjoint. The full scatter result has
// (T-1)*s + K samples; it is center-cropped by (K-s)/2 per side to make
// the output length exactly T*s. Requires s | K and K >= s with K - s
// even; K = 2s gives overlapping taps without checkerboard gaps.
template <class S>
Tensor<S> conv1d_transposed(const Tensor<S>& x, const Tensor<S>& w,
                            long stride) {
  if (x.rank() != 2 || w.rank() != 3)
    throw ShapeError(
        "conv1d_transposed: expected x [Cin, T] and kernel [Cin, Cout, K]");
  const long cin = x.dim(0), T = x.dim(1);
  const long cout = w.dim(1), kernel = w.dim(2);
  if (w.dim(0) != cin)
    throw ShapeError("conv1d_transposed: kernel expects " +
                     std::to_string(w.dim(0)) + " input channels, input has " +
                     std::to_string(cin));
  if (stride < 1 || kernel < stride || kernel % stride != 0 ||
      (kernel - stride) % 2 != 0)
    throw InvalidInput("conv1d_transposed: kernel " + std::to_string(kernel) +
                       " and stride " + std::to_string(stride) +
                       " must satisfy stride | kernel and even kernel-stride");
  const long taps_per_phase = kernel / stride;
  const long phase_len = T + taps_per_phase - 1;
  const long full_len = (T - 1) * stride + kernel;
  const long crop = (kernel - stride) / 2;
  const long out_len = T * stride;

  EMat<S> taps = detail::tap_major_kernel(w.data(), cin, cout, kernel, true);
  SVec<S> out(cout * out_len);
  {
    EMat<S> full = EMat<S>::Zero(cout, full_len);
    auto xm = mat2d(x);
    EMat<S> tmp(cout, phase_len);
    for (long p = 0; p < stride; ++p) {
      tmp.setZero();
      for (long j = 0; j < taps_per_phase; ++j)
        tmp.block(0, j, cout, T).noalias() +=
            taps.block((p + j * stride) * cout, 0, cout, cin) * xm;
      for (long q = 0; q < phase_len; ++q)
        full.col(q * stride + p) = tmp.col(q);
    }
    mat_view(out, cout, out_len) = full.middleCols(crop, out_len);
  }

  auto xi = x.impl(), wi = w.impl();
  return make_result<S>(
      {cout, out_len}, std::move(out), {x, w},
      [xi, wi, stride, taps_per_phase, phase_len, full_len, crop, cin, cout, T,
       kernel, out_len](TensorImpl<S>& self) {
        CMatMap<S> g(self.grad.data(), cout, out_len);
        CMatMap<S> xm(xi->value.data(), cin, T);
        EMat<S> gfull = EMat<S>::Zero(cout, full_len);
        gfull.middleCols(crop, out_len) = g;
        EMat<S> taps =
            detail::tap_major_kernel(wi->value.data(), cin, cout, kernel,
                                     true);
        EMat<S> dtaps;
        if (wi->requires_grad) dtaps = EMat<S>::Zero(kernel * cout, cin);
        EMat<S> gtmp(cout, phase_len);
        for (long p = 0; p < stride; ++p) {
          for (long q = 0; q < phase_len; ++q)
            gtmp.col(q) = gfull.col(q * stride + p);
          for (long j = 0; j < taps_per_phase; ++j) {
            auto gb = gtmp.block(0, j, cout, T);
            const long k = p + j * stride;
            if (xi->requires_grad) {
              MatMap<S> dx(xi->grad.data(), cin, T);
              dx.noalias() +=
                  taps.block(k * cout, 0, cout, cin).transpose() * gb;
            }
            if (wi->requires_grad)
              dtaps.block(k * cout, 0, cout, cin).noalias() +=
                  gb * xm.transpose();
          }
        }
        if (wi->requires_grad)
          detail::scatter_tap_major(wi->grad.data(), dtaps, cin, cout, kernel,
                                    true);
      },
      "conv1d_transposed");
}

// Single-direction LSTM over a [T, Cin] sequence, zero initial state.
//   wx [Cin, 4H], wh [H, 4H], b [1, 4H] -> output [T, H]
// Gate order along the 4H axis is input, forget, cell, output.
template <class S>
Tensor<S> lstm_sequence(const Tensor<S>& x, const Tensor<S>& wx,
                        const Tensor<S>& wh, const Tensor<S>& b) {
  if (x.rank() != 2 || wx.rank() != 2 || wh.rank() != 2 || b.rank() != 2)
    throw ShapeError("lstm_sequence: expected rank-2 tensors");
  const long T = x.dim(0), cin = x.dim(1);
  if (wx.dim(1) % 4 != 0)
    throw ShapeError("lstm_sequence: gate width " + std::to_string(wx.dim(1)) +
                     " not divisible by 4");
  const long H = wx.dim(1) / 4;
  if (wx.dim(0) != cin || wh.dim(0) != H || wh.dim(1) != 4 * H ||
      b.dim(0) != 1 || b.dim(1) != 4 * H)
    throw ShapeError("lstm_sequence: inconsistent shapes x" +
                     shape_str(x.shape()) + " wx" + shape_str(wx.shape()) +
                     " wh" + shape_str(wh.shape()) + " b" +
                     shape_str(b.shape()));

  auto gates = std::make_shared<EMat<S>>(T, 4 * H);  // activated i,f,g,o
  auto cells = std::make_shared<EMat<S>>(T, H);
  auto tanh_c = std::make_shared<EMat<S>>(T, H);
  auto h_prev = std::make_shared<EMat<S>>(T, H);     // row t holds h_{t-1}

  SVec<S> out(T * H);
  {
    auto y = mat_view(out, T, H);
    auto xm = mat2d(x);
    auto wxm = mat2d(wx);
    auto whm = mat2d(wh);
    CVecMap<S> bv(b.data(), 4 * H);
    gates->noalias() = xm * wxm;
    gates->rowwise() += bv.transpose();
    for (long t = 0; t < T; ++t) {
      if (t == 0)
        h_prev->row(0).setZero();
      else
        h_prev->row(t) = y.row(t - 1);
      gates->row(t).noalias() += h_prev->row(t) * whm;
      auto i = gates->row(t).segment(0, H).array();
      auto f = gates->row(t).segment(H, H).array();
      auto g = gates->row(t).segment(2 * H, H).array();
      auto o = gates->row(t).segment(3 * H, H).array();
      i = S(1) / (S(1) + (-i).exp());
      f = S(1) / (S(1) + (-f).exp());
      g = g.tanh();
      o = S(1) / (S(1) + (-o).exp());
      if (t == 0)
        cells->row(t).array() = i * g;
      else
        cells->row(t).array() = f * cells->row(t - 1).array() + i * g;
      tanh_c->row(t).array() = cells->row(t).array().tanh();
      y.row(t).array() = o * tanh_c->row(t).array();
    }
  }

  auto xi = x.impl(), wxi = wx.impl(), whi = wh.impl(), bi = b.impl();
  return make_result<S>(
      {T, H}, std::move(out), {x, wx, wh, b},
      [xi, wxi, whi, bi, gates, cells, tanh_c, h_prev, T, cin,
       H](TensorImpl<S>& self) {
        CMatMap<S> gy(self.grad.data(), T, H);
        CMatMap<S> whm(whi->value.data(), H, 4 * H);
        EMat<S> dgates(T, 4 * H);
        using RowVec = Eigen::Matrix<S, 1, Eigen::Dynamic>;
        RowVec dh_rec = RowVec::Zero(H);
        RowVec dc_rec = RowVec::Zero(H);
        RowVec dh(H), dc(H);
        for (long t = T - 1; t >= 0; --t) {
          auto i = gates->row(t).segment(0, H).array();
          auto f = gates->row(t).segment(H, H).array();
          auto g = gates->row(t).segment(2 * H, H).array();
          auto o = gates->row(t).segment(3 * H, H).array();
          auto tc = tanh_c->row(t).array();
          dh.array() = gy.row(t).array() + dh_rec.array();
          dc.array() =
              dh.array() * o * (S(1) - tc * tc) + dc_rec.array();
          auto row = dgates.row(t);
          row.segment(0, H).array() =
              dc.array() * g * i * (S(1) - i);             // input gate
          if (t == 0)
            row.segment(H, H).setZero();                   // c_{-1} = 0
          else
            row.segment(H, H).array() = dc.array() *
                                        cells->row(t - 1).array() * f *
                                        (S(1) - f);        // forget gate
          row.segment(2 * H, H).array() =
              dc.array() * i * (S(1) - g * g);             // cell candidate
          row.segment(3 * H, H).array() =
              dh.array() * tc * o * (S(1) - o);            // output gate
          dh_rec.noalias() = row * whm.transpose();
          dc_rec.array() = dc.array() * f;
        }
        if (xi->requires_grad) {
          CMatMap<S> wxm(wxi->value.data(), cin, 4 * H);
          MatMap<S>(xi->grad.data(), T, cin).noalias() +=
              dgates * wxm.transpose();
        }
        if (wxi->requires_grad) {
          CMatMap<S> xm(xi->value.data(), T, cin);
          MatMap<S>(wxi->grad.data(), cin, 4 * H).noalias() +=
              xm.transpose() * dgates;
        }
        if (whi->requires_grad)
          MatMap<S>(whi->grad.data(), H, 4 * H).noalias() +=
              h_prev->transpose() * dgates;
        if (bi->requires_grad)
          MatMap<S>(bi->grad.data(), 1, 4 * H).noalias() +=
              dgates.colwise().sum();
      },
      "lstm_sequence");
}

// Gather rows of an embedding table: table [V, E], ids [N] -> [N, E].
template <class S>
Tensor<S> embedding_rows(const Tensor<S>& table, const std::vector<int>& ids) {
  if (table.rank() != 2) throw ShapeError("embedding_rows: expected [V, E]");
  const long V = table.dim(0), E = table.dim(1);
  const long N = static_cast<long>(ids.size());
  for (int id : ids)
    if (id < 0 || id >= V)
      throw UnknownCodeError("embedding_rows: code " + std::to_string(id) +
                             " outside [0," + std::to_string(V) + ")");
  SVec<S> out(N * E);
  for (long n = 0; n < N; ++n)
    std::copy(table.data() + ids[n] * E, table.data() + (ids[n] + 1) * E,
              out.begin() + n * E);
  auto ti = table.impl();
  auto idv = std::make_shared<std::vector<int>>(ids);
  return make_result<S>(
      {N, E}, std::move(out), {table},
      [ti, idv, E](TensorImpl<S>& self) {
        if (!ti->requires_grad) return;
        for (size_t n = 0; n < idv->size(); ++n)
          for (long e = 0; e < E; ++e)
            ti->grad[(*idv)[n] * E + e] += self.grad[n * E + e];
      },
      "embedding_rows");
}

// Gather columns of an embedding table: table [E, V], ids [N] -> [E, N].
template <class S>
Tensor<S> embedding_cols(const Tensor<S>& table, const std::vector<int>& ids) {
  if (table.rank() != 2) throw ShapeError("embedding_cols: expected [E, V]");
  const long E = table.dim(0), V = table.dim(1);
  const long N = static_cast<long>(ids.size());
  for (int id : ids)
    if (id < 0 || id >= V)
      throw UnknownCodeError("embedding_cols: code " + std::to_string(id) +
                             " outside [0," + std::to_string(V) + ")");
  SVec<S> out(E * N);
  for (long e = 0; e < E; ++e)
    for (long n = 0; n < N; ++n)
      out[e * N + n] = table.data()[e * V + ids[n]];
  auto ti = table.impl();
  auto idv = std::make_shared<std::vector<int>>(ids);
  return make_result<S>(
      {E, N}, std::move(out), {table},
      [ti, idv, E, V](TensorImpl<S>& self) {
        if (!ti->requires_grad) return;
        const long N2 = static_cast<long>(idv->size());
        for (long e = 0; e < E; ++e)
          for (long n = 0; n < N2; ++n)
            ti->grad[e * V + (*idv)[n]] += self.grad[e * N2 + n];
      },
      "embedding_cols");
}

// Fold time into channels by interleaved pairs: [C, T] -> [2C, T/2] with
// row 2c holding the even-index samples of channel c and row 2c+1 the odd.
template <class S>
Tensor<S> squeeze2(const Tensor<S>& x) {
  if (x.rank() != 2) throw ShapeError("squeeze2: expected rank-2 tensor");
  const long C = x.dim(0), T = x.dim(1);
  if (T % 2 != 0)
    throw ShapeError("squeeze2: time length " + std::to_string(T) + " is odd");
  const long U = T / 2;
  SVec<S> out(x.size());
  for (long c = 0; c < C; ++c)
    for (long u = 0; u < U; ++u) {
      out[(2 * c) * U + u] = x.data()[c * T + 2 * u];
      out[(2 * c + 1) * U + u] = x.data()[c * T + 2 * u + 1];
    }
  auto xi = x.impl();
  return make_result<S>(
      {2 * C, U}, std::move(out), {x},
      [xi, C, T, U](TensorImpl<S>& self) {
        if (!xi->requires_grad) return;
        for (long c = 0; c < C; ++c)
          for (long u = 0; u < U; ++u) {
            xi->grad[c * T + 2 * u] += self.grad[(2 * c) * U + u];
            xi->grad[c * T + 2 * u + 1] += self.grad[(2 * c + 1) * U + u];
          }
      },
      "squeeze2");
}

// Inverse of squeeze2: [2C, U] -> [C, 2U].
template <class S>
Tensor<S> unsqueeze2(const Tensor<S>& x) {
  if (x.rank() != 2) throw ShapeError("unsqueeze2: expected rank-2 tensor");
  const long C2 = x.dim(0), U = x.dim(1);
  if (C2 % 2 != 0)
    throw ShapeError("unsqueeze2: channel count " + std::to_string(C2) +
                     " is odd");
  const long C = C2 / 2, T = 2 * U;
  SVec<S> out(x.size());
  for (long c = 0; c < C; ++c)
    for (long u = 0; u < U; ++u) {
      out[c * T + 2 * u] = x.data()[(2 * c) * U + u];
      out[c * T + 2 * u + 1] = x.data()[(2 * c + 1) * U + u];
    }
  auto xi = x.impl();
  return make_result<S>(
      {C, T}, std::move(out), {x},
      [xi, C, T, U](TensorImpl<S>& self) {
        if (!xi->requires_grad) return;
        for (long c = 0; c < C; ++c)
          for (long u = 0; u < U; ++u) {
            xi->grad[(2 * c) * U + u] += self.grad[c * T + 2 * u];
            xi->grad[(2 * c + 1) * U + u] += self.grad[c * T + 2 * u + 1];
          }
      },
      "unsqueeze2");
}

}  // namespace mtevc::autodiff
