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

#include <cmath>
#include <vector>

#include "doctest.h"
#include "mtevc/autodiff/gradcheck.hpp"
#include "mtevc/autodiff/nn_ops.hpp"
#include "mtevc/autodiff/ops.hpp"
#include "mtevc/autodiff/params.hpp"
#include "mtevc/error.hpp"
#include "mtevc/rng.hpp"

using namespace mtevc;
namespace ad = mtevc::autodiff;
using DT = ad::Tensor<double>;

namespace {

DT rand_tensor(ad::Shape shape, Rng& rng, double scale = 1.0) {
  ad::SVec<double> v(ad::numel(shape));
  for (auto& x : v) x = rng.uniform(-scale, scale);
  return DT::from_values(std::move(shape), std::move(v));
}

// Scalar probe loss: sum(out * fixed_random_weights), which exposes every
// output coordinate to the gradient.
DT probe_loss(const DT& out, Rng& rng) {
  ad::SVec<double> v(out.size());
  for (auto& x : v) x = rng.uniform(-1, 1);
  DT probe = DT::from_values(out.shape(), std::move(v));
  return ad::sum(ad::mul(out, probe));
}

void expect_gradcheck(ad::ParamStore<double>& ps,
                      const std::function<DT()>& loss, double tol,
                      unsigned seed) {
  Rng rng(seed);
  auto report = ad::grad_check<double>(ps, loss, rng);
  CHECK_MESSAGE(report.passed(tol), report.summary());
}

}  // namespace

TEST_SUITE_BEGIN("autodiff");

TEST_CASE("dense with identity weights passes input through") {
  ad::SVec<double> eye = {1, 0, 0, 1};
  DT w = DT::from_values({2, 2}, eye);
  DT b = DT::zeros({1, 2});
  DT x = DT::from_values({1, 2}, {1, 2});
  auto y = ad::dense(x, w, b);
  CHECK(y.values()[0] == 1.0);
  CHECK(y.values()[1] == 2.0);
}

TEST_CASE("dense hand example") {
  DT x = DT::from_values({1, 2}, {1, 2});
  DT w = DT::from_values({2, 2}, {1, 0, 0, 1});
  DT b = DT::from_values({1, 2}, {3, 3});
  auto y = ad::dense(x, w, b);
  CHECK(y.values()[0] == 4.0);
  CHECK(y.values()[1] == 5.0);
}

TEST_CASE("dense gradients match finite differences") {
  Rng rng(30);
  ad::ParamStore<double> ps;
  auto& x = ps.add("x", rand_tensor({4, 8}, rng));
  auto& w = ps.add("w", rand_tensor({8, 3}, rng));
  auto& b = ps.add("b", rand_tensor({1, 3}, rng));
  Rng probe(31);
  DT pr = rand_tensor({4, 3}, probe);
  expect_gradcheck(
      ps, [&] { return ad::sum(ad::mul(ad::dense(x, w, b), pr)); }, 1e-5, 32);
}

TEST_CASE("graph reuse accumulates gradients") {
  ad::ParamStore<double> ps;
  auto& x = ps.add("x", DT::from_values({1, 1}, {3.0}));
  ps.zero_grad();
  auto y = ad::mul(x, x);  // x used twice
  y.backward();
  CHECK(x.grad()[0] == doctest::Approx(6.0));
}

TEST_CASE("ops outside grad mode record nothing") {
  DT x = DT::from_values({1, 1}, {2.0});
  x.set_requires_grad(true);
  ad::NoGradGuard guard;
  auto y = ad::mul(x, x);
  CHECK_FALSE(y.requires_grad());
}

TEST_CASE("non-finite forward values raise an error") {
  DT x = DT::from_values({1, 1}, {1000.0});
  CHECK_THROWS_AS(ad::exp(x), TrainingDiverged);
}

TEST_CASE("activation landmark values") {
  DT z = DT::from_values({1, 1}, {0.0});
  CHECK(ad::softsign(z).values()[0] == 0.0);
  DT big = DT::from_values({1, 2}, {1e6, -1e6});
  auto s = ad::softsign(big);
  CHECK(s.values()[0] == doctest::Approx(0.999999));
  CHECK(s.values()[1] == doctest::Approx(-0.999999));

  DT flat = DT::from_values({1, 4}, {0.7, 0.7, 0.7, 0.7});
  auto sm = ad::softmax_rows(flat);
  for (double v : sm.values()) CHECK(v == doctest::Approx(0.25));
}

TEST_CASE("activation gradients match finite differences") {
  Rng rng(33);
  // Keep points away from the relu kink at zero.
  ad::SVec<double> v(100);
  for (auto& x : v) {
    double u = rng.uniform(0.05, 2.0);
    x = rng.uniform(-1, 1) < 0 ? -u : u;
  }
  ad::ParamStore<double> ps;
  auto& x = ps.add("x", DT::from_values({10, 10}, v));
  Rng probe(34);
  DT pr = rand_tensor({10, 10}, probe);
  auto with = [&](auto fn) {
    return [&, fn] { return ad::sum(ad::mul(fn(x), pr)); };
  };
  expect_gradcheck(ps, with([](const DT& t) { return ad::tanh(t); }), 1e-6,
                   35);
  expect_gradcheck(ps, with([](const DT& t) { return ad::sigmoid(t); }), 1e-6,
                   36);
  expect_gradcheck(ps, with([](const DT& t) { return ad::relu(t); }), 1e-6,
                   37);
  expect_gradcheck(ps, with([](const DT& t) { return ad::softsign(t); }), 1e-6,
                   38);
  expect_gradcheck(ps, with([](const DT& t) { return ad::exp(t); }), 1e-6, 39);
  expect_gradcheck(ps, with([](const DT& t) { return ad::log_abs(t); }), 1e-6,
                   40);
  expect_gradcheck(ps, with([](const DT& t) { return ad::softmax_rows(t); }),
                   1e-6, 41);
}

TEST_CASE("elementwise, broadcast and shape op gradients") {
  Rng rng(42);
  ad::ParamStore<double> ps;
  auto& a = ps.add("a", rand_tensor({4, 6}, rng));
  auto& b = ps.add("b", rand_tensor({4, 6}, rng));
  auto& row = ps.add("row", rand_tensor({1, 6}, rng));
  auto& col = ps.add("col", rand_tensor({4, 1}, rng));
  Rng probe(43);
  DT pr = rand_tensor({4, 6}, probe);
  auto check = [&](std::function<DT()> fn, unsigned seed) {
    expect_gradcheck(ps, [&, fn] { return ad::sum(ad::mul(fn(), pr)); }, 1e-6,
                     seed);
  };
  check([&] { return ad::add(a, b); }, 50);
  check([&] { return ad::sub(a, b); }, 51);
  check([&] { return ad::mul(a, b); }, 52);
  check([&] { return ad::scale(a, -1.7); }, 53);
  check([&] { return ad::add_scalar(a, 0.3); }, 54);
  check([&] { return ad::add_rowvec(a, row); }, 55);
  check([&] { return ad::add_colvec(a, col); }, 56);
  check([&] { return ad::mul_colvec(a, col); }, 57);
  check([&] { return ad::reverse_rows(a); }, 58);
  check([&] { return ad::concat_rows(ad::slice_rows(a, 0, 2),
                                     ad::slice_rows(a, 2, 4)); }, 59);
  check([&] { return ad::concat_cols(ad::slice_cols(a, 0, 3),
                                     ad::slice_cols(a, 3, 6)); }, 60);
  check([&] { return ad::tile_rows(row, 4); }, 61);
  check([&] { return ad::unsqueeze2(ad::squeeze2(a)); }, 62);
  expect_gradcheck(ps, [&] { return ad::mean(ad::transpose(a)); }, 1e-6, 63);
  expect_gradcheck(
      ps, [&] { return ad::sum(ad::reshape(a, {6, 4})); }, 1e-6, 64);
}

TEST_CASE("squeeze interleaves even and odd samples") {
  DT x = DT::from_values({1, 4}, {1, 2, 3, 4});
  auto s = ad::squeeze2(x);
  REQUIRE(s.shape() == ad::Shape{2, 2});
  CHECK(s.values() == ad::SVec<double>{1, 3, 2, 4});
  auto back = ad::unsqueeze2(s);
  CHECK(back.values() == x.values());
  DT odd = DT::zeros({1, 5});
  CHECK_THROWS_AS(ad::squeeze2(odd), ShapeError);
}

TEST_CASE("matmul gradients match finite differences") {
  Rng rng(44);
  ad::ParamStore<double> ps;
  auto& a = ps.add("a", rand_tensor({3, 5}, rng));
  auto& b = ps.add("b", rand_tensor({5, 4}, rng));
  Rng probe(45);
  DT pr = rand_tensor({3, 4}, probe);
  expect_gradcheck(
      ps, [&] { return ad::sum(ad::mul(ad::matmul(a, b), pr)); }, 1e-6, 46);
  CHECK_THROWS_AS(ad::matmul(a, a), ShapeError);
}

TEST_CASE("conv1d with a unit 1x1 kernel is the identity") {
  DT x = DT::from_values({1, 5}, {1, 2, 3, 4, 5});
  DT w = DT::from_values({1, 1, 1}, {1.0});
  auto y = ad::conv1d(x, w);
  CHECK(y.values() == x.values());
}

TEST_CASE("causal K=2 kernel picking the previous sample shifts right") {
  DT x = DT::from_values({1, 5}, {1, 2, 3, 4, 5});
  // Taps are ordered left (oldest) to right (current).
  DT w = DT::from_values({1, 1, 2}, {1.0, 0.0});
  auto y = ad::conv1d(x, w, 1, ad::PadMode::kCausal);
  CHECK(y.values() == ad::SVec<double>{0, 1, 2, 3, 4});
}

TEST_CASE("causal convolutions never look ahead") {
  Rng rng(47);
  for (long d : {1L, 2L, 4L, 8L}) {
    DT x = rand_tensor({2, 40}, rng);
    DT w1 = rand_tensor({3, 2, 2}, rng);
    DT w2 = rand_tensor({2, 3, 3}, rng);
    auto run = [&](const DT& in) {
      return ad::conv1d(ad::tanh(ad::conv1d(in, w1, d)), w2, d);
    };
    auto base = run(x);
    const long t = 15;
    DT xp = DT::from_values(x.shape(), x.values());
    xp.values()[1 * 40 + t] += 0.5;
    auto pert = run(xp);
    for (long c = 0; c < 2; ++c)
      for (long u = 0; u < t; ++u)
        CHECK(pert.values()[c * 40 + u] == base.values()[c * 40 + u]);
    bool changed = false;
    for (long c = 0; c < 2; ++c)
      for (long u = t; u < 40; ++u)
        if (pert.values()[c * 40 + u] != base.values()[c * 40 + u])
          changed = true;
    CHECK(changed);
  }
}

TEST_CASE("same padding preserves length and centers the kernel") {
  Rng rng(48);
  DT x = rand_tensor({2, 9}, rng);
  DT w = rand_tensor({2, 2, 3}, rng);
  auto y = ad::conv1d(x, w, 2, ad::PadMode::kSame);
  CHECK(y.shape() == ad::Shape{2, 9});
  DT even = rand_tensor({2, 2, 4}, rng);
  CHECK_THROWS_AS(ad::conv1d(x, even, 1, ad::PadMode::kSame), InvalidInput);
}

TEST_CASE("conv1d gradients match finite differences") {
  Rng rng(49);
  ad::ParamStore<double> ps;
  auto& x = ps.add("x", rand_tensor({3, 12}, rng));
  auto& w = ps.add("w", rand_tensor({4, 3, 3}, rng));
  Rng probe(50);
  DT pr = rand_tensor({4, 12}, probe);
  expect_gradcheck(
      ps,
      [&] { return ad::sum(ad::mul(ad::conv1d(x, w, 2), pr)); }, 1e-5, 51);
  Rng probe2(52);
  DT pr2 = rand_tensor({4, 12}, probe2);
  expect_gradcheck(
      ps,
      [&] {
        return ad::sum(
            ad::mul(ad::conv1d(x, w, 1, ad::PadMode::kSame), pr2));
      },
      1e-5, 53);
}

TEST_CASE("transposed conv is the identity for K=1, s=1") {
  DT x = DT::from_values({1, 4}, {1, 2, 3, 4});
  DT w = DT::from_values({1, 1, 1}, {1.0});
  auto y = ad::conv1d_transposed(x, w, 1);
  CHECK(y.values() == x.values());
}

TEST_CASE("transposed conv output length is exactly T * stride") {
  Rng rng(54);
  DT x = rand_tensor({2, 3}, rng);
  DT w = rand_tensor({2, 5, 32}, rng);
  auto y = ad::conv1d_transposed(x, w, 16);
  CHECK(y.shape() == ad::Shape{5, 48});
}

TEST_CASE("conv and transposed conv sharing a kernel are adjoint") {
  Rng rng(55);
  const long A = 3, B = 2, K = 32, s = 16, T = 5;
  DT w = rand_tensor({A, B, K}, rng);
  DT x = rand_tensor({A, T}, rng);
  DT y = rand_tensor({B, T * s}, rng);

  auto tx = ad::conv1d_transposed(x, w, s);  // [B, T*s]
  // The adjoint of the center-cropped scatter is a stride-s convolution
  // over y padded by (K - s) / 2 per side.
  const long c = (K - s) / 2;
  DT zeros = DT::zeros({B, c});
  DT padded = ad::concat_cols(ad::concat_cols(zeros, y), zeros);
  auto cy = ad::conv1d(padded, w, 1, ad::PadMode::kValid, s);  // [A, T]
  REQUIRE(cy.shape() == ad::Shape{A, T});

  double lhs = 0.0, rhs = 0.0;
  for (long i = 0; i < cy.size(); ++i) lhs += cy.values()[i] * x.values()[i];
  for (long i = 0; i < tx.size(); ++i) rhs += tx.values()[i] * y.values()[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}

TEST_CASE("transposed conv gradients match finite differences") {
  Rng rng(56);
  ad::ParamStore<double> ps;
  auto& x = ps.add("x", rand_tensor({2, 6}, rng));
  auto& w = ps.add("w", rand_tensor({2, 3, 8}, rng));
  Rng probe(57);
  DT pr = rand_tensor({3, 24}, probe);
  expect_gradcheck(
      ps,
      [&] { return ad::sum(ad::mul(ad::conv1d_transposed(x, w, 4), pr)); },
      1e-5, 58);
}

TEST_CASE("all-zero LSTM weights give all-zero outputs") {
  DT x = DT::from_values({3, 2}, {1, 2, 3, 4, 5, 6});
  DT wx = DT::zeros({2, 8});
  DT wh = DT::zeros({2, 8});
  DT b = DT::zeros({1, 8});
  auto y = ad::lstm_sequence(x, wx, wh, b);
  for (double v : y.values()) CHECK(v == 0.0);
}

TEST_CASE("lstm matches a step-by-step scalar oracle") {
  Rng rng(59);
  const long T = 3, in = 2, H = 2;
  DT x = rand_tensor({T, in}, rng);
  DT wx = rand_tensor({in, 4 * H}, rng);
  DT wh = rand_tensor({H, 4 * H}, rng);
  DT b = rand_tensor({1, 4 * H}, rng);
  auto y = ad::lstm_sequence(x, wx, wh, b);

  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  std::vector<double> h(H, 0.0), c(H, 0.0);
  for (long t = 0; t < T; ++t) {
    std::vector<double> pre(4 * H);
    for (long g = 0; g < 4 * H; ++g) {
      double acc = b.values()[g];
      for (long k = 0; k < in; ++k)
        acc += x.values()[t * in + k] * wx.values()[k * 4 * H + g];
      for (long k = 0; k < H; ++k)
        acc += h[k] * wh.values()[k * 4 * H + g];
      pre[g] = acc;
    }
    for (long u = 0; u < H; ++u) {
      double i = sig(pre[u]);
      double f = sig(pre[H + u]);
      double g = std::tanh(pre[2 * H + u]);
      double o = sig(pre[3 * H + u]);
      c[u] = f * c[u] + i * g;
      h[u] = o * std::tanh(c[u]);
      CHECK(y.values()[t * H + u] == doctest::Approx(h[u]).epsilon(1e-10));
    }
  }
}

TEST_CASE("lstm gradients match finite differences") {
  Rng rng(60);
  ad::ParamStore<double> ps;
  auto& x = ps.add("x", rand_tensor({4, 3}, rng));
  auto& wx = ps.add("wx", rand_tensor({3, 8}, rng));
  auto& wh = ps.add("wh", rand_tensor({2, 8}, rng));
  auto& b = ps.add("b", rand_tensor({1, 8}, rng));
  Rng probe(61);
  DT pr = rand_tensor({4, 2}, probe);
  expect_gradcheck(
      ps,
      [&] { return ad::sum(ad::mul(ad::lstm_sequence(x, wx, wh, b), pr)); },
      1e-5, 62);
}

TEST_CASE("embedding looks up rows and routes gradients to them") {
  DT table = DT::from_values({4, 3}, {0, 0, 0, 0, 1, 0, 0, 0, 0, 5, 6, 7});
  table.set_requires_grad(true);
  auto one = ad::embedding_rows(table, {1});
  CHECK(one.values() == ad::SVec<double>{0, 1, 0});
  auto again = ad::embedding_rows(table, {1});
  CHECK(again.values() == one.values());

  table.zero_grad();
  auto y = ad::sum(ad::embedding_rows(table, {3}));
  y.backward();
  for (long r = 0; r < 4; ++r)
    for (long c = 0; c < 3; ++c)
      CHECK(table.grad()[r * 3 + c] == (r == 3 ? 1.0 : 0.0));

  CHECK_THROWS_AS(ad::embedding_rows(table, {4}), UnknownCodeError);
  CHECK_THROWS_AS(ad::embedding_rows(table, {-1}), UnknownCodeError);
  CHECK_THROWS_AS(ad::embedding_cols(table, {5}), UnknownCodeError);
}

TEST_CASE("embedding_cols gathers columns") {
  DT table = DT::from_values({2, 3}, {1, 2, 3, 4, 5, 6});
  auto y = ad::embedding_cols(table, {2, 0, 2});
  REQUIRE(y.shape() == ad::Shape{2, 3});
  CHECK(y.values() == ad::SVec<double>{3, 1, 3, 6, 4, 6});
}

TEST_CASE("loss landmark values") {
  Rng rng(63);
  DT x = rand_tensor({3, 4}, rng);
  CHECK(ad::l1_loss(x, x).item() == 0.0);

  ad::SVec<double> logits(2 * 3, 0.0);
  logits[0 * 3 + 1] = 1e6;
  logits[1 * 3 + 2] = 1e6;
  DT lg = DT::from_values({2, 3}, logits);
  CHECK(ad::cross_entropy_with_logits(lg, {1, 2}).item() ==
        doctest::Approx(0.0).epsilon(1e-12));

  DT z = DT::zeros({1, 4});
  CHECK(ad::gaussian_nll(z).item() ==
        doctest::Approx(2.0 * std::log(2.0 * M_PI)).epsilon(1e-12));
}

TEST_CASE("loss gradients match finite differences") {
  Rng rng(64);
  ad::ParamStore<double> ps;
  auto& pred = ps.add("pred", rand_tensor({5, 4}, rng));
  auto& z = ps.add("z", rand_tensor({2, 6}, rng));
  DT target = rand_tensor({5, 4}, rng);
  std::vector<int> classes = {3, 0, 1, 2, 1};
  expect_gradcheck(ps, [&] { return ad::l1_loss(pred, target); }, 1e-5, 65);
  expect_gradcheck(
      ps, [&] { return ad::cross_entropy_with_logits(pred, classes); }, 1e-6,
      66);
  expect_gradcheck(ps, [&] { return ad::gaussian_nll(z); }, 1e-6, 67);
}

TEST_CASE("cross entropy validates targets") {
  DT lg = DT::zeros({2, 3});
  CHECK_THROWS_AS(ad::cross_entropy_with_logits(lg, {0}), ShapeError);
  CHECK_THROWS_AS(ad::cross_entropy_with_logits(lg, {0, 3}), InvalidInput);
}

TEST_SUITE_END();
