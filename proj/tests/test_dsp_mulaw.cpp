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

#include "doctest.h"
#include "mtevc/dsp/mulaw.hpp"
#include "mtevc/error.hpp"
#include "mtevc/rng.hpp"

using namespace mtevc;
using namespace mtevc::dsp;

TEST_SUITE_BEGIN("dsp");

TEST_CASE("mu-law maps landmark samples to known classes") {
  CHECK(mu_law_encode_sample(0.0) == 128);
  CHECK(mu_law_encode_sample(1.0) == 255);
  CHECK(mu_law_encode_sample(-1.0) == 0);
  CHECK(mu_law_encode_sample(0.5) == 240);
}

TEST_CASE("decoding the zero class gives a near-zero sample") {
  const double x = mu_law_decode_sample(kMuLawZeroClass);
  CHECK(x == doctest::Approx(8.5870e-5).epsilon(1e-3));
  CHECK(std::abs(x) <= 3.1e-3);
}

TEST_CASE("companding is monotone and odd") {
  CHECK(mu_law_compand(0.0) == 0.0);
  CHECK(mu_law_compand(1.0) == doctest::Approx(1.0));
  CHECK(mu_law_compand(-0.3) == doctest::Approx(-mu_law_compand(0.3)));
  double prev = -1.1;
  for (int i = 0; i <= 100; ++i) {
    double f = mu_law_compand(-1.0 + 0.02 * i);
    CHECK(f > prev);
    prev = f;
  }
}

TEST_CASE("compand and expand are inverse") {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    double x = rng.uniform(-1, 1);
    CHECK(mu_law_expand(mu_law_compand(x)) == doctest::Approx(x).epsilon(1e-12));
  }
}

TEST_CASE("encode classes are monotone in the sample value") {
  int prev = 0;
  for (int i = 0; i <= 2000; ++i) {
    int cls = mu_law_encode_sample(-1.0 + 0.001 * i);
    CHECK(cls >= prev);
    prev = cls;
  }
  CHECK(prev == 255);
}

TEST_CASE("companded-domain round-trip error is at most 1/256") {
  Rng rng(12);
  double worst = 0.0;
  for (int i = 0; i < 100000; ++i) {
    double x = rng.uniform(-1, 1);
    double back = mu_law_decode_sample(mu_law_encode_sample(x));
    double err = std::abs(mu_law_compand(back) - mu_law_compand(x));
    worst = std::max(worst, err);
  }
  CHECK(worst <= 1.0 / 256.0);
}

TEST_CASE("out-of-range samples and classes are rejected") {
  CHECK_THROWS_AS(mu_law_encode_sample(1.5), InvalidInput);
  CHECK_THROWS_AS(mu_law_encode_sample(-1.0001), InvalidInput);
  CHECK_THROWS_AS(mu_law_decode_sample(-1), InvalidInput);
  CHECK_THROWS_AS(mu_law_decode_sample(256), InvalidInput);
}

TEST_CASE("waveform encode/decode round-trips within quantization error") {
  Rng rng(13);
  Waveform w;
  w.samples.resize(4000);
  for (auto& s : w.samples) s = static_cast<float>(rng.uniform(-0.9, 0.9));
  auto classes = mu_law_encode(w);
  REQUIRE(classes.size() == w.samples.size());
  Waveform back = mu_law_decode(classes, w.sample_rate_hz);
  for (size_t t = 0; t < w.samples.size(); ++t) {
    double err = std::abs(mu_law_compand(back.samples[t]) -
                          mu_law_compand(w.samples[t]));
    CHECK(err <= 1.0 / 256.0 + 1e-7);
  }
}

TEST_SUITE_END();
