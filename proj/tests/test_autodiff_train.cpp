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
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "mtevc/autodiff/adam.hpp"
#include "mtevc/autodiff/checkpoint.hpp"
#include "mtevc/autodiff/gradcheck.hpp"
#include "mtevc/autodiff/ops.hpp"
#include "mtevc/autodiff/params.hpp"
#include "mtevc/error.hpp"
#include "mtevc/rng.hpp"

using namespace mtevc;
namespace ad = mtevc::autodiff;
using FT = ad::Tensor<float>;
using DT = ad::Tensor<double>;

namespace {

std::string temp_path(const std::string& stem) {
  return (std::filesystem::temp_directory_path() / stem).string();
}

struct FileGuard {
  std::string path;
  ~FileGuard() { std::remove(path.c_str()); }
};

// Tiny quadratic model used by the checkpoint round-trip tests.
struct Quadratic {
  ad::ParamStore<float> params;
  FT* p = nullptr;

  explicit Quadratic(ad::SVec<float> init) {
    p = &params.add("p", FT::from_values({1, 3}, std::move(init)));
    params.add("stats", FT::from_values({1, 2}, {0.25f, 4.0f}), false);
  }

  void train(ad::Adam<float>& opt, int steps) {
    for (int s = 0; s < steps; ++s) {
      params.zero_grad();
      auto loss = ad::sum(ad::mul(*p, *p));
      loss.backward();
      opt.step();
    }
  }
};

}  // namespace

TEST_SUITE_BEGIN("autodiff");

TEST_CASE("param store rejects duplicates and unknown names") {
  ad::ParamStore<double> ps;
  ps.add("w", DT::zeros({2, 2}));
  ps.add("stats", DT::zeros({1, 2}), false);
  CHECK_THROWS_AS(ps.add("w", DT::zeros({2, 2})), StateError);
  CHECK_THROWS_AS(ps.get("missing"), StateError);
  CHECK(ps.trainable_count() == 4);
  CHECK(ps.get("w").requires_grad());
  CHECK_FALSE(ps.get("stats").requires_grad());
}

TEST_CASE("initializers respect their ranges") {
  Rng rng(70);
  auto w = ad::glorot_uniform<double>({20, 30}, 20, 30, rng);
  double bound = std::sqrt(6.0 / 50.0);
  for (double v : w.values()) {
    CHECK(v >= -bound);
    CHECK(v <= bound);
  }
  auto n = ad::normal_init<double>({1000}, 0.1, rng);
  double acc = 0.0;
  for (double v : n.values()) acc += v * v;
  CHECK(std::sqrt(acc / 1000.0) == doctest::Approx(0.1).epsilon(0.15));
  auto c = ad::constant_init<double>({3}, 1.5);
  for (double v : c.values()) CHECK(v == 1.5);
}

TEST_CASE("gradient clipping rescales to the requested norm") {
  ad::ParamStore<double> ps;
  auto& a = ps.add("a", DT::zeros({1, 3}));
  auto& b = ps.add("b", DT::zeros({1, 1}));
  ps.zero_grad();
  a.grad() = {3.0, 0.0, 0.0};
  b.grad() = {4.0};
  CHECK(ps.grad_norm() == doctest::Approx(5.0));
  ps.clip_grad_norm(2.0);
  CHECK(ps.grad_norm() == doctest::Approx(2.0));
  CHECK(a.grad()[0] == doctest::Approx(3.0 * 2.0 / 5.0));
  // Norm already below the cap: untouched.
  ps.clip_grad_norm(10.0);
  CHECK(ps.grad_norm() == doctest::Approx(2.0));
}

TEST_CASE("adam leaves parameters alone when gradients are zero") {
  ad::ParamStore<double> ps;
  auto& p = ps.add("p", DT::from_values({1, 2}, {0.3, -0.7}));
  ad::Adam<double> opt(ps, {});
  ps.zero_grad();
  opt.step();
  CHECK(p.values()[0] == 0.3);
  CHECK(p.values()[1] == -0.7);
}

TEST_CASE("adam first update with unit gradient moves by the learning rate") {
  ad::ParamStore<double> ps;
  auto& p = ps.add("p", DT::from_values({1, 1}, {1.0}));
  ad::AdamConfig cfg;
  cfg.learning_rate = 0.01;
  ad::Adam<double> opt(ps, cfg);
  ps.zero_grad();
  p.grad() = {1.0};
  opt.step();
  CHECK(p.values()[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
}

TEST_CASE("adam drives a quadratic bowl to the origin") {
  ad::ParamStore<double> ps;
  auto& p = ps.add("p", DT::from_values({1, 2}, {1.0, 1.0}));
  ad::AdamConfig cfg;
  cfg.learning_rate = 0.05;
  ad::Adam<double> opt(ps, cfg);
  for (int s = 0; s < 500; ++s) {
    ps.zero_grad();
    auto loss = ad::sum(ad::mul(p, p));
    loss.backward();
    opt.step();
  }
  CHECK(std::abs(p.values()[0]) < 1e-2);
  CHECK(std::abs(p.values()[1]) < 1e-2);
}

TEST_CASE("adam halves the learning rate on schedule") {
  ad::ParamStore<double> ps;
  ps.add("p", DT::zeros({1, 1}));
  ad::AdamConfig cfg;
  cfg.learning_rate = 0.4;
  cfg.decay_period = 10;
  ad::Adam<double> opt(ps, cfg);
  ps.zero_grad();
  for (int s = 1; s <= 25; ++s) {
    opt.step();
    double expected = 0.4 * std::pow(0.5, (s - 1) / 10);
    CHECK(opt.current_learning_rate() == doctest::Approx(expected));
  }
}

TEST_CASE("adam without gradients raises an error") {
  ad::ParamStore<double> ps;
  ps.add("p", DT::zeros({1, 1}));
  ad::Adam<double> opt(ps, {});
  CHECK_THROWS_AS(opt.step(), StateError);  // zero_grad never called
}

TEST_CASE("checkpoint round trip restores values and optimizer bitwise") {
  FileGuard file{temp_path("mtevc_ckpt_roundtrip.bin")};
  const uint64_t fp = 0x1234abcdULL;

  Quadratic source({1.0f, -2.0f, 0.5f});
  ad::AdamConfig cfg;
  cfg.learning_rate = 0.05;
  ad::Adam<float> opt(source.params, cfg);
  source.train(opt, 5);
  ad::save_checkpoint(file.path, source.params, fp, &opt);

  Quadratic resumed({9.0f, 9.0f, 9.0f});
  resumed.params.get("stats").values() = {0.0f, 0.0f};
  ad::Adam<float> opt2(resumed.params, cfg);
  long step = ad::load_checkpoint(file.path, resumed.params, fp, &opt2);
  CHECK(step == 5);
  CHECK(resumed.p->values() == source.p->values());
  CHECK(resumed.params.get("stats").values() == ad::SVec<float>{0.25f, 4.0f});
  CHECK(opt2.m().at("p") == opt.m().at("p"));
  CHECK(opt2.v().at("p") == opt.v().at("p"));

  // Continuing from the restored state reproduces uninterrupted training.
  source.train(opt, 5);
  resumed.train(opt2, 5);
  CHECK(resumed.p->values() == source.p->values());
}

TEST_CASE("checkpoint without optimizer state loads parameters only") {
  FileGuard file{temp_path("mtevc_ckpt_noopt.bin")};
  Quadratic source({0.1f, 0.2f, 0.3f});
  ad::save_checkpoint(file.path, source.params, 7);
  Quadratic other({0.0f, 0.0f, 0.0f});
  CHECK(ad::load_checkpoint(file.path, other.params, 7) == 0);
}

TEST_CASE("checkpoint refuses a different configuration fingerprint") {
  FileGuard file{temp_path("mtevc_ckpt_fp.bin")};
  Quadratic source({1.0f, 2.0f, 3.0f});
  ad::save_checkpoint(file.path, source.params, 100);
  Quadratic other({0.0f, 0.0f, 0.0f});
  CHECK_THROWS_AS(ad::load_checkpoint(file.path, other.params, 101),
                  CompatibilityError);
}

TEST_CASE("checkpoint refuses mismatched parameters") {
  FileGuard file{temp_path("mtevc_ckpt_shape.bin")};
  Quadratic source({1.0f, 2.0f, 3.0f});
  ad::save_checkpoint(file.path, source.params, 5);

  SUBCASE("different shape") {
    ad::ParamStore<float> ps;
    ps.add("p", FT::zeros({1, 4}));
    ps.add("stats", FT::zeros({1, 2}), false);
    CHECK_THROWS_AS(ad::load_checkpoint(file.path, ps, 5),
                    CompatibilityError);
  }
  SUBCASE("different name") {
    ad::ParamStore<float> ps;
    ps.add("q", FT::zeros({1, 3}));
    ps.add("stats", FT::zeros({1, 2}), false);
    CHECK_THROWS_AS(ad::load_checkpoint(file.path, ps, 5),
                    CompatibilityError);
  }
  SUBCASE("different parameter count") {
    ad::ParamStore<float> ps;
    ps.add("p", FT::zeros({1, 3}));
    CHECK_THROWS_AS(ad::load_checkpoint(file.path, ps, 5),
                    CompatibilityError);
  }
  SUBCASE("different scalar type") {
    ad::ParamStore<double> ps;
    ps.add("p", DT::zeros({1, 3}));
    ps.add("stats", DT::zeros({1, 2}), false);
    CHECK_THROWS_AS(ad::load_checkpoint(file.path, ps, 5),
                    CompatibilityError);
  }
}

TEST_CASE("corrupt checkpoint files are reported as such") {
  FileGuard trunc{temp_path("mtevc_ckpt_trunc.bin")};
  Quadratic source({1.0f, 2.0f, 3.0f});
  ad::save_checkpoint(trunc.path, source.params, 5);
  auto full = std::filesystem::file_size(trunc.path);
  std::filesystem::resize_file(trunc.path, full / 2);
  Quadratic other({0.0f, 0.0f, 0.0f});
  CHECK_THROWS_AS(ad::load_checkpoint(trunc.path, other.params, 5), IoError);

  FileGuard junk{temp_path("mtevc_ckpt_junk.bin")};
  std::ofstream(junk.path, std::ios::binary) << "not a checkpoint";
  CHECK_THROWS_AS(ad::load_checkpoint(junk.path, other.params, 5), IoError);

  CHECK_THROWS_AS(
      ad::load_checkpoint(temp_path("mtevc_ckpt_missing.bin"), other.params, 5),
      IoError);
}

TEST_CASE("gradient checker is exact for a linear loss") {
  ad::ParamStore<double> ps;
  auto& p = ps.add("p", DT::from_values({2, 3}, {1, 2, 3, 4, 5, 6}));
  Rng rng(71);
  auto report = ad::grad_check<double>(
      ps, [&] { return ad::sum(p); }, rng);
  CHECK(report.checked == 6);
  CHECK(report.max_error <= 1e-10);
  REQUIRE(report.per_param.size() == 1);
  CHECK(report.per_param[0].first == "p");
  CHECK_FALSE(report.summary().empty());
}

TEST_CASE("gradient checker flags a broken gradient") {
  // A closure that deliberately perturbs its own graph: loss uses p but the
  // recorded op is sum(p * p) while values were doubled, so the analytic
  // and numeric slopes disagree.
  ad::ParamStore<double> ps;
  auto& p = ps.add("p", DT::from_values({1, 2}, {0.5, -1.25}));
  Rng rng(72);
  bool first = true;
  auto report = ad::grad_check<double>(
      ps,
      [&]() -> DT {
        if (first) {
          first = false;
          return ad::sum(ad::mul(p, p));  // analytic slope 2p
        }
        return ad::sum(p);  // numeric slope 1
      },
      rng);
  CHECK(report.max_error > 1e-2);
}

TEST_SUITE_END();
