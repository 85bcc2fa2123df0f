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

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "mtevc/autodiff/params.hpp"

namespace mtevc::autodiff {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Learning rate is halved every decay_period steps; 0 disables decay.
  long decay_period = 0;
};

// Adam with bias correction. Moments are kept in double regardless of the
// parameter scalar type so update arithmetic is identical across builds.
template <class S>
class Adam {
public:
  Adam(ParamStore<S>& params, AdamConfig config)
      : params_(&params), config_(config) {
    for (const auto& e : params.entries()) {
      if (!e.trainable) continue;
      m_[e.name].assign(e.tensor.size(), 0.0);
      v_[e.name].assign(e.tensor.size(), 0.0);
    }
  }

  long step_count() const { return step_; }

  double current_learning_rate() const {
    double lr = config_.learning_rate;
    if (config_.decay_period > 0)
      lr *= std::pow(0.5, static_cast<double>((step_ - 1) /
                                              config_.decay_period));
    return lr;
  }

  void step() {
    ++step_;
    const double lr = current_learning_rate();
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step_));
    for (auto& e : params_->entries()) {
      if (!e.trainable) continue;
      auto& m = m_[e.name];
      auto& v = v_[e.name];
      const auto& grad = e.tensor.grad();
      if (grad.size() != m.size())
        throw StateError("missing gradient for parameter '" + e.name + "'");
      auto& val = e.tensor.values();
      for (size_t i = 0; i < m.size(); ++i) {
        double g = static_cast<double>(grad[i]);
        m[i] = b1 * m[i] + (1.0 - b1) * g;
        v[i] = b2 * v[i] + (1.0 - b2) * g * g;
        double mhat = m[i] / bc1;
        double vhat = v[i] / bc2;
        val[i] = static_cast<S>(static_cast<double>(val[i]) -
                                lr * mhat / (std::sqrt(vhat) +
                                             config_.epsilon));
      }
    }
  }

  // Flat views used by checkpointing.
  const std::unordered_map<std::string, std::vector<double>>& m() const {
    return m_;
  }
  const std::unordered_map<std::string, std::vector<double>>& v() const {
    return v_;
  }
  void restore(long step,
               std::unordered_map<std::string, std::vector<double>> m,
               std::unordered_map<std::string, std::vector<double>> v) {
    for (const auto& e : params_->entries()) {
      if (!e.trainable) continue;
      auto im = m.find(e.name), iv = v.find(e.name);
      if (im == m.end() || iv == v.end() ||
          im->second.size() != static_cast<size_t>(e.tensor.size()) ||
          iv->second.size() != static_cast<size_t>(e.tensor.size()))
        throw CompatibilityError(
            "optimizer state does not match parameter '" + e.name + "'");
    }
    step_ = step;
    m_ = std::move(m);
    v_ = std::move(v);
  }

private:
  ParamStore<S>* params_;
  AdamConfig config_;
  long step_ = 0;
  std::unordered_map<std::string, std::vector<double>> m_;
  std::unordered_map<std::string, std::vector<double>> v_;
};

}  // namespace mtevc::autodiff
