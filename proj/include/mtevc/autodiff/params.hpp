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
#include <deque>
#include <string>
#include <unordered_map>
#include <vector>

#include "mtevc/autodiff/tensor.hpp"
#include "mtevc/error.hpp"
#include "mtevc/rng.hpp"

namespace mtevc::autodiff {

// Named parameter registry for one model. Keeps insertion order so that
// checkpoints and optimizer state are reproducible. Non-trainable entries
// (buffers such as normalization statistics) are saved and loaded with the
// model but never receive gradients or optimizer updates. Entries live in
// a deque so references returned by add() and get() stay valid as more
// parameters are registered.
template <class S>
class ParamStore {
public:
  struct Entry {
    std::string name;
    Tensor<S> tensor;
    bool trainable = true;
  };

  Tensor<S>& add(const std::string& name, Tensor<S> tensor,
                 bool trainable = true) {
    if (index_.count(name))
      throw StateError("parameter '" + name + "' registered twice");
    tensor.set_requires_grad(trainable);
    index_[name] = entries_.size();
    entries_.push_back({name, std::move(tensor), trainable});
    return entries_.back().tensor;
  }

  Tensor<S>& get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end())
      throw StateError("unknown parameter '" + name + "'");
    return entries_[it->second].tensor;
  }

  const Tensor<S>& get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end())
      throw StateError("unknown parameter '" + name + "'");
    return entries_[it->second].tensor;
  }

  bool has(const std::string& name) const { return index_.count(name) > 0; }

  std::deque<Entry>& entries() { return entries_; }
  const std::deque<Entry>& entries() const { return entries_; }

  long trainable_count() const {
    long n = 0;
    for (const auto& e : entries_)
      if (e.trainable) n += e.tensor.size();
    return n;
  }

  void zero_grad() {
    for (auto& e : entries_)
      if (e.trainable) e.tensor.zero_grad();
  }

  // Global L2 norm over all trainable gradients, accumulated in double.
  double grad_norm() const {
    double acc = 0.0;
    for (const auto& e : entries_) {
      if (!e.trainable) continue;
      for (S g : e.tensor.grad()) {
        double v = static_cast<double>(g);
        acc += v * v;
      }
    }
    return std::sqrt(acc);
  }

  void clip_grad_norm(double max_norm) {
    double norm = grad_norm();
    if (norm <= max_norm || norm == 0.0) return;
    S factor = static_cast<S>(max_norm / norm);
    for (auto& e : entries_) {
      if (!e.trainable) continue;
      for (S& g : e.tensor.grad()) g *= factor;
    }
  }

private:
  std::deque<Entry> entries_;
  std::unordered_map<std::string, size_t> index_;
};

// --- Initializers ----------------------------------------------------------

// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
template <class S>
Tensor<S> glorot_uniform(Shape shape, long fan_in, long fan_out, Rng& rng) {
  double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  SVec<S> v(numel(shape));
  for (S& x : v) x = static_cast<S>(rng.uniform(-a, a));
  return Tensor<S>::from_values(std::move(shape), std::move(v));
}

template <class S>
Tensor<S> normal_init(Shape shape, double stddev, Rng& rng) {
  SVec<S> v(numel(shape));
  for (S& x : v) x = static_cast<S>(rng.normal() * stddev);
  return Tensor<S>::from_values(std::move(shape), std::move(v));
}

template <class S>
Tensor<S> constant_init(Shape shape, double value) {
  SVec<S> v(numel(shape), static_cast<S>(value));
  return Tensor<S>::from_values(std::move(shape), std::move(v));
}

}  // namespace mtevc::autodiff
