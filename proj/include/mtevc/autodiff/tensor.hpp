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

#include <Eigen/Dense>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <unordered_set>
#include <vector>

#include "mtevc/error.hpp"

namespace mtevc::autodiff {

using Shape = std::vector<long>;

inline long numel(const Shape& s) {
  long n = 1;
  for (long d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i)
    out += (i ? "," : "") + std::to_string(s[i]);
  return out + "]";
}

// 64-byte-aligned storage for all tensor payloads. A fixed alignment
// keeps Eigen's vectorized loop splits independent of the heap state, so
// repeated runs inside one process stay bitwise reproducible.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr size_t kAlign = 64;

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(size_t n) {
    size_t bytes = (n * sizeof(T) + kAlign - 1) / kAlign * kAlign;
    void* p = std::aligned_alloc(kAlign, bytes ? bytes : kAlign);
    if (!p) throw std::bad_alloc();
    return static_cast<T*>(p);
  }
  void deallocate(T* p, size_t) { std::free(p); }

  template <class U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
  template <class U>
  bool operator!=(const AlignedAllocator<U>&) const { return false; }
};

template <class S>
using SVec = std::vector<S, AlignedAllocator<S>>;

// Thread-local switch: with grad disabled, ops do not record tape nodes.
bool& grad_enabled();

struct NoGradGuard {
  NoGradGuard() : prev_(grad_enabled()) { grad_enabled() = false; }
  ~NoGradGuard() { grad_enabled() = prev_; }

private:
  bool prev_;
};

template <class S>
struct TensorImpl {
  Shape shape;
  SVec<S> value;
  SVec<S> grad;  // allocated on demand, same extent as value
  bool requires_grad = false;

  std::vector<std::shared_ptr<TensorImpl>> parents;
  std::function<void(TensorImpl&)> backward_fn;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), S(0));
  }
};

// Reference-semantics handle to a tensor node. Row-major storage; 2-D
// tensors are [rows, cols].
template <class S>
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorImpl<S>> impl)
      : impl_(std::move(impl)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    auto impl = std::make_shared<TensorImpl<S>>();
    impl->shape = std::move(shape);
    impl->value.assign(numel(impl->shape), S(0));
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
  }

  static Tensor from_values(Shape shape, SVec<S> values,
                            bool requires_grad = false) {
    auto impl = std::make_shared<TensorImpl<S>>();
    if (numel(shape) != static_cast<long>(values.size()))
      throw ShapeError("from_values: " + shape_str(shape) + " does not hold " +
                       std::to_string(values.size()) + " elements");
    impl->shape = std::move(shape);
    impl->value = std::move(values);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
  }


  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  long rank() const { return static_cast<long>(impl_->shape.size()); }
  long dim(int i) const { return impl_->shape[i]; }
  long size() const { return static_cast<long>(impl_->value.size()); }
  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool v) { impl_->requires_grad = v; }

  SVec<S>& values() { return impl_->value; }
  const SVec<S>& values() const { return impl_->value; }
  S* data() { return impl_->value.data(); }
  const S* data() const { return impl_->value.data(); }
  SVec<S>& grad() { return impl_->grad; }
  const SVec<S>& grad() const { return impl_->grad; }
  std::shared_ptr<TensorImpl<S>> impl() const { return impl_; }

  S item() const {
    if (size() != 1) throw ShapeError("item: tensor is not scalar");
    return impl_->value[0];
  }

  void zero_grad() { impl_->grad.assign(impl_->value.size(), S(0)); }

  // Reverse-mode sweep from a scalar result. Accumulates into .grad of
  // every reachable node with requires_grad set.
  void backward() {
    if (size() != 1) throw ShapeError("backward: output must be scalar");
    // Topological order by iterative DFS.
    std::vector<TensorImpl<S>*> order;
    std::unordered_set<TensorImpl<S>*> seen;
    std::vector<std::pair<TensorImpl<S>*, size_t>> stack;
    stack.emplace_back(impl_.get(), 0);
    seen.insert(impl_.get());
    while (!stack.empty()) {
      auto& [node, idx] = stack.back();
      if (idx < node->parents.size()) {
        TensorImpl<S>* p = node->parents[idx].get();
        ++idx;
        if (!seen.count(p)) {
          seen.insert(p);
          stack.emplace_back(p, 0);
        }
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
    for (auto* node : order) node->ensure_grad();
    impl_->grad[0] = S(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      if ((*it)->backward_fn) (*it)->backward_fn(**it);
    }
  }

private:
  std::shared_ptr<TensorImpl<S>> impl_;
};

// --- Eigen views -----------------------------------------------------------

template <class S>
using EMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using EVec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <class S>
using MatMap = Eigen::Map<EMat<S>>;
template <class S>
using CMatMap = Eigen::Map<const EMat<S>>;
template <class S>
using VecMap = Eigen::Map<EVec<S>>;
template <class S>
using CVecMap = Eigen::Map<const EVec<S>>;

template <class S>
MatMap<S> mat_view(SVec<S>& v, long rows, long cols) {
  return MatMap<S>(v.data(), rows, cols);
}

template <class S>
CMatMap<S> mat_view(const SVec<S>& v, long rows, long cols) {
  return CMatMap<S>(v.data(), rows, cols);
}

template <class S>
CMatMap<S> mat2d(const Tensor<S>& t) {
  if (t.rank() != 2) throw ShapeError("expected rank-2 tensor, got " +
                                      shape_str(t.shape()));
  return CMatMap<S>(t.data(), t.dim(0), t.dim(1));
}

// --- Tape plumbing ---------------------------------------------------------

// Creates the node for an op result. Gradient tracking is on only when
// grad mode is enabled and some parent requires it.
template <class S>
Tensor<S> make_result(Shape shape, SVec<S> values,
                      std::vector<Tensor<S>> parents,
                      std::function<void(TensorImpl<S>&)> backward,
                      const char* op_name) {
  for (const S& v : values) {
    if (!std::isfinite(static_cast<double>(v)))
      throw TrainingDiverged(std::string("non-finite value produced by op '") +
                             op_name + "'");
  }
  auto impl = std::make_shared<TensorImpl<S>>();
  impl->shape = std::move(shape);
  impl->value = std::move(values);
  bool track = false;
  if (grad_enabled()) {
    for (const auto& p : parents)
      if (p.requires_grad()) track = true;
  }
  if (track) {
    impl->requires_grad = true;
    impl->parents.reserve(parents.size());
    for (auto& p : parents) impl->parents.push_back(p.impl());
    impl->backward_fn = std::move(backward);
  }
  return Tensor<S>(std::move(impl));
}

}  // namespace mtevc::autodiff
