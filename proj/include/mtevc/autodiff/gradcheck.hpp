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
#include <functional>
#include <string>
#include <vector>

#include "mtevc/autodiff/params.hpp"
#include "mtevc/rng.hpp"

namespace mtevc::autodiff {

struct GradCheckReport {
  double max_error = 0.0;
  std::string worst_param;
  long worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  long checked = 0;
  std::vector<std::pair<std::string, double>> per_param;  // max error each

  bool passed(double tolerance) const { return max_error <= tolerance; }

  std::string summary() const {
    if (checked == 0) return "no coordinates checked";
    return "max error " + std::to_string(max_error) + " at " + worst_param +
           "[" + std::to_string(worst_index) + "] (analytic " +
           std::to_string(worst_analytic) + ", numeric " +
           std::to_string(worst_numeric) + ", " + std::to_string(checked) +
           " coordinates)";
  }
};

// Compares reverse-mode gradients of a scalar loss against central finite
// differences. loss_fn must rebuild the graph from the current parameter
// values on every call. For parameters larger than samples_per_param a
// random subset of coordinates is probed. Error per coordinate is
// |analytic - numeric| / max(1, |analytic|, |numeric|).
template <class S>
GradCheckReport grad_check(ParamStore<S>& params,
                           const std::function<Tensor<S>()>& loss_fn,
                           Rng& rng, double step = 1e-5,
                           long samples_per_param = 24) {
  params.zero_grad();
  Tensor<S> loss = loss_fn();
  loss.backward();

  std::vector<std::vector<double>> analytic;
  for (const auto& e : params.entries())
    analytic.emplace_back(e.tensor.grad().begin(), e.tensor.grad().end());

  GradCheckReport report;
  for (size_t pi = 0; pi < params.entries().size(); ++pi) {
    auto& e = params.entries()[pi];
    if (!e.trainable) continue;
    const long n = e.tensor.size();
    std::vector<long> coords;
    if (n <= samples_per_param) {
      coords.resize(n);
      for (long i = 0; i < n; ++i) coords[i] = i;
    } else {
      for (long i = 0; i < samples_per_param; ++i)
        coords.push_back(static_cast<long>(rng.below(n)));
    }
    double param_max = 0.0;
    for (long c : coords) {
      S saved = e.tensor.values()[c];
      double lp, lm;
      {
        NoGradGuard guard;
        e.tensor.values()[c] = static_cast<S>(saved + step);
        lp = static_cast<double>(loss_fn().item());
        e.tensor.values()[c] = static_cast<S>(saved - step);
        lm = static_cast<double>(loss_fn().item());
      }
      e.tensor.values()[c] = saved;
      double numeric = (lp - lm) / (2.0 * step);
      double a = analytic[pi][c];
      double err = std::abs(a - numeric) /
                   std::max({1.0, std::abs(a), std::abs(numeric)});
      ++report.checked;
      param_max = std::max(param_max, err);
      if (err > report.max_error) {
        report.max_error = err;
        report.worst_param = e.name;
        report.worst_index = c;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
    report.per_param.emplace_back(e.name, param_max);
  }
  return report;
}

}  // namespace mtevc::autodiff
