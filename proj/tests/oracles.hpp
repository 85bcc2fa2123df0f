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

// Independent reference implementations used to validate the library.
// Everything here is deliberately naive: direct O(n^2) transforms and
// exhaustive searches whose correctness is obvious by inspection.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <queue>
#include <utility>
#include <vector>

#include "mtevc/dsp/waveform.hpp"

namespace oracles {

// Sine of the given frequency, optionally with decaying-amplitude
// harmonics to resemble a voiced sound.
inline mtevc::dsp::Waveform tone(double f0_hz, double seconds,
                                 int harmonics = 1, double amplitude = 0.5,
                                 int sample_rate = 16000) {
  mtevc::dsp::Waveform w;
  w.sample_rate_hz = sample_rate;
  const long n = static_cast<long>(seconds * sample_rate);
  w.samples.resize(n);
  for (long t = 0; t < n; ++t) {
    double v = 0.0;
    for (int h = 1; h <= harmonics; ++h)
      v += std::sin(2.0 * M_PI * f0_hz * h * t / sample_rate) / h;
    w.samples[t] = static_cast<float>(amplitude * v);
  }
  return w;
}

// Direct O(n^2) discrete Fourier transform.
inline std::vector<std::complex<double>> naive_dft(
    const std::vector<std::complex<double>>& x) {
  const size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  for (size_t k = 0; k < n; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (size_t t = 0; t < n; ++t) {
      double ang = -2.0 * M_PI * static_cast<double>(k * t) / n;
      acc += x[t] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  return out;
}

// Minimal alignment cost by exhaustive enumeration of every monotone path
// over steps {(1,0), (0,1), (1,1)}. Exponential; use only for tiny inputs.
inline double exhaustive_dtw_cost(const Eigen::MatrixXd& d) {
  const long I = d.rows(), J = d.cols();
  double best = std::numeric_limits<double>::infinity();
  // Explicit stack of (i, j, accumulated cost) partial paths.
  struct Node {
    long i, j;
    double cost;
  };
  std::vector<Node> stack{{0, 0, d(0, 0)}};
  while (!stack.empty()) {
    Node n = stack.back();
    stack.pop_back();
    if (n.i == I - 1 && n.j == J - 1) {
      if (n.cost < best) best = n.cost;
      continue;
    }
    if (n.i + 1 < I) stack.push_back({n.i + 1, n.j, n.cost + d(n.i + 1, n.j)});
    if (n.j + 1 < J) stack.push_back({n.i, n.j + 1, n.cost + d(n.i, n.j + 1)});
    if (n.i + 1 < I && n.j + 1 < J)
      stack.push_back({n.i + 1, n.j + 1, n.cost + d(n.i + 1, n.j + 1)});
  }
  return best;
}

// Same minimum through Dijkstra over the alignment lattice; polynomial, so
// usable on somewhat larger grids than exhaustive enumeration.
inline double dijkstra_dtw_cost(const Eigen::MatrixXd& d) {
  const long I = d.rows(), J = d.cols();
  const double inf = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd dist = Eigen::MatrixXd::Constant(I, J, inf);
  using Item = std::pair<double, long>;  // cost, i * J + j
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
  dist(0, 0) = d(0, 0);
  pq.emplace(dist(0, 0), 0);
  while (!pq.empty()) {
    auto [c, key] = pq.top();
    pq.pop();
    const long i = key / J, j = key % J;
    if (c > dist(i, j)) continue;
    const long di[3] = {1, 0, 1}, dj[3] = {0, 1, 1};
    for (int s = 0; s < 3; ++s) {
      const long ni = i + di[s], nj = j + dj[s];
      if (ni >= I || nj >= J) continue;
      const double nc = c + d(ni, nj);
      if (nc < dist(ni, nj)) {
        dist(ni, nj) = nc;
        pq.emplace(nc, ni * J + nj);
      }
    }
  }
  return dist(I - 1, J - 1);
}

// Minimal-cost alignment path via Dijkstra with predecessor tracking.
// Ties are broken arbitrarily, so feed inputs whose optimum is unique.
inline std::vector<std::pair<int, int>> dijkstra_dtw_path(
    const Eigen::MatrixXd& d) {
  const long I = d.rows(), J = d.cols();
  const double inf = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd dist = Eigen::MatrixXd::Constant(I, J, inf);
  std::vector<long> prev(I * J, -1);
  using Item = std::pair<double, long>;  // cost, i * J + j
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
  dist(0, 0) = d(0, 0);
  pq.emplace(dist(0, 0), 0);
  while (!pq.empty()) {
    auto [c, key] = pq.top();
    pq.pop();
    const long i = key / J, j = key % J;
    if (c > dist(i, j)) continue;
    const long di[3] = {1, 0, 1}, dj[3] = {0, 1, 1};
    for (int s = 0; s < 3; ++s) {
      const long ni = i + di[s], nj = j + dj[s];
      if (ni >= I || nj >= J) continue;
      const double nc = c + d(ni, nj);
      if (nc < dist(ni, nj)) {
        dist(ni, nj) = nc;
        prev[ni * J + nj] = key;
        pq.emplace(nc, ni * J + nj);
      }
    }
  }
  std::vector<std::pair<int, int>> path;
  for (long key = (I - 1) * J + (J - 1); key != -1; key = prev[key])
    path.emplace_back(static_cast<int>(key / J), static_cast<int>(key % J));
  std::reverse(path.begin(), path.end());
  return path;
}

// Squared-Euclidean frame-distance matrix between two feature sequences.
inline Eigen::MatrixXd frame_distances(const Eigen::MatrixXd& a,
                                       const Eigen::MatrixXd& b) {
  Eigen::MatrixXd d(a.rows(), b.rows());
  for (long i = 0; i < a.rows(); ++i)
    for (long j = 0; j < b.rows(); ++j)
      d(i, j) = (a.row(i) - b.row(j)).squaredNorm();
  return d;
}

}  // namespace oracles
