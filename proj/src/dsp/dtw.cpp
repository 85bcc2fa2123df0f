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

#include "mtevc/dsp/dtw.hpp"

#include <algorithm>
#include <string>

#include "mtevc/error.hpp"

namespace mtevc::dsp {

DtwPath dtw_align(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const long ia = a.rows(), jb = b.rows();
  if (ia == 0 || jb == 0) throw InvalidInput("dtw_align: empty sequence");
  if (a.cols() != b.cols())
    throw InvalidInput("dtw_align: feature dimensions differ (" +
                       std::to_string(a.cols()) + " vs " +
                       std::to_string(b.cols()) + ")");

  Eigen::MatrixXd dist(ia, jb);
  for (long i = 0; i < ia; ++i)
    for (long j = 0; j < jb; ++j)
      dist(i, j) = (a.row(i) - b.row(j)).squaredNorm();

  Eigen::MatrixXd acc(ia, jb);
  // Backpointers: 0 = diagonal, 1 = from (i-1, j), 2 = from (i, j-1).
  Eigen::Matrix<int8_t, Eigen::Dynamic, Eigen::Dynamic> from(ia, jb);
  acc(0, 0) = dist(0, 0);
  from(0, 0) = -1;
  for (long i = 1; i < ia; ++i) {
    acc(i, 0) = acc(i - 1, 0) + dist(i, 0);
    from(i, 0) = 1;
  }
  for (long j = 1; j < jb; ++j) {
    acc(0, j) = acc(0, j - 1) + dist(0, j);
    from(0, j) = 2;
  }
  for (long i = 1; i < ia; ++i) {
    for (long j = 1; j < jb; ++j) {
      double diag = acc(i - 1, j - 1);
      double up = acc(i - 1, j);
      double left = acc(i, j - 1);
      double best = diag;
      int8_t tag = 0;
      if (up < best) {
        best = up;
        tag = 1;
      }
      if (left < best) {
        best = left;
        tag = 2;
      }
      acc(i, j) = best + dist(i, j);
      from(i, j) = tag;
    }
  }

  DtwPath path;
  path.total_cost = acc(ia - 1, jb - 1);
  long i = ia - 1, j = jb - 1;
  while (true) {
    path.pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
    int8_t tag = from(i, j);
    if (tag < 0) break;
    if (tag == 0) {
      --i;
      --j;
    } else if (tag == 1) {
      --i;
    } else {
      --j;
    }
  }
  std::reverse(path.pairs.begin(), path.pairs.end());
  return path;
}

std::vector<int> dtw_project_to_second(const DtwPath& path, int b_frames) {
  std::vector<int> map(b_frames, -1);
  for (const auto& [i, j] : path.pairs) {
    if (map[j] < 0) map[j] = i;  // lowest i wins; pairs arrive i-ascending
  }
  return map;
}

}  // namespace mtevc::dsp
