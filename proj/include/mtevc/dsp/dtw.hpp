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
#include <utility>
#include <vector>

namespace mtevc::dsp {

// Monotone alignment path from (0,0) to (I-1, J-1) over the step set
// {(1,0), (0,1), (1,1)}.
struct DtwPath {
  std::vector<std::pair<int, int>> pairs;
  double total_cost = 0.0;
};

// Minimal-cost alignment of two feature sequences (rows are frames) under
// the squared-Euclidean frame distance. Ties during backtracking prefer the
// diagonal step, then advancing the first sequence.
DtwPath dtw_align(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// For each frame j of the second sequence, the lowest first-sequence index
// paired with j on the path. Result has one entry per b-frame.
std::vector<int> dtw_project_to_second(const DtwPath& path, int b_frames);

}  // namespace mtevc::dsp
