// Copyright 2026 The mirl Authors. All Rights Reserved.
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

#ifndef MIRL_MILTRAIN_HPP_
#define MIRL_MILTRAIN_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mirl/dataset.hpp"
#include "mirl/svm.hpp"

namespace mirl {

// Instance labels in {-1, 0, +1}, keyed by region id (ascending).
struct LabelAssignment {
  std::vector<RegionId> regions;
  std::vector<int> labels;

  // Throws InvalidArgument when the region is not part of the assignment.
  int label(RegionId region) const;
  bool contains(RegionId region) const;
  std::size_t size() const { return regions.size(); }
  bool operator==(const LabelAssignment&) const = default;
};

struct CmiConfig {
  double subregion_threshold = 0.2;  // T_S
  double fringe_threshold = 0.2;     // T_F
  int restarts = 30;
  double ratio_min = 0.1;  // positive/negative ratio range for initialization
  double ratio_max = 1.0;
  int max_iterations = 50;
  SvmConfig svm;
  bool constraints = true;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool record_trajectory = false;

  void validate() const;
};

struct RestartTrace {
  int iterations = 0;
  bool converged = false;
  double objective = 0.0;
  // Labels over LabelAssignment::regions: the initial draw, then one entry
  // per relabeling pass. Only filled when record_trajectory is set.
  std::vector<std::vector<int>> trajectory;
};

struct CmiResult {
  LinearModel model;
  LabelAssignment assignment;
  int iterations = 0;
  bool converged = false;
  double objective = 0.0;
  std::size_t restart = 0;
  std::vector<RestartTrace> restarts;
};

// Alternates SVM fitting on labelled instances with greedy per-bag relabeling
// under the fringe and subregion constraints. Bags from BagSet::instances
// (bounding-box mode) are not accepted here.
CmiResult cmi_svm_train(const BagSet& bags, const Dataset& dataset, const CmiConfig& config);

// Same alternation without fringe/subregion constraints and with labels
// restricted to {-1, +1}.
CmiResult mi_svm_train(const BagSet& bags, const Dataset& dataset, CmiConfig config);

// 1/2 |w|^2 + C sum_{y_i != 0} max(0, 1 - y_i (w.g_i + b)).
double mil_objective(const LinearModel& model, const LabelAssignment& assignment,
                     const Dataset& dataset, double C);

// Fully supervised fit on bounding-box instance labels.
LinearModel train_supervised(const std::vector<InstanceLabel>& instances, const Dataset& dataset,
                             const SvmConfig& config);

std::string serialize_assignment(const LabelAssignment& assignment);
LabelAssignment parse_assignment(std::string_view text);

}  // namespace mirl

#endif  // MIRL_MILTRAIN_HPP_
