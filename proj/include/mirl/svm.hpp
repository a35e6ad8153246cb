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

#ifndef MIRL_SVM_HPP_
#define MIRL_SVM_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace mirl {

using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// f(x) = w.x + b, the region confidence function.
struct LinearModel {
  Eigen::VectorXd w;
  double b = 0.0;

  int dim() const { return static_cast<int>(w.size()); }
  // Raw signed margin. Throws DimensionMismatch.
  double decision(std::span<const double> features) const;
};

struct SvmConfig {
  double C = 1.0;
  double tolerance = 1e-6;
  int max_epochs = 10000;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SvmSolution {
  LinearModel model;
  double objective = 0.0;
  // Primal objective of the incumbent after each outer step; non-increasing.
  std::vector<double> objective_trace;
  int epochs = 0;
};

// Soft-margin linear SVM,
//   min 1/2 |w|^2 + C sum_i max(0, 1 - y_i (w.x_i + b)),
// with an unregularized bias. Rows of `x` are examples, labels are +-1.
SvmSolution train_svm(const FeatureMatrix& x, std::span<const int> y, const SvmConfig& config);
LinearModel train(const FeatureMatrix& x, std::span<const int> y, const SvmConfig& config);

double primal_objective(const LinearModel& model, const FeatureMatrix& x, std::span<const int> y,
                        double C);

std::string serialize_model(const LinearModel& model);
LinearModel parse_model(std::string_view text);

}  // namespace mirl

#endif  // MIRL_SVM_HPP_
