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

#ifndef MIRL_PIPELINE_HPP_
#define MIRL_PIPELINE_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mirl/agent.hpp"
#include "mirl/dataset.hpp"
#include "mirl/eval.hpp"
#include "mirl/miltrain.hpp"
#include "mirl/reinforce.hpp"

namespace mirl {

// "BB-DET", "CMI-EYE-DET", "MI-EYE-DET", "CMI-IL-DET" or "MI-IL-DET".
std::string detector_method(Supervision mode, bool constraints);

struct DetectorTrainConfig {
  Supervision mode = Supervision::kEye;
  bool constraints = true;  // ignored for bounding-box supervision
  std::vector<double> c_grid{0.1, 1.0, 10.0};
  CmiConfig cmi;  // svm.C is taken from the grid
  int target_class = 1;
  double nms_threshold = 0.2;

  void validate() const;
};

struct GridPoint {
  double value = 0.0;  // C or lambda
  double score = 0.0;  // validation IoU AP or validation reward
};

struct DetectorArtifact {
  std::string method;
  Supervision mode = Supervision::kEye;
  bool constraints = true;
  int target_class = 1;
  double C = 1.0;
  std::vector<GridPoint> grid;
  LinearModel model;
  // Instance labels used by the final trainval fit.
  LabelAssignment assignment;
  int iterations = 0;
  double objective = 0.0;
  std::size_t restart = 0;
};

// Grid over C scored by validation IoU AP (ties keep the smaller C), then a
// refit on train+val with the chosen C.
DetectorArtifact train_detector(const Dataset& dataset, const DetectorTrainConfig& config);

struct ExhaustiveEval {
  std::optional<double> ap_iou;
  std::optional<double> ap_inclusion;
  double classification_ap = 0.0;
  std::size_t images = 0;
  double seconds_per_image = 0.0;  // wall clock, not reproducible
};

ExhaustiveEval evaluate_exhaustive(const Dataset& dataset, const LinearModel& model,
                                   std::span<const std::size_t> images, int target_class,
                                   double nms_threshold = 0.2);

std::vector<SearchImage> search_images(const Dataset& dataset, std::span<const std::size_t> images,
                                       const LinearModel& model, int target_class);

struct PolicySetup {
  TrainConfig train;
  std::vector<double> lambda_grid{0.0, 1e-3, 1e-2};
  int target_class = 1;

  void validate() const;
};

struct PolicyArtifact {
  PolicyParams policy;
  double lambda = 0.0;
  double val_reward = 0.0;
  int restart = 0;
  std::vector<GridPoint> grid;
  std::string log;  // training log of the chosen lambda
};

// Gradients from the train split, lambda and restart selection on val.
PolicyArtifact train_sequential(const Dataset& dataset, const LinearModel& model,
                                const PolicySetup& setup);

struct SequentialRepeat {
  std::optional<double> ap_iou;
  std::optional<double> ap_inclusion;
  double classification_ap = 0.0;
  double evaluated_fraction = 0.0;
};

struct SequentialEval {
  std::vector<SequentialRepeat> repeats;
  CostSummary cost;  // pooled over every repeat
};

// Repeat r rolls out image i on stream (seed, r * |images| + i); each episode
// contributes its predicted region as the image's single detection.
SequentialEval evaluate_sequential(const Dataset& dataset, const LinearModel& model,
                                   const PolicyParams& policy, std::span<const std::size_t> images,
                                   int target_class, const RolloutConfig& rollout, int repeats,
                                   std::uint64_t seed, double exhaustive_seconds, int jobs = 1);

struct MeanStdev {
  double mean = 0.0;
  double stdev = 0.0;  // sample stdev; 0 for a single value
};
MeanStdev mean_stdev(std::span<const double> values);

}  // namespace mirl

#endif  // MIRL_PIPELINE_HPP_
