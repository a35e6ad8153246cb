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

#ifndef MIRL_EVAL_HPP_
#define MIRL_EVAL_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mirl/geometry.hpp"

namespace mirl {

struct Detection {
  std::uint32_t image = 0;
  Rect rect{0.0, 0.0, 1.0, 1.0};
  double confidence = 0.0;
};

struct GroundTruth {
  std::uint32_t image = 0;
  Rect rect{0.0, 0.0, 1.0, 1.0};
};

enum class MatchCriterion {
  kIoU,        // iou(gt, det) >= threshold
  kInclusion,  // containment_fraction(gt, det) >= threshold, IoU ignored
};

struct ApCriterion {
  MatchCriterion kind = MatchCriterion::kIoU;
  double threshold = 0.5;
};

// Greedy suppression within one image: highest confidence first (ties by
// rect order), dropping anything with IoU >= threshold to a kept detection.
std::vector<Detection> nms(std::vector<Detection> detections, double threshold);

// Ranking order shared by every AP computation here: confidence descending,
// then image id, then rect.
bool ranks_before(const Detection& a, const Detection& b);

// Area under the monotone precision envelope for a ranked hit list.
double interpolated_ap(const std::vector<bool>& hits, std::size_t positives);

// VOC-style detection AP over a whole test set. Each detection claims the
// unmatched ground truth of its image with the best criterion value, if any
// qualifies; otherwise it is a false positive. nullopt when there are no
// ground truths.
std::optional<double> detection_ap(std::span<const Detection> detections,
                                   std::span<const GroundTruth> ground_truth,
                                   ApCriterion criterion);

struct ImageScore {
  std::uint32_t image = 0;
  double score = 0.0;
  int label = -1;
};

// AP of the image ranking (score descending, ties by image id). Throws
// InvalidArgument without positives.
double classification_ap(std::span<const ImageScore> scores);

struct EpisodeCost {
  std::size_t evaluated = 0;  // |H_final|
  std::size_t total = 0;      // |R|
  double seconds = 0.0;
};

struct CostSummary {
  std::size_t episodes = 0;
  double mean_fraction = 0.0;
  double stdev_fraction = 0.0;
  double mean_evaluated = 0.0;
  double mean_total = 0.0;
  // Exhaustive evaluated count over sequential evaluated count.
  double count_speedup = 0.0;
  double mean_seconds = 0.0;
  double exhaustive_seconds = 0.0;
  double wall_speedup = 0.0;
};

// `exhaustive_seconds` is the mean per-image time of the exhaustive pipeline.
CostSummary cost_report(std::span<const EpisodeCost> episodes, double exhaustive_seconds);

}  // namespace mirl

#endif  // MIRL_EVAL_HPP_
