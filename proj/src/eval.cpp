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

#include "mirl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mirl/error.hpp"

namespace mirl {

std::vector<Detection> nms(std::vector<Detection> detections, double threshold) {
  if (!(threshold > 0.0) || threshold > 1.0)
    throw invalid_argument("nms: threshold must lie in (0, 1]");
  std::sort(detections.begin(), detections.end(), [](const Detection& a, const Detection& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.rect < b.rect;
  });
  std::vector<Detection> kept;
  for (const Detection& d : detections) {
    bool suppressed = false;
    for (const Detection& k : kept) {
      if (iou(k.rect, d.rect) >= threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

bool ranks_before(const Detection& a, const Detection& b) {
  if (a.confidence != b.confidence) return a.confidence > b.confidence;
  if (a.image != b.image) return a.image < b.image;
  return a.rect < b.rect;
}

double interpolated_ap(const std::vector<bool>& hits, std::size_t positives) {
  if (positives == 0) throw invalid_argument("ap: no positives");
  const std::size_t n = hits.size();
  std::vector<double> precision(n), recall(n);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    tp += hits[i];
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / static_cast<double>(positives);
  }
  for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

std::optional<double> detection_ap(std::span<const Detection> detections,
                                   std::span<const GroundTruth> ground_truth,
                                   ApCriterion criterion) {
  if (!(criterion.threshold > 0.0) || criterion.threshold > 1.0)
    throw invalid_argument("ap: threshold must lie in (0, 1]");
  if (ground_truth.empty()) return std::nullopt;
  std::vector<Detection> ranked(detections.begin(), detections.end());
  for (const Detection& d : ranked)
    if (!std::isfinite(d.confidence)) throw invalid_argument("ap: non-finite confidence");
  std::sort(ranked.begin(), ranked.end(), ranks_before);

  std::vector<bool> matched(ground_truth.size(), false);
  std::vector<bool> hits(ranked.size(), false);
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const Detection& d = ranked[i];
    std::size_t best = ground_truth.size();
    double best_value = -1.0;
    for (std::size_t g = 0; g < ground_truth.size(); ++g) {
      if (matched[g] || ground_truth[g].image != d.image) continue;
      const double value = criterion.kind == MatchCriterion::kIoU
                               ? iou(ground_truth[g].rect, d.rect)
                               : containment_fraction(ground_truth[g].rect, d.rect);
      if (value >= criterion.threshold && value > best_value) {
        best = g;
        best_value = value;
      }
    }
    if (best < ground_truth.size()) {
      matched[best] = true;
      hits[i] = true;
    }
  }
  return interpolated_ap(hits, ground_truth.size());
}

double classification_ap(std::span<const ImageScore> scores) {
  std::vector<ImageScore> ranked(scores.begin(), scores.end());
  std::sort(ranked.begin(), ranked.end(), [](const ImageScore& a, const ImageScore& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.image < b.image;
  });
  std::size_t positives = 0;
  std::vector<bool> hits(ranked.size());
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (!std::isfinite(ranked[i].score)) throw invalid_argument("ap: non-finite score");
    hits[i] = ranked[i].label > 0;
    positives += hits[i];
  }
  if (positives == 0) throw invalid_argument("classification_ap: no positive images");
  return interpolated_ap(hits, positives);
}

CostSummary cost_report(std::span<const EpisodeCost> episodes, double exhaustive_seconds) {
  CostSummary s;
  s.episodes = episodes.size();
  s.exhaustive_seconds = exhaustive_seconds;
  if (episodes.empty()) return s;
  double sum_fraction = 0.0, sum_sq = 0.0, evaluated = 0.0, total = 0.0, seconds = 0.0;
  for (const EpisodeCost& e : episodes) {
    if (e.total == 0 || e.evaluated == 0 || e.evaluated > e.total)
      throw invalid_argument("cost_report: evaluated count outside (0, total]");
    const double f = static_cast<double>(e.evaluated) / static_cast<double>(e.total);
    sum_fraction += f;
    sum_sq += f * f;
    evaluated += static_cast<double>(e.evaluated);
    total += static_cast<double>(e.total);
    seconds += e.seconds;
  }
  const double n = static_cast<double>(episodes.size());
  s.mean_fraction = sum_fraction / n;
  s.stdev_fraction =
      n > 1 ? std::sqrt(std::max(0.0, (sum_sq - n * s.mean_fraction * s.mean_fraction) / (n - 1)))
            : 0.0;
  s.mean_evaluated = evaluated / n;
  s.mean_total = total / n;
  s.count_speedup = total / evaluated;
  s.mean_seconds = seconds / n;
  s.wall_speedup = s.mean_seconds > 0.0 ? exhaustive_seconds / s.mean_seconds : 0.0;
  return s;
}

}  // namespace mirl
