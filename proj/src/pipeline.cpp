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

#include "mirl/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "mirl/error.hpp"
#include "mirl/parallel.hpp"

namespace mirl {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<GroundTruth> ground_truth_of(const Dataset& dataset,
                                         std::span<const std::size_t> images, int target_class) {
  std::vector<GroundTruth> out;
  for (std::size_t i : images) {
    const SyntheticImage& im = dataset.images[i];
    if (im.label(target_class) > 0)
      for (const Rect& g : im.ground_truth) out.push_back({im.id, g});
  }
  return out;
}

std::vector<std::size_t> concat(std::vector<std::size_t> a, const std::vector<std::size_t>& b) {
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end());
  return a;
}

struct Fit {
  LinearModel model;
  LabelAssignment assignment;
  int iterations = 0;
  double objective = 0.0;
  std::size_t restart = 0;
};

Fit fit_detector(const Dataset& dataset, const DetectorTrainConfig& config,
                 std::span<const std::size_t> images, double C) {
  const BagSet bags =
      make_bags(dataset, config.mode, images, config.target_class, config.cmi.fringe_threshold);
  Fit fit;
  if (config.mode == Supervision::kBoundingBox) {
    SvmConfig svm = config.cmi.svm;
    svm.C = C;
    fit.model = train_supervised(bags.instances, dataset, svm);
    std::vector<InstanceLabel> sorted = bags.instances;
    std::sort(sorted.begin(), sorted.end(),
              [](const InstanceLabel& a, const InstanceLabel& b) { return a.region < b.region; });
    for (const InstanceLabel& x : sorted) {
      fit.assignment.regions.push_back(x.region);
      fit.assignment.labels.push_back(x.label);
    }
    fit.objective = mil_objective(fit.model, fit.assignment, dataset, C);
    return fit;
  }
  CmiConfig cmi = config.cmi;
  cmi.svm.C = C;
  cmi.constraints = config.constraints;
  CmiResult r = cmi_svm_train(bags, dataset, cmi);
  fit.model = std::move(r.model);
  fit.assignment = std::move(r.assignment);
  fit.iterations = r.iterations;
  fit.objective = r.objective;
  fit.restart = r.restart;
  return fit;
}

}  // namespace

std::string detector_method(Supervision mode, bool constraints) {
  switch (mode) {
    case Supervision::kBoundingBox: return "BB-DET";
    case Supervision::kEye: return constraints ? "CMI-EYE-DET" : "MI-EYE-DET";
    case Supervision::kImageLabel: return constraints ? "CMI-IL-DET" : "MI-IL-DET";
  }
  return "?";
}

void DetectorTrainConfig::validate() const {
  if (c_grid.empty()) throw invalid_argument("detector config: empty C grid");
  for (double c : c_grid)
    if (!(c > 0.0) || !std::isfinite(c))
      throw invalid_argument("detector config: grid values of C must be finite and > 0");
  if (target_class < 1) throw invalid_argument("detector config: target class must be >= 1");
  if (!(nms_threshold > 0.0 && nms_threshold <= 1.0))
    throw invalid_argument("detector config: nms threshold must lie in (0, 1]");
  cmi.validate();
}

DetectorArtifact train_detector(const Dataset& dataset, const DetectorTrainConfig& config) {
  config.validate();
  if (config.target_class > dataset.classes)
    throw invalid_argument("train_detector: target class " + std::to_string(config.target_class) +
                           " exceeds the dataset's " + std::to_string(dataset.classes));
  const auto train = dataset.images_in(Split::kTrain);
  const auto val = dataset.images_in(Split::kVal);

  DetectorArtifact art;
  art.mode = config.mode;
  art.constraints = config.mode == Supervision::kBoundingBox ? false : config.constraints;
  art.method = detector_method(config.mode, config.constraints);
  art.target_class = config.target_class;
  double best = -1.0;
  for (double c : config.c_grid) {
    const Fit fit = fit_detector(dataset, config, train, c);
    const ExhaustiveEval ev =
        evaluate_exhaustive(dataset, fit.model, val, config.target_class, config.nms_threshold);
    const double score = ev.ap_iou.value_or(0.0);
    art.grid.push_back({c, score});
    if (score > best) {
      best = score;
      art.C = c;
    }
  }
  Fit final_fit = fit_detector(dataset, config, concat(train, val), art.C);
  art.model = std::move(final_fit.model);
  art.assignment = std::move(final_fit.assignment);
  art.iterations = final_fit.iterations;
  art.objective = final_fit.objective;
  art.restart = final_fit.restart;
  return art;
}

ExhaustiveEval evaluate_exhaustive(const Dataset& dataset, const LinearModel& model,
                                   std::span<const std::size_t> images, int target_class,
                                   double nms_threshold) {
  if (model.dim() != dataset.feature_dim)
    throw dimension_error("evaluate: model dimension " + std::to_string(model.dim()) +
                          " differs from dataset dimension " + std::to_string(dataset.feature_dim));
  std::vector<Detection> detections;
  std::vector<ImageScore> scores;
  double seconds = 0.0;
  for (std::size_t i : images) {
    const SyntheticImage& im = dataset.images[i];
    const auto start = Clock::now();
    std::vector<Detection> per_image;
    double top = -std::numeric_limits<double>::infinity();
    for (const Region& r : dataset.regions_of(im)) {
      const double c = model.decision(r.features);
      per_image.push_back({im.id, r.rect, c});
      top = std::max(top, c);
    }
    seconds += seconds_since(start);
    const auto kept = nms(std::move(per_image), nms_threshold);
    detections.insert(detections.end(), kept.begin(), kept.end());
    scores.push_back({im.id, top, im.label(target_class)});
  }
  const auto gts = ground_truth_of(dataset, images, target_class);
  ExhaustiveEval out;
  out.images = images.size();
  out.ap_iou = detection_ap(detections, gts, {MatchCriterion::kIoU, 0.5});
  out.ap_inclusion = detection_ap(detections, gts, {MatchCriterion::kInclusion, 0.5});
  out.classification_ap = classification_ap(scores);
  out.seconds_per_image = images.empty() ? 0.0 : seconds / static_cast<double>(images.size());
  return out;
}

std::vector<SearchImage> search_images(const Dataset& dataset, std::span<const std::size_t> images,
                                       const LinearModel& model, int target_class) {
  std::vector<SearchImage> out;
  out.reserve(images.size());
  for (std::size_t i : images) {
    const SyntheticImage& im = dataset.images[i];
    SearchImage s;
    s.image = im.id;
    s.label = im.label(target_class);
    s.regions = dataset.regions_of(im);
    s.model = &model;
    out.push_back(s);
  }
  return out;
}

void PolicySetup::validate() const {
  train.validate();
  if (lambda_grid.empty()) throw invalid_argument("policy config: empty lambda grid");
  for (double l : lambda_grid)
    if (!(l >= 0.0) || !std::isfinite(l))
      throw invalid_argument("policy config: grid values of lambda must be finite and >= 0");
  if (target_class < 1) throw invalid_argument("policy config: target class must be >= 1");
}

PolicyArtifact train_sequential(const Dataset& dataset, const LinearModel& model,
                                const PolicySetup& setup) {
  setup.validate();
  if (model.dim() != dataset.feature_dim)
    throw dimension_error("train-policy: detector dimension differs from dataset dimension");
  const auto train_idx = dataset.images_in(Split::kTrain);
  const auto val_idx = dataset.images_in(Split::kVal);
  const auto train = search_images(dataset, train_idx, model, setup.target_class);
  const auto val = search_images(dataset, val_idx, model, setup.target_class);
  PolicyArtifact art;
  bool have = false;
  for (double lambda : setup.lambda_grid) {
    TrainConfig tc = setup.train;
    tc.lambda = lambda;
    PolicyTrainResult r = train_policy(train, val, dataset.feature_dim, tc);
    art.grid.push_back({lambda, r.val_reward});
    if (!have || r.val_reward > art.val_reward) {
      have = true;
      art.policy = std::move(r.policy);
      art.lambda = lambda;
      art.val_reward = r.val_reward;
      art.restart = r.restart;
      art.log = format_train_log(r.log);
    }
  }
  return art;
}

SequentialEval evaluate_sequential(const Dataset& dataset, const LinearModel& model,
                                   const PolicyParams& policy, std::span<const std::size_t> images,
                                   int target_class, const RolloutConfig& rollout_config,
                                   int repeats, std::uint64_t seed, double exhaustive_seconds,
                                   int jobs) {
  if (repeats < 1) throw invalid_argument("evaluate: repeats must be >= 1");
  if (model.dim() != dataset.feature_dim || policy.feature_dim() != dataset.feature_dim)
    throw dimension_error("evaluate: artifact dimensions differ from dataset dimension");
  const auto search = search_images(dataset, images, model, target_class);
  const auto gts = ground_truth_of(dataset, images, target_class);
  const std::size_t n = search.size();
  const auto reps = static_cast<std::size_t>(repeats);
  std::vector<Episode> episodes(n * reps);
  std::vector<double> seconds(n * reps);
  parallel_for(n * reps, jobs, [&](std::size_t k) {
    Rng rng = make_rng(seed, k);
    const auto start = Clock::now();
    episodes[k] = rollout(search[k % n], policy, rollout_config, rng);
    seconds[k] = seconds_since(start);
  });

  SequentialEval out;
  std::vector<EpisodeCost> costs;
  for (std::size_t r = 0; r < reps; ++r) {
    std::vector<Detection> detections;
    std::vector<ImageScore> scores;
    double frac = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Episode& ep = episodes[r * n + i];
      detections.push_back({ep.image, search[i].regions[ep.predicted].rect, ep.confidence});
      scores.push_back({ep.image, ep.confidence, search[i].label});
      frac += static_cast<double>(ep.evaluated) / static_cast<double>(ep.total);
      costs.push_back({ep.evaluated, ep.total, seconds[r * n + i]});
    }
    SequentialRepeat rep;
    rep.ap_iou = detection_ap(detections, gts, {MatchCriterion::kIoU, 0.5});
    rep.ap_inclusion = detection_ap(detections, gts, {MatchCriterion::kInclusion, 0.5});
    rep.classification_ap = classification_ap(scores);
    rep.evaluated_fraction = n == 0 ? 0.0 : frac / static_cast<double>(n);
    out.repeats.push_back(rep);
  }
  out.cost = cost_report(costs, exhaustive_seconds);
  return out;
}

MeanStdev mean_stdev(std::span<const double> values) {
  MeanStdev m;
  if (values.empty()) return m;
  for (double v : values) m.mean += v;
  m.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - m.mean) * (v - m.mean);
    m.stdev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return m;
}

}  // namespace mirl
