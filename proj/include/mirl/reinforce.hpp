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

#ifndef MIRL_REINFORCE_HPP_
#define MIRL_REINFORCE_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mirl/agent.hpp"

namespace mirl {

struct TrainConfig {
  int rollouts = 128;  // M, episodes per gradient estimate
  double lambda = 0.0;
  RolloutConfig rollout;
  // Step size eta_k = step_size / (1 + step_decay * k).
  double step_size = 0.2;
  double step_decay = 0.02;
  // Gradients are rescaled to at most this norm before the step. 0 disables.
  double clip_norm = 5.0;
  int max_iterations = 60;
  int restarts = 8;
  int patience = 20;
  double tolerance = 1e-3;
  // Rollouts per validation image; every evaluation reuses the same streams.
  int val_repeats = 4;
  double init_scale = 0.1;
  double init_sigma = 0.2;
  // false keeps the last iterate of each restart and picks the restart by its
  // final validation reward.
  bool validation_selection = true;
  std::uint64_t seed = 0;
  int jobs = 1;

  void validate() const;
};

struct GradientEstimate {
  Eigen::VectorXd gradient;  // flattened like PolicyParams
  int samples = 0;
  double mean_reward = 0.0;
  double reward_variance = 0.0;
  double mean_evaluated_fraction = 0.0;
};

// Sum over non-forced steps of grad log pi(a_t | s_t), replaying the episode.
Eigen::VectorXd episode_score_gradient(const Episode& episode, const PolicyParams& policy,
                                       const SearchImage& image);

// (1/M) sum_i grad log p(episode_i) * R_i - lambda * theta. Episode i draws its
// image and actions from stream i of `seed`, so `jobs` never changes the result.
GradientEstimate estimate_gradient(std::span<const SearchImage> images, const PolicyParams& policy,
                                   const RolloutConfig& rollout, int rollouts, double lambda,
                                   std::uint64_t seed, int jobs = 1);

struct RolloutStats {
  double mean_reward = 0.0;
  double evaluated_fraction = 0.0;
  double accuracy = 0.0;  // fraction of episodes with sign(c_T) == label
};

// `repeats` rollouts per image on fixed streams of `seed`.
RolloutStats evaluate_policy(std::span<const SearchImage> images, const PolicyParams& policy,
                             const RolloutConfig& rollout, int repeats, std::uint64_t seed,
                             int jobs = 1);

struct TrainLogEntry {
  int restart = 0;
  int iteration = 0;
  double train_reward = 0.0;
  double val_reward = 0.0;
  double evaluated_fraction = 0.0;
  double grad_norm = 0.0;
  bool accepted = false;
};

struct PolicyTrainResult {
  PolicyParams policy;
  double val_reward = 0.0;
  int restart = 0;
  std::vector<double> restart_rewards;  // NaN for diverged restarts
  std::vector<TrainLogEntry> log;
};

PolicyTrainResult train_policy(std::span<const SearchImage> train, std::span<const SearchImage> val,
                               int feature_dim, const TrainConfig& config);

std::string format_train_log(const std::vector<TrainLogEntry>& log);

// Exact expected return of the regularized objective on a tiny instance:
// mean over images of E[sum r] - lambda/2 |theta|^2, with its analytic gradient.
// Location draws are integrated over the cells cut by region edges.
struct ExactObjective {
  double value = 0.0;
  Eigen::VectorXd gradient;
};

struct EnumerationLimits {
  std::size_t max_regions = 6;
  int max_steps = 3;
};

ExactObjective exact_objective(std::span<const SearchImage> images, const PolicyParams& policy,
                               const RolloutConfig& rollout, double lambda,
                               const EnumerationLimits& limits = {});

// Max relative error between the analytic gradient and central differences of
// the exact objective, floored at 1e-3 in the denominator.
double fd_check(std::span<const SearchImage> images, const PolicyParams& policy,
                const RolloutConfig& rollout, double lambda, double h,
                const EnumerationLimits& limits = {});

}  // namespace mirl

#endif  // MIRL_REINFORCE_HPP_
