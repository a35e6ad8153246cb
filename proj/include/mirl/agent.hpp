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

#ifndef MIRL_AGENT_HPP_
#define MIRL_AGENT_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "mirl/dataset.hpp"
#include "mirl/rng.hpp"
#include "mirl/svm.hpp"

namespace mirl {

struct PolicyParams {
  Eigen::Vector4d theta_d = Eigen::Vector4d::Zero();  // termination head
  Eigen::VectorXd theta_e;                            // evidence head
  Eigen::VectorXd theta_px;                           // location offset, x axis
  Eigen::VectorXd theta_py;                           // location offset, y axis
  double log_sigma_x = 0.0;
  double log_sigma_y = 0.0;

  static PolicyParams zeros(int feature_dim);
  int feature_dim() const { return static_cast<int>(theta_e.size()); }
  // 4 + 3n + 2.
  int size() const { return 4 + 3 * feature_dim() + 2; }
  // Layout: [theta_d, theta_e, theta_px, theta_py, log_sigma_x, log_sigma_y].
  Eigen::VectorXd flatten() const;
  static PolicyParams unflatten(const Eigen::VectorXd& flat, int feature_dim);
};

std::string serialize_policy(const PolicyParams& policy);
PolicyParams parse_policy(std::string_view text);

// One image as the agent sees it. Region indices below are local to the
// image. Confidences f_c(r) are taken from `confidence` when it is non-empty,
// otherwise computed from `model` the first time a region is observed.
struct SearchImage {
  std::uint32_t image = 0;
  int label = -1;
  std::span<const Region> regions;
  std::span<const double> confidence;
  const LinearModel* model = nullptr;

  std::size_t size() const { return regions.size(); }
};

struct AgentState {
  std::vector<std::size_t> history;  // H, ascending
  std::vector<std::size_t> used;     // S, ascending
  int t = 0;

  bool observed(std::size_t i) const;
  bool is_used(std::size_t i) const;
  // H \ S, ascending.
  std::vector<std::size_t> candidates() const;
};

// Lazily evaluated f_c over one image, counting evaluations.
class ConfidenceCache {
 public:
  explicit ConfidenceCache(const SearchImage& image);
  double operator()(std::size_t i);
  std::size_t evaluated() const { return evaluated_; }

 private:
  const SearchImage& image_;
  std::vector<double> values_;
  std::vector<bool> known_;
  std::size_t evaluated_ = 0;
};

// Regions containing the canvas center. Throws InvalidArgument if none.
AgentState initial_state(const SearchImage& image);

// Highest-confidence observed region (lowest index on ties) and its value.
std::pair<std::size_t, double> best_observed(const AgentState& state, ConfidenceCache& conf);

// v(s) = [max_{r in H} f_c(r), t, |H|/|R|, 1]. Throws InvalidArgument on empty H.
Eigen::Vector4d termination_features(const AgentState& state, std::size_t total_regions,
                                     ConfidenceCache& conf);

// sigmoid(theta_d . v), kept strictly inside (0, 1).
double termination_prob(const Eigen::Vector4d& theta_d, const Eigen::Vector4d& v);
double log_sigmoid(double z);

struct EvidenceDistribution {
  std::vector<std::size_t> candidates;
  std::vector<double> probs;
};

// Softmax of theta_e . g(r) over H \ S. Throws InvalidArgument when empty.
EvidenceDistribution evidence_distribution(const AgentState& state, const Eigen::VectorXd& theta_e,
                                           std::span<const Region> regions);

// center + (theta_px . g, theta_py . g) * half-extent, componentwise.
Point location_mean(const Region& evidence, const Eigen::VectorXd& theta_px,
                    const Eigen::VectorXd& theta_py);

struct Action {
  bool terminate = false;
  std::size_t evidence = 0;
  Point location{0.0, 0.0};
};

struct StepSample {
  Action action;
  double log_prob = 0.0;
};

// Draws d ~ Bernoulli(termination_prob); on d = 0 draws the evidence region
// and the saccade location. Empty H \ S forces termination with no sampled
// factor (log_prob 0).
StepSample sample_step(const AgentState& state, const PolicyParams& policy,
                       const SearchImage& image, ConfidenceCache& conf, Rng& rng);

// Log-probability of a given action under the policy. `forced` actions
// contribute 0.
double action_log_prob(const AgentState& state, const Action& action, bool forced,
                       const PolicyParams& policy, const SearchImage& image,
                       ConfidenceCache& conf);

// H <- H + {i : z in r_i}, S <- S + {e}, t <- t + 1.
AgentState observe(const AgentState& state, const Action& saccade, std::span<const Region> regions);

double reward(bool terminate, double confidence, int label, double alpha);

struct EpisodeStep {
  Action action;
  bool forced = false;
  double log_prob = 0.0;
  double reward = 0.0;
  std::size_t observed = 0;  // |H_t| before the action
};

struct Episode {
  std::uint32_t image = 0;
  int label = -1;
  std::vector<EpisodeStep> steps;  // the last one is the termination
  double confidence = 0.0;         // c_T
  std::size_t predicted = 0;       // local index of argmax_{H_T} f_c
  std::size_t evaluated = 0;       // |H_T|
  std::size_t total = 0;           // |R|
  double total_reward = 0.0;
  double log_prob = 0.0;
};

struct RolloutConfig {
  int max_steps = 20;  // T_max
  double alpha = 0.05;
};

Episode rollout(const SearchImage& image, const PolicyParams& policy, const RolloutConfig& config,
                Rng& rng);

// Replays the recorded actions under `policy` and sums their log-probabilities.
double episode_log_prob(const Episode& episode, const PolicyParams& policy,
                        const SearchImage& image);

}  // namespace mirl

#endif  // MIRL_AGENT_HPP_
