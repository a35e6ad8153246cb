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

#include <doctest.h>

#include <cmath>
#include <vector>

#include "mirl/agent.hpp"
#include "mirl/error.hpp"
#include "mirl/reinforce.hpp"
#include "support/oracles.hpp"

using namespace mirl;

namespace {

// Central differences of the replayed episode log-probability.
Eigen::VectorXd fd_score(const Episode& ep, const PolicyParams& p, const SearchImage& im, double h) {
  const Eigen::VectorXd flat = p.flatten();
  Eigen::VectorXd g(flat.size());
  for (Eigen::Index i = 0; i < flat.size(); ++i) {
    Eigen::VectorXd a = flat, b = flat;
    a[i] += h;
    b[i] -= h;
    g[i] = (episode_log_prob(ep, PolicyParams::unflatten(a, p.feature_dim()), im) -
            episode_log_prob(ep, PolicyParams::unflatten(b, p.feature_dim()), im)) /
           (2 * h);
  }
  return g;
}

double rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a[i] - b[i]) / std::max({std::abs(a[i]), std::abs(b[i]), 1e-3}));
  return worst;
}

}  // namespace

TEST_CASE("score of a lone termination at zero parameters") {
  const auto toy = oracle::toy_instance();
  const auto im = toy.views()[0];
  PolicyParams p = PolicyParams::zeros(3);
  p.log_sigma_x = p.log_sigma_y = std::log(0.2);
  RolloutConfig cfg;
  cfg.max_steps = 5;
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const Episode ep = rollout(im, p, cfg, rng);
    if (ep.steps.size() != 1) continue;
    const Eigen::VectorXd g = episode_score_gradient(ep, p, im);
    REQUIRE(g.size() == p.size());
    ConfidenceCache conf(im);
    const Eigen::Vector4d v = termination_features(initial_state(im), im.size(), conf);
    CHECK((g.head<4>() - 0.5 * v).norm() <= 1e-12);
    CHECK(g.tail(g.size() - 4).norm() == 0.0);
    return;
  }
  FAIL("no single-step episode drawn");
}

TEST_CASE("saturated termination leaves no gradient on the termination head") {
  const auto toy = oracle::toy_instance();
  const auto im = toy.views()[1];
  PolicyParams p = oracle::toy_policy(3, 0.5);
  p.theta_d = Eigen::Vector4d(0, 0, 0, 60.0);
  Rng rng(2);
  const Episode ep = rollout(im, p, RolloutConfig{}, rng);
  REQUIRE(ep.steps.size() == 1);
  CHECK(episode_score_gradient(ep, p, im).head<4>().norm() <= 1e-12);
}

TEST_CASE("episode score gradient matches finite differences") {
  const auto toy = oracle::toy_instance();
  const auto images = toy.views();
  RolloutConfig cfg;
  cfg.max_steps = 4;
  int checked = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    PolicyParams p = oracle::toy_policy(seed, 0.6);
    p.theta_d[3] -= 1.0;
    Rng rng(seed);
    const SearchImage& im = images[seed % 2];
    const Episode ep = rollout(im, p, cfg, rng);
    const Eigen::VectorXd g = episode_score_gradient(ep, p, im);
    CHECK(rel_err(g, fd_score(ep, p, im, 1e-5)) <= 1e-5);
    checked += ep.steps.size() > 1;
  }
  CHECK(checked >= 5);
}

TEST_CASE("exact objective gradient passes the finite-difference check") {
  const auto toy = oracle::toy_instance();
  const auto images = toy.views();
  RolloutConfig cfg;
  cfg.max_steps = 2;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const PolicyParams p = oracle::toy_policy(seed, 0.5);
    CHECK(fd_check(images, p, cfg, 0.0, 1e-4) <= 1e-4);
    CHECK(fd_check(images, p, cfg, 0.05, 1e-4) <= 1e-4);
  }
  const ExactObjective a = exact_objective(images, oracle::toy_policy(1, 0.5), cfg, 0.0);
  const ExactObjective b = exact_objective(images, oracle::toy_policy(1, 0.5), cfg, 0.1);
  const Eigen::VectorXd th = oracle::toy_policy(1, 0.5).flatten();
  CHECK(b.value == doctest::Approx(a.value - 0.05 * th.squaredNorm()).epsilon(1e-12));
  CHECK((b.gradient - (a.gradient - 0.1 * th)).norm() <= 1e-12);

  std::vector<Region> many(9, oracle::toy_region(0, Rect(0, 0, 1, 1), {1.0, 0.0, 0.0}));
  std::vector<double> c(9, 0.0);
  SearchImage big;
  big.label = 1;
  big.regions = many;
  big.confidence = c;
  const std::vector<SearchImage> too_big{big};
  CHECK_THROWS_AS(exact_objective(too_big, PolicyParams::zeros(3), cfg, 0.0), Error);
}

TEST_CASE("symmetric regions get equal evidence gradients at zero parameters") {
  std::vector<Region> regions{oracle::toy_region(0, Rect(0, 0, 1, 1), {0.5, 0.5}),
                              oracle::toy_region(1, Rect(0.05, 0.3, 0.35, 0.7), {1.0, 0.0}),
                              oracle::toy_region(2, Rect(0.65, 0.3, 0.95, 0.7), {0.0, 1.0})};
  std::vector<double> c{-0.4, 0.6, 0.6};
  SearchImage im;
  im.label = 1;
  im.regions = regions;
  im.confidence = c;
  const std::vector<SearchImage> images{im};
  RolloutConfig cfg;
  cfg.max_steps = 2;
  const ExactObjective ex = exact_objective(images, PolicyParams::zeros(2), cfg, 0.0);
  CHECK(ex.gradient[4] == doctest::Approx(ex.gradient[5]).epsilon(1e-10));
  CHECK(ex.gradient[6] == doctest::Approx(-ex.gradient[7]).epsilon(1e-10));
}

TEST_CASE("estimates are reproducible and independent of jobs") {
  const auto toy = oracle::toy_instance();
  const auto images = toy.views();
  const PolicyParams p = oracle::toy_policy(4, 0.5);
  const GradientEstimate a = estimate_gradient(images, p, RolloutConfig{}, 64, 0.01, 99, 1);
  const GradientEstimate b = estimate_gradient(images, p, RolloutConfig{}, 64, 0.01, 99, 1);
  const GradientEstimate c = estimate_gradient(images, p, RolloutConfig{}, 64, 0.01, 99, 4);
  CHECK(a.gradient == b.gradient);
  CHECK(a.gradient == c.gradient);
  CHECK(a.mean_reward == c.mean_reward);
  CHECK(a.samples == 64);
  CHECK(a.gradient.size() == p.size());
  CHECK(a.mean_evaluated_fraction > 0.0);
  CHECK(a.mean_evaluated_fraction <= 1.0);
  const GradientEstimate d = estimate_gradient(images, p, RolloutConfig{}, 64, 0.01, 100, 1);
  CHECK(a.gradient != d.gradient);
}

TEST_CASE("a huge regularizer dominates the estimate") {
  const auto toy = oracle::toy_instance();
  const auto images = toy.views();
  const PolicyParams p = oracle::toy_policy(5, 0.5);
  const Eigen::VectorXd th = p.flatten();
  const GradientEstimate e = estimate_gradient(images, p, RolloutConfig{}, 1, 1e6, 7);
  CHECK(e.gradient.dot(th) / (e.gradient.norm() * th.norm()) < -0.99);
}

TEST_CASE("the estimator is centred on the exact gradient") {
  const auto toy = oracle::toy_instance();
  const auto images = toy.views();
  const PolicyParams p = oracle::toy_policy(1, 0.5);
  RolloutConfig cfg;
  cfg.max_steps = 2;
  const ExactObjective ex = exact_objective(images, p, cfg, 0.01);
  const int runs = 20000;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(p.size()), sq = sum;
  for (int i = 0; i < runs; ++i) {
    const Eigen::VectorXd g = estimate_gradient(images, p, cfg, 1, 0.01, 5000 + static_cast<std::uint64_t>(i)).gradient;
    sum += g;
    sq += g.cwiseProduct(g);
  }
  const Eigen::VectorXd mean = sum / runs;
  for (Eigen::Index k = 0; k < mean.size(); ++k) {
    const double se = std::sqrt(std::max(sq[k] / runs - mean[k] * mean[k], 0.0) / runs);
    CHECK(std::abs(mean[k] - ex.gradient[k]) <= 4 * se + 1e-12);
  }
}

TEST_CASE("training is deterministic for a fixed seed") {
  const auto toy = oracle::toy_instance();
  const auto images = toy.views();
  TrainConfig cfg;
  cfg.rollouts = 16;
  cfg.max_iterations = 4;
  cfg.restarts = 2;
  cfg.val_repeats = 2;
  cfg.seed = 3;
  const PolicyTrainResult a = train_policy(images, images, 3, cfg);
  cfg.jobs = 3;
  const PolicyTrainResult b = train_policy(images, images, 3, cfg);
  CHECK(a.policy.flatten() == b.policy.flatten());
  CHECK(a.val_reward == b.val_reward);
  CHECK(a.restart == b.restart);
  CHECK(format_train_log(a.log) == format_train_log(b.log));
  CHECK(a.restart_rewards.size() == 2);
  TrainConfig bad = cfg;
  bad.rollouts = 0;
  CHECK_THROWS_AS(train_policy(images, images, 3, bad), Error);
}

TEST_CASE("accepted iterations never trade reward for a larger evaluated fraction") {
  const auto toy = oracle::toy_instance();
  const auto images = toy.views();
  TrainConfig cfg;
  cfg.rollouts = 32;
  cfg.max_iterations = 15;
  cfg.restarts = 2;
  cfg.seed = 5;
  const PolicyTrainResult r = train_policy(images, images, 3, cfg);
  for (int restart = 0; restart < cfg.restarts; ++restart) {
    const TrainLogEntry* last = nullptr;
    for (const TrainLogEntry& e : r.log) {
      if (e.restart != restart || !e.accepted) continue;
      if (last) {
        CHECK(e.val_reward > last->val_reward);
      }
      last = &e;
    }
  }
}

TEST_CASE("an expensive saccade teaches the policy to stop at once") {
  const auto toy = oracle::toy_instance();
  const auto images = toy.views();
  TrainConfig cfg;
  cfg.rollout.alpha = 2.5;
  cfg.rollouts = 64;
  cfg.max_iterations = 200;
  cfg.patience = 200;
  cfg.step_size = 1.0;
  cfg.validation_selection = false;
  cfg.restarts = 1;
  cfg.seed = 1;
  const PolicyTrainResult r = train_policy(images, images, 3, cfg);
  for (const SearchImage& im : images) {
    ConfidenceCache conf(im);
    const double p = termination_prob(r.policy.theta_d, termination_features(initial_state(im), im.size(), conf));
    CHECK(p > 0.99);
  }
}

TEST_CASE("a perfect confidence function gives a perfect trained classifier") {
  // Every positive target covers the canvas center, so it is observed from
  // the start; all other regions score negative.
  oracle::ToyImages toy;
  for (int i = 0; i < 6; ++i) {
    const bool pos = i % 2 == 0;
    const double off = 0.05 * i;
    toy.regions.push_back({oracle::toy_region(0, Rect(0, 0, 1, 1), {1.0, 0.0, 0.0}),
                           oracle::toy_region(1, Rect(0.3 + off / 2, 0.35, 0.75, 0.8), {0.0, 1.0, 0.0}),
                           oracle::toy_region(2, Rect(0.05, 0.05, 0.4, 0.4 - off / 2), {0.0, 0.0, 1.0}),
                           oracle::toy_region(3, Rect(0.6, 0.05, 0.95, 0.3), {0.5, 0.0, 0.5})});
    toy.confidence.push_back({-0.5, pos ? 1.0 : -0.8, -0.9, -0.3});
    toy.labels.push_back(pos ? 1 : -1);
  }
  const auto images = toy.views();
  TrainConfig cfg;
  cfg.rollout.alpha = 0.0;
  cfg.rollouts = 64;
  cfg.max_iterations = 100;
  cfg.restarts = 2;
  cfg.seed = 2;
  const PolicyTrainResult r = train_policy(images, images, 3, cfg);
  const RolloutStats s = evaluate_policy(images, r.policy, cfg.rollout, 50, 17);
  CHECK(s.accuracy == 1.0);
  CHECK(s.evaluated_fraction > 0.0);
}
