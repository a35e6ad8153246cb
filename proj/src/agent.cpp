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

#include "mirl/agent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "mirl/error.hpp"
#include "text_io.hpp"

namespace mirl {

namespace {

Eigen::Map<const Eigen::VectorXd> features_of(const Region& r) {
  return {r.features.data(), static_cast<Eigen::Index>(r.features.size())};
}

void check_dim(const Region& r, const Eigen::VectorXd& theta, const char* what) {
  if (static_cast<Eigen::Index>(r.features.size()) != theta.size())
    throw dimension_error(std::string(what) + ": region has " + std::to_string(r.features.size()) +
                          " features, policy expects " + std::to_string(theta.size()));
}

void insert_sorted(std::vector<std::size_t>& v, std::size_t x) {
  auto it = std::lower_bound(v.begin(), v.end(), x);
  if (it == v.end() || *it != x) v.insert(it, x);
}

double log_normal_pdf(double z, double mu, double log_sigma) {
  const double u = (z - mu) * std::exp(-log_sigma);
  return -0.5 * u * u - log_sigma - 0.5 * std::log(2.0 * std::numbers::pi);
}

}  // namespace

PolicyParams PolicyParams::zeros(int feature_dim) {
  if (feature_dim < 1) throw invalid_argument("policy: feature dimension must be positive");
  PolicyParams p;
  p.theta_e = Eigen::VectorXd::Zero(feature_dim);
  p.theta_px = Eigen::VectorXd::Zero(feature_dim);
  p.theta_py = Eigen::VectorXd::Zero(feature_dim);
  return p;
}

Eigen::VectorXd PolicyParams::flatten() const {
  const int n = feature_dim();
  Eigen::VectorXd flat(size());
  flat.head<4>() = theta_d;
  flat.segment(4, n) = theta_e;
  flat.segment(4 + n, n) = theta_px;
  flat.segment(4 + 2 * n, n) = theta_py;
  flat[4 + 3 * n] = log_sigma_x;
  flat[5 + 3 * n] = log_sigma_y;
  return flat;
}

PolicyParams PolicyParams::unflatten(const Eigen::VectorXd& flat, int feature_dim) {
  PolicyParams p = zeros(feature_dim);
  if (flat.size() != p.size())
    throw dimension_error("policy: flat vector of size " + std::to_string(flat.size()) +
                          " does not match dimension " + std::to_string(p.size()));
  const int n = feature_dim;
  p.theta_d = flat.head<4>();
  p.theta_e = flat.segment(4, n);
  p.theta_px = flat.segment(4 + n, n);
  p.theta_py = flat.segment(4 + 2 * n, n);
  p.log_sigma_x = flat[4 + 3 * n];
  p.log_sigma_y = flat[5 + 3 * n];
  return p;
}

std::string serialize_policy(const PolicyParams& policy) {
  std::string s = "mirl-policy v1\nn " + std::to_string(policy.feature_dim()) + '\n';
  auto row = [&](const char* name, const Eigen::VectorXd& v) {
    s += name;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      s += ' ';
      text::append_double(s, v[i]);
    }
    s += '\n';
  };
  row("theta_d", policy.theta_d);
  row("theta_e", policy.theta_e);
  row("theta_px", policy.theta_px);
  row("theta_py", policy.theta_py);
  s += "log_sigma ";
  text::append_double(s, policy.log_sigma_x);
  s += ' ';
  text::append_double(s, policy.log_sigma_y);
  s += '\n';
  return s;
}

PolicyParams parse_policy(std::string_view text_in) {
  const auto lines = text::split_lines(text_in);
  if (lines.size() < 7) throw format_error("policy: truncated file");
  {
    text::TokenReader rd(lines[0], "policy header");
    rd.expect("mirl-policy");
    if (rd.next() != "v1") throw format_error("policy: unsupported schema version");
  }
  text::TokenReader n_rd(lines[1], "policy dimension");
  n_rd.expect("n");
  const auto n = static_cast<int>(n_rd.next_uint());
  PolicyParams p = PolicyParams::zeros(n);
  auto row = [&](std::size_t line, const char* name, auto& v) {
    text::TokenReader rd(lines[line], name);
    rd.expect(name);
    if (rd.remaining_tokens() != static_cast<std::size_t>(v.size()))
      throw dimension_error(std::string("policy: ") + name + " length does not match n");
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rd.next_double();
  };
  row(2, "theta_d", p.theta_d);
  row(3, "theta_e", p.theta_e);
  row(4, "theta_px", p.theta_px);
  row(5, "theta_py", p.theta_py);
  text::TokenReader s_rd(lines[6], "policy sigma");
  s_rd.expect("log_sigma");
  p.log_sigma_x = s_rd.next_double();
  p.log_sigma_y = s_rd.next_double();
  if (!p.flatten().allFinite()) throw format_error("policy: non-finite parameters");
  return p;
}

bool AgentState::observed(std::size_t i) const {
  return std::binary_search(history.begin(), history.end(), i);
}

bool AgentState::is_used(std::size_t i) const {
  return std::binary_search(used.begin(), used.end(), i);
}

std::vector<std::size_t> AgentState::candidates() const {
  std::vector<std::size_t> out;
  std::set_difference(history.begin(), history.end(), used.begin(), used.end(),
                      std::back_inserter(out));
  return out;
}

ConfidenceCache::ConfidenceCache(const SearchImage& image)
    : image_(image), values_(image.size(), 0.0), known_(image.size(), false) {
  if (!image.confidence.empty() && image.confidence.size() != image.size())
    throw dimension_error("search image: confidence count differs from region count");
  if (image.confidence.empty() && image.model == nullptr)
    throw invalid_argument("search image: no confidences and no model");
}

double ConfidenceCache::operator()(std::size_t i) {
  if (!known_[i]) {
    values_[i] = image_.confidence.empty() ? image_.model->decision(image_.regions[i].features)
                                           : image_.confidence[i];
    known_[i] = true;
    ++evaluated_;
  }
  return values_[i];
}

AgentState initial_state(const SearchImage& image) {
  AgentState s;
  const Point center{0.5, 0.5};
  for (std::size_t i = 0; i < image.size(); ++i)
    if (image.regions[i].rect.contains(center)) s.history.push_back(i);
  if (s.history.empty())
    throw invalid_argument("search image " + std::to_string(image.image) +
                           " has no region containing the canvas center");
  return s;
}

std::pair<std::size_t, double> best_observed(const AgentState& state, ConfidenceCache& conf) {
  if (state.history.empty()) throw invalid_argument("agent: empty observation history");
  std::size_t best = state.history.front();
  double value = conf(best);
  for (std::size_t i : state.history) {
    const double c = conf(i);
    if (c > value) {
      value = c;
      best = i;
    }
  }
  return {best, value};
}

Eigen::Vector4d termination_features(const AgentState& state, std::size_t total_regions,
                                     ConfidenceCache& conf) {
  const double c = best_observed(state, conf).second;
  return {c, static_cast<double>(state.t),
          static_cast<double>(state.history.size()) / static_cast<double>(total_regions), 1.0};
}

double log_sigmoid(double z) {
  return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

double termination_prob(const Eigen::Vector4d& theta_d, const Eigen::Vector4d& v) {
  const double p = std::exp(log_sigmoid(theta_d.dot(v)));
  return std::clamp(p, std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
}

EvidenceDistribution evidence_distribution(const AgentState& state, const Eigen::VectorXd& theta_e,
                                           std::span<const Region> regions) {
  EvidenceDistribution out;
  out.candidates = state.candidates();
  if (out.candidates.empty()) throw invalid_argument("agent: no unused evidence region");
  out.probs.resize(out.candidates.size());
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < out.candidates.size(); ++k) {
    const Region& r = regions[out.candidates[k]];
    check_dim(r, theta_e, "evidence");
    out.probs[k] = theta_e.dot(features_of(r));
    top = std::max(top, out.probs[k]);
  }
  double sum = 0.0;
  for (double& p : out.probs) {
    p = std::exp(p - top);
    sum += p;
  }
  for (double& p : out.probs) p /= sum;
  return out;
}

Point location_mean(const Region& evidence, const Eigen::VectorXd& theta_px,
                    const Eigen::VectorXd& theta_py) {
  check_dim(evidence, theta_px, "location");
  check_dim(evidence, theta_py, "location");
  const auto g = features_of(evidence);
  const Point c = evidence.rect.center();
  const Point h = evidence.rect.half_extent();
  return {c.x + theta_px.dot(g) * h.x, c.y + theta_py.dot(g) * h.y};
}

StepSample sample_step(const AgentState& state, const PolicyParams& policy,
                       const SearchImage& image, ConfidenceCache& conf, Rng& rng) {
  StepSample out;
  const auto cands = state.candidates();
  if (cands.empty()) {
    out.action.terminate = true;
    return out;
  }
  const Eigen::Vector4d v = termination_features(state, image.size(), conf);
  const double z = policy.theta_d.dot(v);
  if (uniform01(rng) < termination_prob(policy.theta_d, v)) {
    out.action.terminate = true;
    out.log_prob = log_sigmoid(z);
    return out;
  }
  out.log_prob = log_sigmoid(-z);
  const EvidenceDistribution dist = evidence_distribution(state, policy.theta_e, image.regions);
  const double u = uniform01(rng);
  double acc = 0.0;
  std::size_t pick = dist.candidates.size() - 1;
  for (std::size_t k = 0; k < dist.candidates.size(); ++k) {
    acc += dist.probs[k];
    if (u < acc) {
      pick = k;
      break;
    }
  }
  out.action.evidence = dist.candidates[pick];
  out.log_prob += std::log(dist.probs[pick]);
  const Point mu = location_mean(image.regions[out.action.evidence], policy.theta_px, policy.theta_py);
  std::normal_distribution<double> normal(0.0, 1.0);
  out.action.location = {mu.x + std::exp(policy.log_sigma_x) * normal(rng),
                         mu.y + std::exp(policy.log_sigma_y) * normal(rng)};
  out.log_prob += log_normal_pdf(out.action.location.x, mu.x, policy.log_sigma_x) +
                  log_normal_pdf(out.action.location.y, mu.y, policy.log_sigma_y);
  return out;
}

double action_log_prob(const AgentState& state, const Action& action, bool forced,
                       const PolicyParams& policy, const SearchImage& image,
                       ConfidenceCache& conf) {
  if (forced) return 0.0;
  const Eigen::Vector4d v = termination_features(state, image.size(), conf);
  const double z = policy.theta_d.dot(v);
  if (action.terminate) return log_sigmoid(z);
  const EvidenceDistribution dist = evidence_distribution(state, policy.theta_e, image.regions);
  const auto it = std::find(dist.candidates.begin(), dist.candidates.end(), action.evidence);
  if (it == dist.candidates.end()) throw invalid_argument("agent: evidence outside H \\ S");
  const double pe = dist.probs[static_cast<std::size_t>(it - dist.candidates.begin())];
  const Point mu = location_mean(image.regions[action.evidence], policy.theta_px, policy.theta_py);
  return log_sigmoid(-z) + std::log(pe) +
         log_normal_pdf(action.location.x, mu.x, policy.log_sigma_x) +
         log_normal_pdf(action.location.y, mu.y, policy.log_sigma_y);
}

AgentState observe(const AgentState& state, const Action& saccade, std::span<const Region> regions) {
  if (saccade.terminate) throw invalid_argument("observe: action is a termination");
  AgentState next = state;
  for (std::size_t i = 0; i < regions.size(); ++i)
    if (regions[i].rect.contains(saccade.location)) insert_sorted(next.history, i);
  insert_sorted(next.used, saccade.evidence);
  ++next.t;
  return next;
}

double reward(bool terminate, double confidence, int label, double alpha) {
  if (!terminate) return -alpha;
  return label > 0 ? std::min(confidence, 1.0) : std::max(confidence, -1.0);
}

Episode rollout(const SearchImage& image, const PolicyParams& policy, const RolloutConfig& config,
                Rng& rng) {
  if (config.max_steps < 0) throw invalid_argument("rollout: max_steps must be >= 0");
  if (!(config.alpha >= 0.0)) throw invalid_argument("rollout: alpha must be >= 0");
  if (image.label != 1 && image.label != -1) throw invalid_argument("rollout: label must be +-1");
  ConfidenceCache conf(image);
  AgentState state = initial_state(image);
  Episode ep;
  ep.image = image.image;
  ep.label = image.label;
  ep.total = image.size();
  for (;;) {
    EpisodeStep step;
    step.observed = state.history.size();
    StepSample sample;
    if (state.t >= config.max_steps) {
      sample.action.terminate = true;
    } else {
      sample = sample_step(state, policy, image, conf, rng);
    }
    step.action = sample.action;
    step.log_prob = sample.log_prob;
    step.forced = sample.action.terminate && (state.t >= config.max_steps || state.candidates().empty());
    if (step.action.terminate) {
      const auto [best, c] = best_observed(state, conf);
      step.reward = reward(true, c, image.label, config.alpha);
      ep.confidence = c;
      ep.predicted = best;
      ep.evaluated = state.history.size();
      ep.steps.push_back(step);
      break;
    }
    step.reward = reward(false, 0.0, image.label, config.alpha);
    ep.steps.push_back(step);
    state = observe(state, step.action, image.regions);
  }
  for (const EpisodeStep& s : ep.steps) {
    ep.total_reward += s.reward;
    ep.log_prob += s.log_prob;
  }
  return ep;
}

double episode_log_prob(const Episode& episode, const PolicyParams& policy,
                        const SearchImage& image) {
  ConfidenceCache conf(image);
  AgentState state = initial_state(image);
  double total = 0.0;
  for (const EpisodeStep& step : episode.steps) {
    total += action_log_prob(state, step.action, step.forced, policy, image, conf);
    if (!step.action.terminate) state = observe(state, step.action, image.regions);
  }
  return total;
}

}  // namespace mirl
