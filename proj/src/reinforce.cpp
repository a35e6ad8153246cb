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

#include "mirl/reinforce.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <tuple>

#include "mirl/error.hpp"
#include "mirl/parallel.hpp"
#include "text_io.hpp"

namespace mirl {

namespace {

Eigen::Map<const Eigen::VectorXd> features_of(const Region& r) {
  return {r.features.data(), static_cast<Eigen::Index>(r.features.size())};
}

struct Layout {
  int n;
  int e() const { return 4; }
  int px() const { return 4 + n; }
  int py() const { return 4 + 2 * n; }
  int sx() const { return 4 + 3 * n; }
  int sy() const { return 5 + 3 * n; }
};

void check_images(std::span<const SearchImage> images, int n, const char* what) {
  if (images.empty()) throw invalid_argument(std::string(what) + ": empty image set");
  for (const SearchImage& im : images)
    for (const Region& r : im.regions)
      if (static_cast<int>(r.features.size()) != n)
        throw dimension_error(std::string(what) + ": region feature dimension " +
                              std::to_string(r.features.size()) + " differs from policy dimension " +
                              std::to_string(n));
}

PolicyParams random_policy(int n, const TrainConfig& config, Rng& rng) {
  PolicyParams p = PolicyParams::zeros(n);
  Eigen::VectorXd flat = p.flatten();
  std::normal_distribution<double> normal(0.0, config.init_scale);
  for (Eigen::Index i = 0; i < flat.size(); ++i) flat[i] = normal(rng);
  const Layout l{n};
  flat[l.sx()] = std::log(config.init_sigma);
  flat[l.sy()] = std::log(config.init_sigma);
  return PolicyParams::unflatten(flat, n);
}

}  // namespace

void TrainConfig::validate() const {
  if (rollouts < 1) throw invalid_argument("train config: rollouts must be >= 1");
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw invalid_argument("train config: lambda must be a finite value >= 0");
  if (rollout.max_steps < 0) throw invalid_argument("train config: max_steps must be >= 0");
  if (!(rollout.alpha >= 0.0) || !std::isfinite(rollout.alpha))
    throw invalid_argument("train config: alpha must be a finite value >= 0");
  if (!(step_size > 0.0) || !(step_decay >= 0.0))
    throw invalid_argument("train config: step_size must be > 0 and step_decay >= 0");
  if (!(clip_norm >= 0.0)) throw invalid_argument("train config: clip_norm must be >= 0");
  if (max_iterations < 0 || restarts < 1 || patience < 1 || val_repeats < 1)
    throw invalid_argument("train config: iteration counts out of range");
  if (!(tolerance >= 0.0)) throw invalid_argument("train config: tolerance must be >= 0");
  if (!(init_scale >= 0.0) || !(init_sigma > 0.0))
    throw invalid_argument("train config: init_scale must be >= 0 and init_sigma > 0");
  if (jobs < 1) throw invalid_argument("train config: jobs must be >= 1");
}

Eigen::VectorXd episode_score_gradient(const Episode& episode, const PolicyParams& policy,
                                       const SearchImage& image) {
  const int n = policy.feature_dim();
  check_images({&image, 1}, n, "score gradient");
  if (episode.total != image.size())
    throw dimension_error("score gradient: episode was not generated on this image");
  const Layout l{n};
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(policy.size());
  ConfidenceCache conf(image);
  AgentState state = initial_state(image);
  const double sx = std::exp(policy.log_sigma_x), sy = std::exp(policy.log_sigma_y);
  for (const EpisodeStep& step : episode.steps) {
    if (step.forced) break;
    const Eigen::Vector4d v = termination_features(state, image.size(), conf);
    const double p = termination_prob(policy.theta_d, v);
    if (step.action.terminate) {
      grad.head<4>() += (1.0 - p) * v;
      break;
    }
    grad.head<4>() -= p * v;
    const EvidenceDistribution dist = evidence_distribution(state, policy.theta_e, image.regions);
    Eigen::VectorXd mean_g = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k < dist.candidates.size(); ++k)
      mean_g += dist.probs[k] * features_of(image.regions[dist.candidates[k]]);
    const Region& ev = image.regions[step.action.evidence];
    const auto g = features_of(ev);
    grad.segment(l.e(), n) += g - mean_g;
    const Point mu = location_mean(ev, policy.theta_px, policy.theta_py);
    const Point h = ev.rect.half_extent();
    const double ux = (step.action.location.x - mu.x) / sx;
    const double uy = (step.action.location.y - mu.y) / sy;
    grad.segment(l.px(), n) += (ux / sx) * h.x * g;
    grad.segment(l.py(), n) += (uy / sy) * h.y * g;
    grad[l.sx()] += ux * ux - 1.0;
    grad[l.sy()] += uy * uy - 1.0;
    state = observe(state, step.action, image.regions);
  }
  return grad;
}

GradientEstimate estimate_gradient(std::span<const SearchImage> images, const PolicyParams& policy,
                                   const RolloutConfig& rollout_config, int rollouts,
                                   double lambda, std::uint64_t seed, int jobs) {
  if (rollouts < 1) throw invalid_argument("estimate_gradient: M must be >= 1");
  if (!(lambda >= 0.0)) throw invalid_argument("estimate_gradient: lambda must be >= 0");
  check_images(images, policy.feature_dim(), "estimate_gradient");
  const auto m = static_cast<std::size_t>(rollouts);
  std::vector<Eigen::VectorXd> grads(m);
  std::vector<double> rewards(m), fractions(m);
  parallel_for(m, jobs, [&](std::size_t i) {
    Rng rng = make_rng(seed, i);
    std::uniform_int_distribution<std::size_t> pick(0, images.size() - 1);
    const SearchImage& image = images[pick(rng)];
    const Episode ep = rollout(image, policy, rollout_config, rng);
    grads[i] = episode_score_gradient(ep, policy, image) * ep.total_reward;
    rewards[i] = ep.total_reward;
    fractions[i] = static_cast<double>(ep.evaluated) / static_cast<double>(ep.total);
  });
  GradientEstimate out;
  out.samples = rollouts;
  out.gradient = Eigen::VectorXd::Zero(policy.size());
  double sum = 0.0, frac = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    out.gradient += grads[i];
    sum += rewards[i];
    frac += fractions[i];
  }
  const double md = static_cast<double>(m);
  out.gradient /= md;
  out.gradient -= lambda * policy.flatten();
  out.mean_reward = sum / md;
  out.mean_evaluated_fraction = frac / md;
  double var = 0.0;
  for (double r : rewards) var += (r - out.mean_reward) * (r - out.mean_reward);
  out.reward_variance = var / md;
  return out;
}

RolloutStats evaluate_policy(std::span<const SearchImage> images, const PolicyParams& policy,
                             const RolloutConfig& rollout_config, int repeats, std::uint64_t seed,
                             int jobs) {
  if (repeats < 1) throw invalid_argument("evaluate_policy: repeats must be >= 1");
  check_images(images, policy.feature_dim(), "evaluate_policy");
  const auto reps = static_cast<std::size_t>(repeats);
  const std::size_t count = images.size() * reps;
  std::vector<double> rewards(count), fractions(count), correct(count);
  parallel_for(count, jobs, [&](std::size_t i) {
    Rng rng = make_rng(seed, i);
    const SearchImage& image = images[i / reps];
    const Episode ep = rollout(image, policy, rollout_config, rng);
    rewards[i] = ep.total_reward;
    fractions[i] = static_cast<double>(ep.evaluated) / static_cast<double>(ep.total);
    correct[i] = ((ep.confidence > 0.0 ? 1 : -1) == image.label) ? 1.0 : 0.0;
  });
  RolloutStats s;
  for (std::size_t i = 0; i < count; ++i) {
    s.mean_reward += rewards[i];
    s.evaluated_fraction += fractions[i];
    s.accuracy += correct[i];
  }
  const auto c = static_cast<double>(count);
  s.mean_reward /= c;
  s.evaluated_fraction /= c;
  s.accuracy /= c;
  return s;
}

PolicyTrainResult train_policy(std::span<const SearchImage> train, std::span<const SearchImage> val,
                               int feature_dim, const TrainConfig& config) {
  config.validate();
  if (feature_dim < 1) throw invalid_argument("train_policy: feature dimension must be positive");
  check_images(train, feature_dim, "train_policy (train)");
  check_images(val, feature_dim, "train_policy (val)");
  const std::uint64_t val_seed = derive_seed(config.seed, 0x76616cULL);
  auto validate_at = [&](const PolicyParams& p) {
    return evaluate_policy(val, p, config.rollout, config.val_repeats, val_seed, config.jobs);
  };

  PolicyTrainResult result;
  bool have_winner = false;
  for (int r = 0; r < config.restarts; ++r) {
    Rng init = make_rng(config.seed, 1000 + static_cast<std::uint64_t>(r));
    PolicyParams theta = random_policy(feature_dim, config, init);
    const std::uint64_t grad_seed = derive_seed(config.seed, 2000 + static_cast<std::uint64_t>(r));

    RolloutStats stats = validate_at(theta);
    PolicyParams best = theta;
    double best_val = stats.mean_reward;
    double mark = best_val;
    result.log.push_back({r, 0, 0.0, stats.mean_reward, stats.evaluated_fraction, 0.0, true});
    bool diverged = false;
    int stall = 0;
    for (int k = 1; k <= config.max_iterations && stall < config.patience; ++k) {
      const GradientEstimate est =
          estimate_gradient(train, theta, config.rollout, config.rollouts, config.lambda,
                            derive_seed(grad_seed, static_cast<std::uint64_t>(k)), config.jobs);
      Eigen::VectorXd g = est.gradient;
      const double norm = g.norm();
      if (config.clip_norm > 0.0 && norm > config.clip_norm) g *= config.clip_norm / norm;
      const double eta = config.step_size / (1.0 + config.step_decay * (k - 1));
      const Eigen::VectorXd next = theta.flatten() + eta * g;
      if (!next.allFinite()) {
        diverged = true;
        break;
      }
      theta = PolicyParams::unflatten(next, feature_dim);
      stats = validate_at(theta);
      const bool accepted = stats.mean_reward > best_val;
      if (accepted) {
        best_val = stats.mean_reward;
        best = theta;
      }
      if (stats.mean_reward > mark + config.tolerance) {
        mark = stats.mean_reward;
        stall = 0;
      } else {
        ++stall;
      }
      result.log.push_back(
          {r, k, est.mean_reward, stats.mean_reward, stats.evaluated_fraction, norm, accepted});
    }
    if (diverged) {
      result.restart_rewards.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    const PolicyParams& chosen = config.validation_selection ? best : theta;
    const double score = config.validation_selection ? best_val : stats.mean_reward;
    result.restart_rewards.push_back(score);
    if (!have_winner || score > result.val_reward) {
      have_winner = true;
      result.policy = chosen;
      result.val_reward = score;
      result.restart = r;
    }
  }
  if (!have_winner) throw runtime_error("train_policy: every restart diverged");
  return result;
}

std::string format_train_log(const std::vector<TrainLogEntry>& log) {
  std::string s = "restart iteration train_reward val_reward evaluated_fraction grad_norm accepted\n";
  for (const TrainLogEntry& e : log) {
    s += std::to_string(e.restart) + ' ' + std::to_string(e.iteration) + ' ';
    text::append_double(s, e.train_reward);
    s += ' ';
    text::append_double(s, e.val_reward);
    s += ' ';
    text::append_double(s, e.evaluated_fraction);
    s += ' ';
    text::append_double(s, e.grad_norm);
    s += e.accepted ? " 1\n" : " 0\n";
  }
  return s;
}

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

// Probability mass of one axis interval and its derivatives in mu and log sigma.
struct AxisMass {
  double q = 0.0, d_mu = 0.0, d_ls = 0.0;
};

AxisMass axis_mass(double lo, double hi, double mu, double log_sigma) {
  const double sigma = std::exp(log_sigma);
  auto edge = [&](double b, double& cdf, double& pdf, double& upd) {
    if (std::isinf(b)) {
      cdf = b > 0 ? 1.0 : 0.0;
      pdf = 0.0;
      upd = 0.0;
      return;
    }
    const double u = (b - mu) / sigma;
    cdf = normal_cdf(u);
    pdf = normal_pdf(u);
    upd = u * pdf;
  };
  double ca, pa, ua, cb, pb, ub;
  edge(lo, ca, pa, ua);
  edge(hi, cb, pb, ub);
  return {cb - ca, (pa - pb) / sigma, ua - ub};
}

// Intervals of the real line cut at every rect edge on one axis, with a
// representative coordinate strictly inside each.
struct Cells {
  std::vector<double> lo, hi, mid;
};

Cells axis_cells(std::vector<double> cuts) {
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  Cells c;
  const double inf = std::numeric_limits<double>::infinity();
  double prev = -inf;
  for (double b : cuts) {
    c.lo.push_back(prev);
    c.hi.push_back(b);
    c.mid.push_back(std::isinf(prev) ? b - 1.0 : 0.5 * (prev + b));
    prev = b;
  }
  c.lo.push_back(prev);
  c.hi.push_back(inf);
  c.mid.push_back(cuts.empty() ? 0.0 : prev + 1.0);
  return c;
}

struct Transition {
  std::uint64_t observed;
  double q;
  double d_mux, d_muy, d_lsx, d_lsy;
};

class Enumerator {
 public:
  Enumerator(const SearchImage& image, const PolicyParams& policy, const RolloutConfig& rollout)
      : image_(image), policy_(policy), rollout_(rollout), layout_{policy.feature_dim()} {
    ConfidenceCache cache(image);
    for (std::size_t i = 0; i < image.size(); ++i) conf_.push_back(cache(i));
    std::vector<double> xs, ys;
    for (const Region& r : image.regions) {
      xs.push_back(r.rect.x1());
      xs.push_back(r.rect.x2());
      ys.push_back(r.rect.y1());
      ys.push_back(r.rect.y2());
    }
    const Cells cx = axis_cells(xs), cy = axis_cells(ys);
    for (std::size_t e = 0; e < image.size(); ++e) {
      const Region& ev = image.regions[e];
      const Point mu = location_mean(ev, policy.theta_px, policy.theta_py);
      std::map<std::uint64_t, Transition> merged;
      for (std::size_t i = 0; i < cx.mid.size(); ++i) {
        const AxisMass mx = axis_mass(cx.lo[i], cx.hi[i], mu.x, policy.log_sigma_x);
        for (std::size_t j = 0; j < cy.mid.size(); ++j) {
          const AxisMass my = axis_mass(cy.lo[j], cy.hi[j], mu.y, policy.log_sigma_y);
          std::uint64_t mask = 0;
          const Point z{cx.mid[i], cy.mid[j]};
          for (std::size_t k = 0; k < image.size(); ++k)
            if (image.regions[k].rect.contains(z)) mask |= std::uint64_t{1} << k;
          Transition& t = merged.try_emplace(mask, Transition{mask, 0, 0, 0, 0, 0}).first->second;
          t.q += mx.q * my.q;
          t.d_mux += mx.d_mu * my.q;
          t.d_muy += mx.q * my.d_mu;
          t.d_lsx += mx.d_ls * my.q;
          t.d_lsy += mx.q * my.d_ls;
        }
      }
      std::vector<Transition> list;
      for (const auto& kv : merged) list.push_back(kv.second);
      transitions_.push_back(std::move(list));
    }
  }

  std::pair<double, Eigen::VectorXd> value(std::uint64_t h, std::uint64_t s, int t) {
    const auto key = std::make_tuple(h, s, t);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    const int n = layout_.n;
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(policy_.size());
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < image_.size(); ++i)
      if (h >> i & 1) best = std::max(best, conf_[i]);
    const double r_term = reward(true, best, image_.label, rollout_.alpha);
    const std::uint64_t open = h & ~s;
    if (t >= rollout_.max_steps || open == 0) return memo_[key] = {r_term, grad};

    const Eigen::Vector4d v(best, t, static_cast<double>(std::popcount(h)) / image_.size(), 1.0);
    const double p = termination_prob(policy_.theta_d, v);

    // Softmax over H \ S.
    std::vector<std::size_t> cand;
    std::vector<double> pi;
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < image_.size(); ++i)
      if (open >> i & 1) {
        cand.push_back(i);
        pi.push_back(policy_.theta_e.dot(features_of(image_.regions[i])));
        top = std::max(top, pi.back());
      }
    double z = 0.0;
    for (double& x : pi) z += (x = std::exp(x - top));
    Eigen::VectorXd mean_g = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k < cand.size(); ++k) {
      pi[k] /= z;
      mean_g += pi[k] * features_of(image_.regions[cand[k]]);
    }

    double cont = 0.0;
    Eigen::VectorXd d_cont = Eigen::VectorXd::Zero(policy_.size());
    for (std::size_t k = 0; k < cand.size(); ++k) {
      const std::size_t e = cand[k];
      const Region& ev = image_.regions[e];
      const auto g = features_of(ev);
      const Point half = ev.rect.half_extent();
      double y = 0.0;
      Eigen::VectorXd dy = Eigen::VectorXd::Zero(policy_.size());
      for (const Transition& tr : transitions_[e]) {
        if (tr.q == 0.0 && tr.d_mux == 0.0 && tr.d_muy == 0.0 && tr.d_lsx == 0.0 &&
            tr.d_lsy == 0.0)
          continue;
        auto [nv, ng] = value(h | tr.observed, s | (std::uint64_t{1} << e), t + 1);
        const double step = nv - rollout_.alpha;
        y += tr.q * step;
        dy += tr.q * ng;
        dy.segment(layout_.px(), n) += step * tr.d_mux * half.x * g;
        dy.segment(layout_.py(), n) += step * tr.d_muy * half.y * g;
        dy[layout_.sx()] += step * tr.d_lsx;
        dy[layout_.sy()] += step * tr.d_lsy;
      }
      cont += pi[k] * y;
      d_cont += pi[k] * dy;
      d_cont.segment(layout_.e(), n) += pi[k] * y * (g - mean_g);
    }
    const double val = p * r_term + (1.0 - p) * cont;
    grad = (1.0 - p) * d_cont;
    grad.head<4>() += p * (1.0 - p) * (r_term - cont) * v;
    return memo_[key] = {val, grad};
  }

  std::pair<double, Eigen::VectorXd> root() {
    const AgentState s0 = initial_state(image_);
    std::uint64_t h = 0;
    for (std::size_t i : s0.history) h |= std::uint64_t{1} << i;
    return value(h, 0, 0);
  }

 private:
  const SearchImage& image_;
  const PolicyParams& policy_;
  const RolloutConfig& rollout_;
  Layout layout_;
  std::vector<double> conf_;
  std::vector<std::vector<Transition>> transitions_;
  std::map<std::tuple<std::uint64_t, std::uint64_t, int>, std::pair<double, Eigen::VectorXd>> memo_;
};

}  // namespace

ExactObjective exact_objective(std::span<const SearchImage> images, const PolicyParams& policy,
                               const RolloutConfig& rollout_config, double lambda,
                               const EnumerationLimits& limits) {
  if (!(lambda >= 0.0)) throw invalid_argument("exact_objective: lambda must be >= 0");
  check_images(images, policy.feature_dim(), "exact_objective");
  if (rollout_config.max_steps < 0 || rollout_config.max_steps > limits.max_steps)
    throw invalid_argument("exact_objective: max_steps " +
                           std::to_string(rollout_config.max_steps) + " is not enumerable");
  for (const SearchImage& im : images)
    if (im.size() > limits.max_regions || im.size() > 63)
      throw invalid_argument("exact_objective: image with " + std::to_string(im.size()) +
                             " regions is not enumerable");
  ExactObjective out;
  out.gradient = Eigen::VectorXd::Zero(policy.size());
  for (const SearchImage& im : images) {
    Enumerator en(im, policy, rollout_config);
    auto [v, g] = en.root();
    out.value += v;
    out.gradient += g;
  }
  const auto count = static_cast<double>(images.size());
  out.value /= count;
  out.gradient /= count;
  const Eigen::VectorXd flat = policy.flatten();
  out.value -= 0.5 * lambda * flat.squaredNorm();
  out.gradient -= lambda * flat;
  return out;
}

double fd_check(std::span<const SearchImage> images, const PolicyParams& policy,
                const RolloutConfig& rollout_config, double lambda, double h,
                const EnumerationLimits& limits) {
  if (!(h > 0.0)) throw invalid_argument("fd_check: step must be > 0");
  const int n = policy.feature_dim();
  const Eigen::VectorXd analytic =
      exact_objective(images, policy, rollout_config, lambda, limits).gradient;
  const Eigen::VectorXd flat = policy.flatten();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < flat.size(); ++i) {
    Eigen::VectorXd up = flat, down = flat;
    up[i] += h;
    down[i] -= h;
    const double fu =
        exact_objective(images, PolicyParams::unflatten(up, n), rollout_config, lambda, limits).value;
    const double fdn = exact_objective(images, PolicyParams::unflatten(down, n), rollout_config,
                                       lambda, limits)
                           .value;
    const double fd = (fu - fdn) / (2.0 * h);
    const double denom = std::max({std::abs(analytic[i]), std::abs(fd), 1e-3});
    worst = std::max(worst, std::abs(analytic[i] - fd) / denom);
  }
  return worst;
}

}  // namespace mirl
