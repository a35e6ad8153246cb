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

#include "mirl/miltrain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "mirl/error.hpp"
#include "mirl/parallel.hpp"
#include "mirl/rng.hpp"
#include "text_io.hpp"

namespace mirl {

int LabelAssignment::label(RegionId region) const {
  const auto it = std::lower_bound(regions.begin(), regions.end(), region);
  if (it == regions.end() || *it != region)
    throw invalid_argument("assignment: region " + std::to_string(to_index(region)) +
                           " is not labelled");
  return labels[static_cast<std::size_t>(it - regions.begin())];
}

bool LabelAssignment::contains(RegionId region) const {
  return std::binary_search(regions.begin(), regions.end(), region);
}

void CmiConfig::validate() const {
  if (!(subregion_threshold > 0.0) || !(fringe_threshold > 0.0))
    throw invalid_argument("cmi: thresholds must be positive");
  if (restarts < 1) throw invalid_argument("cmi: restarts must be >= 1");
  if (!(ratio_min > 0.0) || !(ratio_max >= ratio_min) || !std::isfinite(ratio_max))
    throw invalid_argument("cmi: invalid positive-ratio range");
  if (max_iterations < 1) throw invalid_argument("cmi: max_iterations must be >= 1");
  if (jobs < 1) throw invalid_argument("cmi: jobs must be >= 1");
  svm.validate();
}

namespace {

using Index = std::size_t;

// Instances are all regions of every image that owns a bag, so that the
// subregion and fringe sets of a positive can reach regions outside its bag.
struct Problem {
  std::vector<RegionId> ids;
  FeatureMatrix features;
  std::vector<bool> locked;                 // member of a negative bag
  std::vector<bool> in_positive_bag;
  std::vector<std::vector<Index>> positive_bags;
  std::vector<std::vector<Index>> bags_of;  // positive bags containing each instance
  std::vector<std::vector<Index>> fringe;   // F(r)
  std::vector<std::vector<Index>> sub_only; // S(r) \ F(r)
};

Problem build_problem(const BagSet& bags, const Dataset& dataset, const CmiConfig& config) {
  std::vector<std::size_t> images;
  std::size_t n_neg = 0;
  for (const Bag& bag : bags.bags) {
    if (bag.image >= dataset.images.size())
      throw invalid_argument("cmi: bag " + std::to_string(bag.id) + " references unknown image");
    if (bag.regions.empty()) throw invalid_argument("cmi: empty bag " + std::to_string(bag.id));
    if (bag.label != 1 && bag.label != -1) throw invalid_argument("cmi: bag label must be +-1");
    images.push_back(bag.image);
    if (bag.label < 0) ++n_neg;
  }
  if (n_neg == bags.bags.size()) throw invalid_argument("cmi: no positive bags");
  if (n_neg == 0) throw invalid_argument("cmi: no negative bags");
  std::sort(images.begin(), images.end());
  images.erase(std::unique(images.begin(), images.end()), images.end());

  Problem p;
  std::vector<std::ptrdiff_t> slot(dataset.regions.size(), -1);
  for (std::size_t img : images) {
    const SyntheticImage& image = dataset.images[img];
    for (std::size_t r = 0; r < image.region_count; ++r) {
      slot[image.first_region + r] = static_cast<std::ptrdiff_t>(p.ids.size());
      p.ids.push_back(region_id(image.first_region + r));
    }
  }
  const Index n = p.ids.size();
  const auto dim = static_cast<Eigen::Index>(dataset.feature_dim);
  p.features.resize(static_cast<Eigen::Index>(n), dim);
  for (Index u = 0; u < n; ++u) {
    const Region& region = dataset.regions[to_index(p.ids[u])];
    if (static_cast<Eigen::Index>(region.features.size()) != dim)
      throw dimension_error("cmi: region feature length differs from dataset dimension");
    for (Eigen::Index k = 0; k < dim; ++k)
      p.features(static_cast<Eigen::Index>(u), k) = region.features[static_cast<std::size_t>(k)];
  }

  p.locked.assign(n, false);
  p.in_positive_bag.assign(n, false);
  p.bags_of.assign(n, {});
  for (const Bag& bag : bags.bags) {
    const SyntheticImage& image = dataset.images[bag.image];
    std::vector<Index> members;
    for (RegionId id : bag.regions) {
      const std::size_t g = to_index(id);
      if (g < image.first_region || g >= image.first_region + image.region_count)
        throw invalid_argument("cmi: bag " + std::to_string(bag.id) +
                               " holds a region of another image");
      members.push_back(static_cast<Index>(slot[g]));
    }
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
    if (bag.label < 0) {
      for (Index u : members) p.locked[u] = true;
    } else {
      for (Index u : members) {
        p.in_positive_bag[u] = true;
        p.bags_of[u].push_back(p.positive_bags.size());
      }
      p.positive_bags.push_back(std::move(members));
    }
  }

  p.fringe.assign(n, {});
  p.sub_only.assign(n, {});
  if (config.constraints) {
    for (std::size_t img : images) {
      const SyntheticImage& image = dataset.images[img];
      const std::vector<Rect> pool = dataset.rects_of(image);
      const auto base = static_cast<Index>(slot[image.first_region]);
      for (std::size_t r = 0; r < pool.size(); ++r) {
        auto f = fringe_set(r, pool, config.fringe_threshold);
        auto s = subregion_set(r, pool, config.subregion_threshold);
        std::vector<std::size_t> s_minus_f;
        std::set_difference(s.begin(), s.end(), f.begin(), f.end(), std::back_inserter(s_minus_f));
        for (std::size_t k : f) p.fringe[base + r].push_back(base + k);
        for (std::size_t k : s_minus_f) p.sub_only[base + r].push_back(base + k);
      }
    }
  }
  return p;
}

LinearModel fit(const Problem& p, const std::vector<int>& y, const SvmConfig& config,
                FeatureMatrix& x, std::vector<int>& labels) {
  std::size_t m = 0;
  for (int v : y) m += v != 0;
  x.resize(static_cast<Eigen::Index>(m), p.features.cols());
  labels.resize(m);
  std::size_t row = 0;
  for (Index u = 0; u < y.size(); ++u) {
    if (y[u] == 0) continue;
    x.row(static_cast<Eigen::Index>(row)) = p.features.row(static_cast<Eigen::Index>(u));
    labels[row++] = y[u];
  }
  return train(x, labels, config);
}

// The positive/negative ratio rho applies to the whole assignment, negative-bag
// instances included: a uniformly random subset of the open positive-bag
// instances is labelled +1 so that #pos / #neg = rho (capped at all of them).
std::vector<int> initial_labels(const Problem& p, const CmiConfig& config, Rng& rng) {
  std::vector<int> y(p.ids.size(), 0);
  std::vector<Index> open;
  std::size_t fixed_negative = 0;
  for (Index u = 0; u < y.size(); ++u) {
    if (p.locked[u]) {
      y[u] = -1;
      ++fixed_negative;
    } else if (p.in_positive_bag[u]) {
      open.push_back(u);
    }
  }
  const double rho = std::uniform_real_distribution<double>(config.ratio_min, config.ratio_max)(rng);
  const double total = static_cast<double>(fixed_negative + open.size());
  const auto target = std::min<std::size_t>(
      open.size(), static_cast<std::size_t>(std::llround(rho * total / (1.0 + rho))));
  std::shuffle(open.begin(), open.end(), rng);
  for (std::size_t i = 0; i < open.size(); ++i) y[open[i]] = i < target ? 1 : -1;

  for (const auto& bag : p.positive_bags) {
    std::vector<Index> members;
    bool has_positive = false;
    for (Index u : bag) {
      if (p.locked[u]) continue;
      members.push_back(u);
      has_positive = has_positive || y[u] == 1;
    }
    if (has_positive) continue;
    if (members.empty()) throw invalid_argument("cmi: positive bag lies inside negative bags");
    y[members[std::uniform_int_distribution<std::size_t>(0, members.size() - 1)(rng)]] = 1;
  }
  return y;
}

// One relabeling pass. Negative-bag members
// are fixed at -1 first. For each positive bag, candidates are visited in
// decreasing score order (lowest id on ties); a candidate is promoted only
// if that is consistent with the constraints already imposed by surviving
// positives. Positives lying in S(k) \ F(k) of a promoted k are demoted, as
// the subregion rule overwrites them.
class Relabeler {
 public:
  Relabeler(const Problem& p, bool constraints) : p_(p), constraints_(constraints) {}

  std::vector<int> run(const Eigen::VectorXd& score) {
    const Index n = p_.ids.size();
    y_.assign(n, 0);
    req_zero_.assign(n, 0);
    req_neg_.assign(n, 0);
    bag_pos_.assign(p_.positive_bags.size(), 0);
    for (Index u = 0; u < n; ++u)
      if (p_.locked[u]) y_[u] = -1;

    std::vector<Index> order;
    std::vector<bool> removed(n, false);
    for (Index b = 0; b < p_.positive_bags.size(); ++b) {
      const auto& bag = p_.positive_bags[b];
      order.clear();
      for (Index u : bag)
        if (!p_.locked[u] && y_[u] != 1) order.push_back(u);
      std::sort(order.begin(), order.end(), [&](Index a, Index c) {
        const double sa = score[static_cast<Eigen::Index>(a)];
        const double sc = score[static_cast<Eigen::Index>(c)];
        return sa != sc ? sa > sc : a < c;
      });
      for (Index u : order) removed[u] = false;
      bool selected = false;
      for (Index k : order) {
        if (removed[k]) continue;
        removed[k] = true;
        if (!constraints_) {
          if (score[static_cast<Eigen::Index>(k)] > 0.0) {
            promote(k, {});
            selected = true;
          } else {
            y_[k] = -1;
          }
          continue;
        }
        std::vector<Index> demoted;
        if (score[static_cast<Eigen::Index>(k)] > 0.0 && consistent(k, demoted)) {
          promote(k, demoted);
          selected = true;
          for (Index u : p_.fringe[k]) removed[u] = true;
          for (Index u : p_.sub_only[k]) removed[u] = true;
        } else if (req_neg_[k] == 0) {
          y_[k] = 0;
        }
      }
      if (selected || bag_pos_[b] > 0) continue;
      // Fallback: best-scoring member that can be made positive.
      std::vector<Index> members;
      for (Index u : bag)
        if (!p_.locked[u]) members.push_back(u);
      std::sort(members.begin(), members.end(), [&](Index a, Index c) {
        const double sa = score[static_cast<Eigen::Index>(a)];
        const double sc = score[static_cast<Eigen::Index>(c)];
        return sa != sc ? sa > sc : a < c;
      });
      bool done = false;
      for (Index k : members) {
        std::vector<Index> demoted;
        if (!constraints_ || consistent(k, demoted)) {
          promote(k, demoted);
          done = true;
          break;
        }
      }
      if (!done) throw runtime_error("cmi: no member of a positive bag can be labelled positive");
    }
    return y_;
  }

 private:
  static bool has(const std::vector<Index>& v, Index u) {
    return std::binary_search(v.begin(), v.end(), u);
  }

  bool consistent(Index k, std::vector<Index>& demoted) const {
    demoted.clear();
    for (Index q : p_.sub_only[k])
      if (y_[q] == 1) demoted.push_back(q);
    auto zero_need = [&](Index u) {
      int c = req_zero_[u];
      for (Index q : demoted) c -= has(p_.fringe[q], u);
      return c;
    };
    auto neg_need = [&](Index u) {
      int c = req_neg_[u];
      for (Index q : demoted) c -= has(p_.sub_only[q], u);
      return c;
    };
    if (zero_need(k) > 0 || neg_need(k) > 0) return false;
    for (Index u : p_.fringe[k])
      if (y_[u] == 1 || p_.locked[u] || neg_need(u) > 0) return false;
    for (Index u : p_.sub_only[k])
      if (zero_need(u) > 0) return false;
    // Demotion must not strip a positive bag of its last positive.
    for (Index q : demoted) {
      for (Index b : p_.bags_of[q]) {
        int left = bag_pos_[b] + (has(p_.positive_bags[b], k) ? 1 : 0);
        for (Index r : demoted) left -= has(p_.positive_bags[b], r);
        if (left < 1) return false;
      }
    }
    return true;
  }

  void promote(Index k, const std::vector<Index>& demoted) {
    for (Index q : demoted) {
      for (Index u : p_.fringe[q]) --req_zero_[u];
      for (Index u : p_.sub_only[q]) --req_neg_[u];
      for (Index b : p_.bags_of[q]) --bag_pos_[b];
    }
    y_[k] = 1;
    for (Index b : p_.bags_of[k]) ++bag_pos_[b];
    for (Index u : p_.fringe[k]) {
      ++req_zero_[u];
      y_[u] = 0;
    }
    for (Index u : p_.sub_only[k]) {
      ++req_neg_[u];
      y_[u] = -1;
    }
  }

  const Problem& p_;
  bool constraints_;
  std::vector<int> y_;
  std::vector<int> req_zero_;
  std::vector<int> req_neg_;
  std::vector<int> bag_pos_;
};

double objective_of(const Problem& p, const LinearModel& model, const std::vector<int>& y,
                    double C) {
  const Eigen::VectorXd s = p.features * model.w;
  double loss = 0.0;
  for (Index u = 0; u < y.size(); ++u)
    if (y[u] != 0) loss += std::max(0.0, 1.0 - y[u] * (s[static_cast<Eigen::Index>(u)] + model.b));
  return 0.5 * model.w.squaredNorm() + C * loss;
}

struct Outcome {
  LinearModel model;
  std::vector<int> labels;
  RestartTrace trace;
};

Outcome run_restart(const Problem& p, const CmiConfig& config, std::size_t restart) {
  Rng rng = make_rng(config.seed, restart);
  std::vector<int> y = initial_labels(p, config, rng);
  Outcome out;
  if (config.record_trajectory) out.trace.trajectory.push_back(y);
  FeatureMatrix x;
  std::vector<int> labels;
  Relabeler relabel(p, config.constraints);
  SvmConfig svm = config.svm;
  svm.seed = derive_seed(config.seed, 0x100000 + restart);
  for (int it = 1; it <= config.max_iterations; ++it) {
    out.model = fit(p, y, svm, x, labels);
    const Eigen::VectorXd score = (p.features * out.model.w).array() + out.model.b;
    std::vector<int> next = relabel.run(score);
    if (config.record_trajectory) out.trace.trajectory.push_back(next);
    out.trace.iterations = it;
    if (next == y) {
      out.trace.converged = true;
      break;
    }
    y = std::move(next);
  }
  if (!out.trace.converged) out.model = fit(p, y, svm, x, labels);
  out.labels = std::move(y);
  out.trace.objective = objective_of(p, out.model, out.labels, config.svm.C);
  return out;
}

}  // namespace

CmiResult cmi_svm_train(const BagSet& bags, const Dataset& dataset, const CmiConfig& config) {
  config.validate();
  const Problem problem = build_problem(bags, dataset, config);
  std::vector<Outcome> outcomes(static_cast<std::size_t>(config.restarts));
  parallel_for(outcomes.size(), config.jobs,
               [&](std::size_t r) { outcomes[r] = run_restart(problem, config, r); });

  std::size_t best = 0;
  for (std::size_t r = 1; r < outcomes.size(); ++r)
    if (outcomes[r].trace.objective < outcomes[best].trace.objective) best = r;

  CmiResult result;
  result.model = outcomes[best].model;
  result.assignment.regions = problem.ids;
  result.assignment.labels = outcomes[best].labels;
  result.iterations = outcomes[best].trace.iterations;
  result.converged = outcomes[best].trace.converged;
  result.objective = outcomes[best].trace.objective;
  result.restart = best;
  for (auto& o : outcomes) result.restarts.push_back(std::move(o.trace));
  return result;
}

CmiResult mi_svm_train(const BagSet& bags, const Dataset& dataset, CmiConfig config) {
  config.constraints = false;
  return cmi_svm_train(bags, dataset, config);
}

double mil_objective(const LinearModel& model, const LabelAssignment& assignment,
                     const Dataset& dataset, double C) {
  if (assignment.labels.size() != assignment.regions.size())
    throw invalid_argument("mil objective: malformed assignment");
  double loss = 0.0;
  for (std::size_t i = 0; i < assignment.regions.size(); ++i) {
    const int y = assignment.labels[i];
    if (y == 0) continue;
    const Region& region = dataset.regions.at(to_index(assignment.regions[i]));
    loss += std::max(0.0, 1.0 - y * model.decision(region.features));
  }
  return 0.5 * model.w.squaredNorm() + C * loss;
}

LinearModel train_supervised(const std::vector<InstanceLabel>& instances, const Dataset& dataset,
                             const SvmConfig& config) {
  FeatureMatrix x(static_cast<Eigen::Index>(instances.size()), dataset.feature_dim);
  std::vector<int> y(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const Region& region = dataset.regions.at(to_index(instances[i].region));
    if (static_cast<int>(region.features.size()) != dataset.feature_dim)
      throw dimension_error("supervised: region feature length differs from dataset dimension");
    for (int k = 0; k < dataset.feature_dim; ++k)
      x(static_cast<Eigen::Index>(i), k) = region.features[static_cast<std::size_t>(k)];
    y[i] = instances[i].label;
  }
  return train(x, y, config);
}

std::string serialize_assignment(const LabelAssignment& assignment) {
  std::string s = "mirl-assignment v1\ncount " + std::to_string(assignment.size()) + '\n';
  for (std::size_t i = 0; i < assignment.size(); ++i)
    s += std::to_string(to_index(assignment.regions[i])) + ' ' +
         std::to_string(assignment.labels[i]) + '\n';
  return s;
}

LabelAssignment parse_assignment(std::string_view text_in) {
  const auto lines = text::split_lines(text_in);
  if (lines.size() < 2) throw format_error("assignment: truncated file");
  {
    text::TokenReader rd(lines[0], "assignment header");
    rd.expect("mirl-assignment");
    if (rd.next() != "v1") throw format_error("assignment: unsupported schema version");
  }
  text::TokenReader count_rd(lines[1], "assignment count");
  count_rd.expect("count");
  const std::size_t count = count_rd.next_uint();
  if (lines.size() < count + 2) throw format_error("assignment: truncated file");
  LabelAssignment a;
  for (std::size_t i = 0; i < count; ++i) {
    text::TokenReader rd(lines[i + 2], "assignment entry");
    const std::size_t id = rd.next_uint();
    const auto label = rd.next_int();
    if (label < -1 || label > 1) throw format_error("assignment: label out of range");
    if (!a.regions.empty() && id <= to_index(a.regions.back()))
      throw format_error("assignment: region ids must ascend");
    a.regions.push_back(region_id(id));
    a.labels.push_back(static_cast<int>(label));
  }
  return a;
}

}  // namespace mirl
