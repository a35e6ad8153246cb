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

// Brute-force reference implementations shared by the unit and acceptance
// tests. Written for clarity, not speed, and independent of the library
// internals they check.

#ifndef MIRL_TESTS_ORACLES_HPP_
#define MIRL_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "mirl/agent.hpp"
#include "mirl/dataset.hpp"
#include "mirl/eval.hpp"
#include "mirl/miltrain.hpp"
#include "mirl/svm.hpp"

namespace oracle {

inline double area_overlap(const mirl::Rect& a, const mirl::Rect& b) {
  const double w = std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1());
  const double h = std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1());
  return w > 0 && h > 0 ? w * h : 0.0;
}

inline double overlap_iou(const mirl::Rect& a, const mirl::Rect& b) {
  const double i = area_overlap(a, b);
  return i / (a.area() + b.area() - i);
}

// ---- constrained MIL labels ----------------------------------------------

// Counts violations of the label range, fringe, subregion, positive-bag and
// negative-bag constraints by exhaustive scan over every labelled image.
inline std::size_t constraint_violations(const mirl::Dataset& ds, const mirl::BagSet& bags,
                                         const mirl::LabelAssignment& y, double t_s, double t_f,
                                         std::vector<std::string>* why = nullptr) {
  std::size_t bad = 0;
  auto note = [&](const std::string& s) {
    ++bad;
    if (why && why->size() < 20) why->push_back(s);
  };
  std::map<std::size_t, int> label;
  for (std::size_t i = 0; i < y.regions.size(); ++i) {
    label[mirl::to_index(y.regions[i])] = y.labels[i];
    if (y.labels[i] < -1 || y.labels[i] > 1) note("label out of range");
  }
  std::vector<bool> seen(ds.images.size(), false);
  for (const mirl::Bag& bag : bags.bags) seen[bag.image] = true;
  for (std::size_t img = 0; img < ds.images.size(); ++img) {
    if (!seen[img]) continue;
    const mirl::SyntheticImage& im = ds.images[img];
    for (std::size_t a = 0; a < im.region_count; ++a) {
      const std::size_t ga = im.first_region + a;
      if (!label.count(ga)) {
        note("region " + std::to_string(ga) + " unlabelled");
        continue;
      }
      if (label[ga] != 1) continue;
      const mirl::Rect& ra = ds.regions[ga].rect;
      for (std::size_t b = 0; b < im.region_count; ++b) {
        if (b == a) continue;
        const std::size_t gb = im.first_region + b;
        const mirl::Rect& rb = ds.regions[gb].rect;
        const bool fringe = overlap_iou(ra, rb) >= t_f;
        const bool sub = area_overlap(ra, rb) / rb.area() >= t_s;
        if (fringe && label[gb] != 0)
          note("fringe " + std::to_string(gb) + " of positive " + std::to_string(ga) + " not 0");
        if (sub && !fringe && label[gb] != -1)
          note("subregion " + std::to_string(gb) + " of positive " + std::to_string(ga) +
               " not -1");
      }
    }
  }
  for (const mirl::Bag& bag : bags.bags) {
    if (bag.label > 0) {
      bool any = false;
      for (mirl::RegionId r : bag.regions) any = any || label[mirl::to_index(r)] == 1;
      if (!any) note("positive bag " + std::to_string(bag.id) + " has no positive");
    } else {
      for (mirl::RegionId r : bag.regions)
        if (label[mirl::to_index(r)] != -1) note("negative bag member not -1");
    }
  }
  return bad;
}

// Plain miSVM alternation: fit on labelled instances, then per positive bag
// y = sign(f) with the best member forced positive when none is. Starts from
// `initial`, labels indexed like `regions`. Returns every labelling visited.
inline std::vector<std::vector<int>> misvm_trajectory(const mirl::Dataset& ds,
                                                      const mirl::BagSet& bags,
                                                      const std::vector<mirl::RegionId>& regions,
                                                      std::vector<int> y,
                                                      const mirl::SvmConfig& svm,
                                                      int max_iterations) {
  std::map<std::size_t, std::size_t> slot;
  for (std::size_t i = 0; i < regions.size(); ++i) slot[mirl::to_index(regions[i])] = i;
  std::vector<std::vector<int>> out{y};
  for (int it = 0; it < max_iterations; ++it) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (y[i] != 0) rows.push_back(i);
    mirl::FeatureMatrix x(static_cast<Eigen::Index>(rows.size()), ds.feature_dim);
    std::vector<int> labels;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto& f = ds.regions[mirl::to_index(regions[rows[r]])].features;
      for (int k = 0; k < ds.feature_dim; ++k)
        x(static_cast<Eigen::Index>(r), k) = f[static_cast<std::size_t>(k)];
      labels.push_back(y[rows[r]]);
    }
    const mirl::LinearModel m = mirl::train(x, labels, svm);
    std::vector<int> next(y.size(), 0);
    for (const mirl::Bag& bag : bags.bags)
      if (bag.label < 0)
        for (mirl::RegionId r : bag.regions) next[slot.at(mirl::to_index(r))] = -1;
    for (const mirl::Bag& bag : bags.bags) {
      if (bag.label < 0) continue;
      bool any = false;
      std::size_t best = 0;
      double best_f = -1e300;
      for (mirl::RegionId r : bag.regions) {
        const std::size_t i = slot.at(mirl::to_index(r));
        const double f = m.decision(ds.regions[mirl::to_index(r)].features);
        bool locked = false;
        for (const mirl::Bag& nb : bags.bags)
          if (nb.label < 0 && std::find(nb.regions.begin(), nb.regions.end(), r) != nb.regions.end())
            locked = true;
        if (locked) continue;
        if (f > 0) {
          next[i] = 1;
          any = true;
        } else {
          next[i] = -1;
        }
        if (f > best_f || (f == best_f && mirl::to_index(r) < mirl::to_index(regions[best]))) {
          best_f = f;
          best = i;
        }
      }
      if (!any) next[best] = 1;
    }
    out.push_back(next);
    if (next == y) break;
    y = std::move(next);
  }
  return out;
}

// ---- evaluation -----------------------------------------------------------

inline bool rank_less(const mirl::Detection& a, const mirl::Detection& b) {
  if (a.confidence != b.confidence) return a.confidence > b.confidence;
  if (a.image != b.image) return a.image < b.image;
  return a.rect < b.rect;
}

// Repeatedly keeps the best remaining detection and strikes everything that
// overlaps it at or above the threshold.
inline std::vector<mirl::Detection> greedy_nms(std::vector<mirl::Detection> pool, double t) {
  std::vector<mirl::Detection> kept;
  while (!pool.empty()) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < pool.size(); ++i)
      if (rank_less(pool[i], pool[best])) best = i;
    const mirl::Detection top = pool[best];
    kept.push_back(top);
    std::vector<mirl::Detection> rest;
    for (std::size_t i = 0; i < pool.size(); ++i)
      if (i != best && overlap_iou(pool[i].rect, top.rect) < t) rest.push_back(pool[i]);
    pool = std::move(rest);
  }
  return kept;
}

// AP from an explicit precision/recall table: for every recall level r_k
// reached, the envelope is the best precision at any cut with recall >= r_k;
// AP sums envelope * recall increment.
inline double pr_table_ap(const std::vector<bool>& hits, std::size_t positives) {
  const std::size_t n = hits.size();
  std::vector<double> prec(n), rec(n);
  std::size_t tp = 0;
  for (std::size_t k = 0; k < n; ++k) {
    tp += hits[k];
    prec[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
    rec[k] = static_cast<double>(tp) / static_cast<double>(positives);
  }
  double ap = 0.0, prev = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (!hits[k]) continue;
    double env = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (rec[j] >= rec[k]) env = std::max(env, prec[j]);
    ap += env * (rec[k] - prev);
    prev = rec[k];
  }
  return ap;
}

inline double criterion_value(const mirl::Rect& gt, const mirl::Rect& det, bool inclusion) {
  return inclusion ? area_overlap(gt, det) / det.area() : overlap_iou(gt, det);
}

inline double detection_ap(std::vector<mirl::Detection> dets,
                           const std::vector<mirl::GroundTruth>& gts, bool inclusion,
                           double threshold) {
  std::sort(dets.begin(), dets.end(), rank_less);
  std::vector<bool> taken(gts.size(), false), hits;
  for (const mirl::Detection& d : dets) {
    std::size_t best = gts.size();
    double best_v = -1.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g] || gts[g].image != d.image) continue;
      const double v = criterion_value(gts[g].rect, d.rect, inclusion);
      if (v >= threshold && v > best_v) {
        best_v = v;
        best = g;
      }
    }
    if (best < gts.size()) taken[best] = true;
    hits.push_back(best < gts.size());
  }
  return pr_table_ap(hits, gts.size());
}

inline double classification_ap(std::vector<mirl::ImageScore> s) {
  std::sort(s.begin(), s.end(), [](const mirl::ImageScore& a, const mirl::ImageScore& b) {
    return a.score != b.score ? a.score > b.score : a.image < b.image;
  });
  std::vector<bool> hits;
  std::size_t pos = 0;
  for (const auto& x : s) {
    hits.push_back(x.label > 0);
    pos += x.label > 0;
  }
  return pr_table_ap(hits, pos);
}

// ---- enumerable search instance ------------------------------------------

// Small images whose regions and confidences are fixed by hand. The storage
// outlives the SearchImage views handed out by `views()`.
struct ToyImages {
  std::vector<std::vector<mirl::Region>> regions;
  std::vector<std::vector<double>> confidence;
  std::vector<int> labels;

  std::vector<mirl::SearchImage> views() const {
    std::vector<mirl::SearchImage> out;
    for (std::size_t i = 0; i < regions.size(); ++i) {
      mirl::SearchImage s;
      s.image = static_cast<std::uint32_t>(i);
      s.label = labels[i];
      s.regions = regions[i];
      s.confidence = confidence[i];
      out.push_back(s);
    }
    return out;
  }
};

inline mirl::Region toy_region(std::size_t id, mirl::Rect r, std::vector<double> g) {
  mirl::Region out;
  out.id = mirl::region_id(id);
  out.rect = r;
  out.features = std::move(g);
  return out;
}

// Two images of three regions with a 3-dimensional descriptor: a canvas
// region, and two smaller ones off center that only saccades can reach.
inline ToyImages toy_instance() {
  using mirl::Rect;
  ToyImages t;
  t.regions.push_back({toy_region(0, Rect(0, 0, 1, 1), {1.0, 0.0, 0.5}),
                       toy_region(1, Rect(0.05, 0.1, 0.45, 0.4), {0.2, 1.0, -0.3}),
                       toy_region(2, Rect(0.55, 0.6, 0.95, 0.9), {-0.4, 0.3, 1.0})});
  t.confidence.push_back({-0.3, 0.8, -0.6});
  t.labels.push_back(1);
  t.regions.push_back({toy_region(0, Rect(0, 0, 1, 1), {1.0, 0.1, 0.4}),
                       toy_region(1, Rect(0.1, 0.55, 0.35, 0.95), {0.5, -0.6, 0.2}),
                       toy_region(2, Rect(0.3, 0.05, 0.9, 0.45), {-0.2, 0.7, -0.5})});
  t.confidence.push_back({-0.2, -0.9, 0.4});
  t.labels.push_back(-1);
  return t;
}

inline mirl::PolicyParams toy_policy(std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  mirl::PolicyParams p = mirl::PolicyParams::zeros(3);
  Eigen::VectorXd flat = p.flatten();
  for (Eigen::Index i = 0; i < flat.size(); ++i) flat[i] = normal(rng);
  flat[flat.size() - 2] = std::log(0.25);
  flat[flat.size() - 1] = std::log(0.3);
  return mirl::PolicyParams::unflatten(flat, 3);
}

// ---- random evaluation fixtures -------------------------------------------

struct EvalFixture {
  std::vector<mirl::Detection> detections;  // up to 8, over up to 3 images
  std::vector<mirl::GroundTruth> truth;     // up to 4
  std::vector<mirl::ImageScore> scores;     // up to 8, at least one positive
};

// Confidences come from a coarse grid so that ties are common.
inline EvalFixture random_fixture(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto count = [&](int hi) { return static_cast<int>(rng() % static_cast<std::uint64_t>(hi + 1)); };
  auto rect = [&] {
    const double w = 0.1 + 0.5 * u(rng), h = 0.1 + 0.5 * u(rng);
    const double x = u(rng) * (1.0 - w), y = u(rng) * (1.0 - h);
    return mirl::Rect(x, y, x + w, y + h);
  };
  EvalFixture f;
  const int nd = count(8), ng = count(4), ns = 1 + count(7);
  for (int i = 0; i < ng; ++i)
    f.truth.push_back({static_cast<std::uint32_t>(rng() % 3), rect()});
  for (int i = 0; i < nd; ++i) {
    mirl::Detection d;
    d.image = static_cast<std::uint32_t>(rng() % 3);
    // Half the detections are jittered copies of a ground truth box.
    if (!f.truth.empty() && u(rng) < 0.5) {
      const auto& g = f.truth[rng() % f.truth.size()];
      d.image = g.image;
      const double j = 0.04 * u(rng);
      d.rect = mirl::Rect(g.rect.x1() + j, g.rect.y1() + j * u(rng), g.rect.x2() - j * u(rng), g.rect.y2());
    } else {
      d.rect = rect();
    }
    d.confidence = std::round(u(rng) * 8.0) / 4.0 - 1.0;
    f.detections.push_back(d);
  }
  for (int i = 0; i < ns; ++i)
    f.scores.push_back({static_cast<std::uint32_t>(i), std::round(u(rng) * 6.0) / 3.0,
                        u(rng) < 0.5 ? 1 : -1});
  f.scores[rng() % f.scores.size()].label = 1;
  return f;
}

// Largest disagreement between the library and the brute-force references on
// one fixture. NMS disagreement counts as infinity.
inline double fixture_error(const EvalFixture& f) {
  double worst = 0.0;
  for (std::uint32_t im = 0; im < 3; ++im) {
    std::vector<mirl::Detection> pool;
    for (const auto& d : f.detections)
      if (d.image == im) pool.push_back(d);
    for (double t : {0.2, 0.5}) {
      const auto a = mirl::nms(pool, t);
      const auto b = greedy_nms(pool, t);
      if (a.size() != b.size()) return INFINITY;
      for (std::size_t i = 0; i < a.size(); ++i)
        if (!(a[i].rect == b[i].rect) || a[i].confidence != b[i].confidence) return INFINITY;
    }
  }
  for (bool inclusion : {false, true}) {
    for (double t : {0.5, 0.3}) {
      const mirl::ApCriterion c{inclusion ? mirl::MatchCriterion::kInclusion : mirl::MatchCriterion::kIoU, t};
      const auto got = mirl::detection_ap(f.detections, f.truth, c);
      if (f.truth.empty()) {
        if (got.has_value()) return INFINITY;
        continue;
      }
      if (!got.has_value()) return INFINITY;
      worst = std::max(worst, std::abs(*got - detection_ap(f.detections, f.truth, inclusion, t)));
    }
  }
  worst = std::max(worst, std::abs(mirl::classification_ap(f.scores) - classification_ap(f.scores)));
  return worst;
}

}  // namespace oracle

#endif  // MIRL_TESTS_ORACLES_HPP_
