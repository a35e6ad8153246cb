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

#include "mirl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>

#include "mirl/error.hpp"
#include "mirl/rng.hpp"
#include "text_io.hpp"

namespace mirl {

const char* to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

const char* to_string(RegionKind kind) {
  switch (kind) {
    case RegionKind::kCanvas: return "canvas";
    case RegionKind::kClutter: return "clutter";
    case RegionKind::kTarget: return "target";
    case RegionKind::kSubpart: return "subpart";
    case RegionKind::kFringe: return "fringe";
    case RegionKind::kContext: return "context";
  }
  return "?";
}

void GeneratorConfig::validate() const {
  auto fail = [](const std::string& what) { throw invalid_argument("generator config: " + what); };
  if (images < 1) fail("images must be positive");
  if (regions_min < 12) fail("regions_min must be at least 12");
  if (regions_max < regions_min) fail("regions_max must be >= regions_min");
  if (classes < 1) fail("classes must be positive");
  if (feature_dim < 8) fail("feature_dim must be at least 8");
  if (appearance_dims(feature_dim) < 3 * classes)
    fail("feature_dim too small for the requested number of classes");
  if (!(positive_fraction > 0.0 && positive_fraction < 1.0))
    fail("positive_fraction must lie in (0,1)");
  if (!(fixation_fraction > 0.0 && fixation_fraction < 1.0))
    fail("fixation_fraction must lie in (0,1)");
  if (!(separation >= 0.0) || !std::isfinite(separation)) fail("separation must be >= 0");
  if (!(pattern_strength >= 0.0) || !std::isfinite(pattern_strength))
    fail("pattern_strength must be >= 0");
  if (!(context_strength >= 0.0) || !std::isfinite(context_strength))
    fail("context_strength must be >= 0");
  if (!(noise >= 0.0) || !std::isfinite(noise)) fail("noise must be >= 0");
  if (!(pointer_noise >= 0.0) || !std::isfinite(pointer_noise))
    fail("pointer_noise must be >= 0");
}

int appearance_dims(int feature_dim) { return feature_dim - 7; }

std::vector<Rect> Dataset::rects_of(const SyntheticImage& image) const {
  std::vector<Rect> out;
  out.reserve(image.region_count);
  for (const Region& r : regions_of(image)) out.push_back(r.rect);
  return out;
}

const SyntheticImage& Dataset::image_of(RegionId id) const {
  return images.at(image_index_of(id));
}

std::vector<std::size_t> Dataset::images_in(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < images.size(); ++i)
    if (images[i].split == split) out.push_back(i);
  return out;
}

void Dataset::reindex() {
  owner_.assign(regions.size(), 0);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& im = images[i];
    if (im.first_region + im.region_count > regions.size())
      throw format_error("image region block out of range");
    for (std::size_t k = 0; k < im.region_count; ++k)
      owner_[im.first_region + k] = i;
  }
}

std::vector<ClassSignature> class_signatures(const GeneratorConfig& config) {
  const int dims = appearance_dims(config.feature_dim);
  Rng rng = make_rng(config.seed, 0x5167);
  std::normal_distribution<double> normal(0.0, 1.0);
  // Gram-Schmidt over 3 * classes random vectors.
  std::vector<std::vector<double>> basis;
  while (basis.size() < static_cast<std::size_t>(3 * config.classes)) {
    std::vector<double> v(static_cast<std::size_t>(dims));
    for (double& x : v) x = normal(rng);
    for (const auto& b : basis) {
      const double d = std::inner_product(v.begin(), v.end(), b.begin(), 0.0);
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= d * b[i];
    }
    const double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    if (norm < 1e-6) continue;
    for (double& x : v) x /= norm;
    basis.push_back(std::move(v));
  }
  std::vector<ClassSignature> out;
  for (int c = 0; c < config.classes; ++c) {
    const auto base = static_cast<std::size_t>(3 * c);
    out.push_back({basis[base], basis[base + 1], basis[base + 2]});
  }
  return out;
}

namespace {

struct Planted {
  Rect box;
  Rect pattern;
};

struct Draft {
  RegionKind kind;
  Rect rect;
};

std::optional<Rect> clipped(double x1, double y1, double x2, double y2) {
  x1 = std::clamp(x1, 0.0, 1.0);
  y1 = std::clamp(y1, 0.0, 1.0);
  x2 = std::clamp(x2, 0.0, 1.0);
  y2 = std::clamp(y2, 0.0, 1.0);
  if (x2 - x1 < 0.02 || y2 - y1 < 0.02) return std::nullopt;
  return Rect(x1, y1, x2, y2);
}

class ImageBuilder {
 public:
  ImageBuilder(const GeneratorConfig& config, Rng& rng) : config_(config), rng_(rng) {}

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng_);
  }
  double gauss(double sigma) { return std::normal_distribution<double>(0.0, sigma)(rng_); }

  Rect jitter(const Rect& base, double frac) {
    for (;;) {
      const double w = base.width(), h = base.height();
      auto r = clipped(base.x1() + gauss(frac * w), base.y1() + gauss(frac * h),
                       base.x2() + gauss(frac * w), base.y2() + gauss(frac * h));
      if (r) return *r;
    }
  }

  // Draws a rect by rejection; after `tries` failures keeps the last candidate
  // so generation always terminates.
  template <class Sample, class Accept>
  Rect draw(Sample sample, Accept accept, int tries = 200) {
    std::optional<Rect> last;
    for (int i = 0; i < tries; ++i) {
      auto r = sample();
      if (!r) continue;
      last = r;
      if (accept(*r)) return *r;
    }
    if (last) return *last;
    return Rect(0.0, 0.0, 0.1, 0.1);
  }

  Planted plant_target(const std::vector<Planted>& existing) {
    Rect box = draw(
        [&]() -> std::optional<Rect> {
          const double w = uniform(0.22, 0.45), h = uniform(0.22, 0.45);
          const double x = uniform(0.0, 1.0 - w), y = uniform(0.0, 1.0 - h);
          return Rect(x, y, x + w, y + h);
        },
        [&](const Rect& r) {
          return std::all_of(existing.begin(), existing.end(),
                             [&](const Planted& p) { return intersection_area(p.box, r) == 0.0; });
        });
    const double pw = box.width() * uniform(0.3, 0.45);
    const double ph = box.height() * uniform(0.3, 0.45);
    const double px = box.x1() + uniform(0.0, box.width() - pw);
    const double py = box.y1() + uniform(0.0, box.height() - ph);
    return {box, Rect(px, py, px + pw, py + ph)};
  }

  void add_cluster(const Planted& t, std::vector<Draft>& out) {
    const Rect& g = t.box;
    for (int i = 0; i < 3; ++i) {
      out.push_back({RegionKind::kTarget,
                     draw([&]() -> std::optional<Rect> { return jitter(g, 0.06); },
                          [&](const Rect& r) { return iou(r, g) >= 0.6; })});
    }
    for (int i = 0; i < 3; ++i) {
      out.push_back({RegionKind::kSubpart,
                     draw([&]() -> std::optional<Rect> { return jitter(t.pattern, 0.08); },
                          [&](const Rect& r) {
                            return containment_fraction(g, r) >= 0.85 && iou(g, r) < 0.35;
                          })});
    }
    for (int i = 0; i < 2; ++i) {
      out.push_back({RegionKind::kFringe,
                     draw(
                         [&]() -> std::optional<Rect> {
                           const double angle = uniform(0.0, 2.0 * M_PI);
                           const double s = uniform(0.3, 0.6);
                           const double w = g.width() * uniform(0.8, 1.2);
                           const double h = g.height() * uniform(0.8, 1.2);
                           const double cx = g.center().x + s * g.width() * std::cos(angle);
                           const double cy = g.center().y + s * g.height() * std::sin(angle);
                           return clipped(cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2);
                         },
                         [&](const Rect& r) {
                           const double o = iou(r, g);
                           return o >= 0.2 && o <= 0.45 && containment_fraction(g, r) < 0.8;
                         })});
    }
    for (int i = 0; i < 2; ++i) {
      out.push_back({RegionKind::kContext,
                     draw(
                         [&]() -> std::optional<Rect> {
                           const double w = g.width() * uniform(1.7, 2.4);
                           const double h = g.height() * uniform(1.7, 2.4);
                           const double x = g.x1() - uniform(0.0, w - g.width());
                           const double y = g.y1() - uniform(0.0, h - g.height());
                           return clipped(x, y, x + w, y + h);
                         },
                         [&](const Rect& r) {
                           return containment_fraction(r, g) >= 0.95 && iou(r, g) < 0.45;
                         })});
    }
  }

  Rect clutter(const std::vector<Planted>& targets) {
    return draw(
        [&]() -> std::optional<Rect> {
          const double w = uniform(0.06, 0.5), h = uniform(0.06, 0.5);
          const double x = uniform(0.0, 1.0 - w), y = uniform(0.0, 1.0 - h);
          return Rect(x, y, x + w, y + h);
        },
        [&](const Rect& r) {
          return std::all_of(targets.begin(), targets.end(), [&](const Planted& p) {
            return iou(r, p.box) < 0.15 && containment_fraction(r, p.box) < 0.3 &&
                   containment_fraction(p.box, r) < 0.5;
          });
        });
  }

 private:
  const GeneratorConfig& config_;
  Rng& rng_;
};

double fixation_weight(RegionKind kind) {
  switch (kind) {
    case RegionKind::kTarget:
    case RegionKind::kSubpart: return 5.0;
    case RegionKind::kFringe: return 2.0;
    case RegionKind::kClutter: return 1.0;
    case RegionKind::kContext:
    case RegionKind::kCanvas: return 0.25;
  }
  return 1.0;
}

// Weighted sampling without replacement of exactly `count` items
// (exponential-key method).
std::vector<bool> sample_fixations(const std::vector<Draft>& drafts, bool positive,
                                   std::size_t count, Rng& rng) {
  std::vector<std::pair<double, std::size_t>> keys;
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    const double w = positive ? fixation_weight(drafts[i].kind) : 1.0;
    const double u = std::max(uniform01(rng), 1e-300);
    keys.emplace_back(std::log(u) / w, i);
  }
  std::sort(keys.begin(), keys.end(), [](const auto& a, const auto& b) {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  });
  std::vector<bool> fixated(drafts.size(), false);
  for (std::size_t k = 0; k < count; ++k) fixated[keys[k].second] = true;
  return fixated;
}

}  // namespace

Dataset generate(const GeneratorConfig& config) {
  config.validate();
  Dataset ds;
  ds.feature_dim = config.feature_dim;
  ds.classes = config.classes;
  ds.seed = config.seed;
  ds.config = config;

  const auto signatures = class_signatures(config);
  const int app = appearance_dims(config.feature_dim);
  Rng rng = make_rng(config.seed, 1);
  ImageBuilder builder(config, rng);

  // Class per image: positives cycle through classes, then shuffle.
  const int n_pos = std::clamp(
      static_cast<int>(std::lround(config.images * config.positive_fraction)), 0, config.images);
  std::vector<int> classes(static_cast<std::size_t>(config.images), 0);
  for (int i = 0; i < n_pos; ++i) classes[static_cast<std::size_t>(i)] = 1 + i % config.classes;
  std::shuffle(classes.begin(), classes.end(), rng);

  for (int img = 0; img < config.images; ++img) {
    const int class_id = classes[static_cast<std::size_t>(img)];
    const bool positive = class_id != 0;
    const int count = std::uniform_int_distribution<int>(config.regions_min, config.regions_max)(rng);

    std::vector<Draft> drafts;
    drafts.push_back({RegionKind::kCanvas, Rect(0.0, 0.0, 1.0, 1.0)});
    std::vector<Planted> targets;
    if (positive) {
      const int n_targets = (count >= 24 && uniform01(rng) < 0.2) ? 2 : 1;
      for (int t = 0; t < n_targets; ++t) {
        targets.push_back(builder.plant_target(targets));
        builder.add_cluster(targets.back(), drafts);
      }
    }
    while (drafts.size() < static_cast<std::size_t>(count))
      drafts.push_back({RegionKind::kClutter, builder.clutter(targets)});

    // Location cue: where the target (or, on negatives, a phantom) sits.
    Point cue{builder.uniform(0.2, 0.8), builder.uniform(0.2, 0.8)};

    const auto n_fix = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::lround(config.fixation_fraction * drafts.size())), 1,
        drafts.size());
    auto fixated = sample_fixations(drafts, positive, n_fix, rng);
    if (positive) {
      // At least one fixated region must overlap a ground truth well.
      auto best_overlap = [&](const Rect& r) {
        double best = 0.0;
        for (const auto& t : targets) best = std::max(best, iou(r, t.box));
        return best;
      };
      bool ok = false;
      for (std::size_t i = 0; i < drafts.size(); ++i)
        ok = ok || (fixated[i] && best_overlap(drafts[i].rect) >= 0.5);
      if (!ok) {
        std::size_t best = 0, worst = drafts.size();
        for (std::size_t i = 0; i < drafts.size(); ++i) {
          if (best_overlap(drafts[i].rect) > best_overlap(drafts[best].rect)) best = i;
          if (fixated[i] && (worst == drafts.size() ||
                             fixation_weight(drafts[i].kind) < fixation_weight(drafts[worst].kind)))
            worst = i;
        }
        fixated[worst] = false;
        fixated[best] = true;
      }
    }

    SyntheticImage image;
    image.id = static_cast<std::uint32_t>(img);
    image.class_id = class_id;
    image.first_region = ds.regions.size();
    image.region_count = drafts.size();
    for (const auto& t : targets) image.ground_truth.push_back(t.box);

    const ClassSignature* sig = positive ? &signatures[static_cast<std::size_t>(class_id - 1)] : nullptr;
    for (std::size_t i = 0; i < drafts.size(); ++i) {
      const Rect& r = drafts[i].rect;
      double extent = 0.0, pattern = 0.0, context = 0.0;
      Point target_center = cue;
      double nearest = 1e300;
      for (const auto& t : targets) {
        extent = std::max(extent, iou(r, t.box));
        pattern = std::max(pattern, containment_fraction(r, t.pattern) *
                                        std::min(1.0, std::sqrt(t.pattern.area() / r.area())));
        context = std::max(context, containment_fraction(r, t.box) * (1.0 - iou(r, t.box)));
        const Point c = t.box.center();
        const double d = std::hypot(c.x - r.center().x, c.y - r.center().y);
        if (d < nearest) {
          nearest = d;
          target_center = c;
        }
      }

      Region region;
      region.id = region_id(ds.regions.size());
      region.kind = drafts[i].kind;
      region.rect = r;
      region.fixated = fixated[i];
      region.features.assign(static_cast<std::size_t>(config.feature_dim), 0.0);
      std::normal_distribution<double> normal(0.0, 1.0);
      for (int d = 0; d < app; ++d) {
        const auto k = static_cast<std::size_t>(d);
        double v = config.noise * normal(rng);
        if (sig) {
          v += config.separation *
               (extent * sig->extent[k] + config.pattern_strength * pattern * sig->pattern[k] +
                config.context_strength * context * sig->context[k]);
        }
        region.features[k] = v;
      }
      const Point half = r.half_extent();
      const auto app_u = static_cast<std::size_t>(app);
      region.features[app_u] =
          0.5 * std::clamp((target_center.x - r.center().x) / half.x, -4.0, 4.0) +
          config.pointer_noise * normal(rng);
      region.features[app_u + 1] =
          0.5 * std::clamp((target_center.y - r.center().y) / half.y, -4.0, 4.0) +
          config.pointer_noise * normal(rng);
      region.features[app_u + 2] = r.center().x;
      region.features[app_u + 3] = r.center().y;
      region.features[app_u + 4] = r.width();
      region.features[app_u + 5] = r.height();
      region.features[app_u + 6] = r.width() / r.height();
      ds.regions.push_back(std::move(region));
    }
    ds.images.push_back(std::move(image));
  }

  // Stratified 50/25/25 split per class.
  Rng split_rng = make_rng(config.seed, 2);
  for (int c = 0; c <= config.classes; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < ds.images.size(); ++i)
      if (ds.images[i].class_id == c) members.push_back(i);
    std::shuffle(members.begin(), members.end(), split_rng);
    const std::size_t n_train = members.size() / 2;
    const std::size_t n_val = members.size() / 4;
    for (std::size_t k = 0; k < members.size(); ++k) {
      ds.images[members[k]].split =
          k < n_train ? Split::kTrain : (k < n_train + n_val ? Split::kVal : Split::kTest);
    }
  }
  ds.reindex();
  return ds;
}

Supervision parse_supervision(std::string_view name) {
  if (name == "eye") return Supervision::kEye;
  if (name == "il") return Supervision::kImageLabel;
  if (name == "bb") return Supervision::kBoundingBox;
  throw invalid_argument("unknown supervision mode '" + std::string(name) + "'");
}

const char* to_string(Supervision mode) {
  switch (mode) {
    case Supervision::kEye: return "eye";
    case Supervision::kImageLabel: return "il";
    case Supervision::kBoundingBox: return "bb";
  }
  return "?";
}

BagSet make_bags(const Dataset& dataset, Supervision mode,
                 std::span<const std::size_t> image_indices, int target_class,
                 double fringe_threshold) {
  BagSet out;
  auto add_bag = [&](std::size_t image, std::vector<RegionId> regions, int label) {
    if (regions.empty()) return;
    Bag bag;
    bag.id = static_cast<std::uint32_t>(out.bags.size());
    bag.image = static_cast<std::uint32_t>(image);
    bag.regions = std::move(regions);
    bag.label = label;
    out.bags.push_back(std::move(bag));
  };

  for (std::size_t idx : image_indices) {
    const SyntheticImage& image = dataset.images.at(idx);
    const auto regions = dataset.regions_of(image);
    std::vector<RegionId> all;
    for (const Region& r : regions) all.push_back(r.id);

    if (image.label(target_class) < 0) {
      if (mode == Supervision::kBoundingBox) {
        for (RegionId id : all) out.instances.push_back({id, -1});
      } else {
        add_bag(idx, all, -1);
      }
      continue;
    }

    switch (mode) {
      case Supervision::kImageLabel:
        add_bag(idx, all, 1);
        break;
      case Supervision::kEye: {
        std::vector<RegionId> fixated, unfixated_clear;
        for (const Region& r : regions)
          if (r.fixated) fixated.push_back(r.id);
        for (const Region& r : regions) {
          if (r.fixated) continue;
          const bool touches = std::any_of(fixated.begin(), fixated.end(), [&](RegionId f) {
            return intersection_area(dataset.regions[to_index(f)].rect, r.rect) > 0.0;
          });
          if (!touches) unfixated_clear.push_back(r.id);
        }
        add_bag(idx, std::move(fixated), 1);
        add_bag(idx, std::move(unfixated_clear), -1);
        break;
      }
      case Supervision::kBoundingBox: {
        const auto rects = dataset.rects_of(image);
        std::vector<int> label(rects.size(), -1);
        std::vector<std::size_t> positives;
        for (const Rect& gt : image.ground_truth) {
          std::size_t best = 0;
          for (std::size_t k = 1; k < rects.size(); ++k)
            if (iou(rects[k], gt) > iou(rects[best], gt)) best = k;
          positives.push_back(best);
        }
        for (std::size_t p : positives)
          for (std::size_t f : fringe_set(p, rects, fringe_threshold)) label[f] = 0;
        for (std::size_t p : positives) label[p] = 1;
        for (std::size_t k = 0; k < rects.size(); ++k)
          if (label[k] != 0) out.instances.push_back({all[k], label[k]});
        break;
      }
    }
  }
  return out;
}

namespace {
constexpr std::string_view kMagic = "mirl-dataset";
constexpr int kVersion = 1;

std::string config_line(const GeneratorConfig& c) {
  std::string s = "config";
  auto kv = [&](const char* key, const std::string& value) {
    s += ' ';
    s += key;
    s += '=';
    s += value;
  };
  kv("images", std::to_string(c.images));
  kv("regions_min", std::to_string(c.regions_min));
  kv("regions_max", std::to_string(c.regions_max));
  kv("feature_dim", std::to_string(c.feature_dim));
  kv("classes", std::to_string(c.classes));
  kv("positive_fraction", text::format_double(c.positive_fraction));
  kv("separation", text::format_double(c.separation));
  kv("pattern_strength", text::format_double(c.pattern_strength));
  kv("context_strength", text::format_double(c.context_strength));
  kv("noise", text::format_double(c.noise));
  kv("pointer_noise", text::format_double(c.pointer_noise));
  kv("fixation_fraction", text::format_double(c.fixation_fraction));
  kv("seed", std::to_string(c.seed));
  return s;
}

GeneratorConfig parse_config_line(std::string_view line) {
  text::TokenReader rd(line, "dataset config");
  rd.expect("config");
  GeneratorConfig c;
  while (!rd.done()) {
    const std::string tok(rd.next());
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw format_error("dataset config: malformed entry '" + tok + "'");
    const std::string key = tok.substr(0, eq);
    text::TokenReader v(std::string_view(tok).substr(eq + 1), "dataset config " + key);
    if (key == "images") c.images = static_cast<int>(v.next_int());
    else if (key == "regions_min") c.regions_min = static_cast<int>(v.next_int());
    else if (key == "regions_max") c.regions_max = static_cast<int>(v.next_int());
    else if (key == "feature_dim") c.feature_dim = static_cast<int>(v.next_int());
    else if (key == "classes") c.classes = static_cast<int>(v.next_int());
    else if (key == "positive_fraction") c.positive_fraction = v.next_double();
    else if (key == "separation") c.separation = v.next_double();
    else if (key == "pattern_strength") c.pattern_strength = v.next_double();
    else if (key == "context_strength") c.context_strength = v.next_double();
    else if (key == "noise") c.noise = v.next_double();
    else if (key == "pointer_noise") c.pointer_noise = v.next_double();
    else if (key == "fixation_fraction") c.fixation_fraction = v.next_double();
    else if (key == "seed") c.seed = v.next_uint();
    else throw format_error("dataset config: unknown key '" + key + "'");
  }
  return c;
}

void append_rect(std::string& s, const Rect& r) {
  for (double v : {r.x1(), r.y1(), r.x2(), r.y2()}) {
    s += ' ';
    text::append_double(s, v);
  }
}

Rect read_rect(text::TokenReader& rd) {
  const double x1 = rd.next_double(), y1 = rd.next_double();
  const double x2 = rd.next_double(), y2 = rd.next_double();
  try {
    return Rect(x1, y1, x2, y2);
  } catch (const Error& e) {
    throw format_error(std::string("dataset: ") + e.what());
  }
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw format_error("dataset: unknown split '" + std::string(s) + "'");
}
}  // namespace

std::string serialize_dataset(const Dataset& ds) {
  std::string s;
  s += std::string(kMagic) + " v" + std::to_string(kVersion) + " dim=" +
       std::to_string(ds.feature_dim) + " seed=" + std::to_string(ds.seed) +
       " classes=" + std::to_string(ds.classes) + " images=" + std::to_string(ds.images.size()) +
       "\n";
  s += config_line(ds.config) + "\n";
  for (const SyntheticImage& im : ds.images) {
    s += "image " + std::to_string(im.id) + ' ' + to_string(im.split) + ' ' +
         std::to_string(im.class_id) + ' ' + std::to_string(im.ground_truth.size());
    for (const Rect& g : im.ground_truth) append_rect(s, g);
    s += ' ' + std::to_string(im.region_count);
    for (const Region& r : ds.regions_of(im)) {
      s += ' ' + std::to_string(to_index(r.id)) + ' ' +
           std::to_string(static_cast<int>(r.kind));
      append_rect(s, r.rect);
      s += r.fixated ? " 1" : " 0";
      for (double f : r.features) {
        s += ' ';
        text::append_double(s, f);
      }
    }
    s += '\n';
  }
  s += "end\n";
  return s;
}

Dataset parse_dataset(std::string_view text_in) {
  const auto lines = text::split_lines(text_in);
  if (lines.size() < 2) throw format_error("dataset: truncated header");
  Dataset ds;
  std::size_t n_images = 0;
  {
    text::TokenReader rd(lines[0], "dataset header");
    rd.expect(kMagic);
    if (rd.next() != "v" + std::to_string(kVersion))
      throw format_error("dataset: unsupported schema version");
    auto field = [&](std::string_view key) {
      const std::string tok(rd.next());
      if (tok.rfind(std::string(key) + "=", 0) != 0)
        throw format_error("dataset header: expected " + std::string(key));
      text::TokenReader v(std::string_view(tok).substr(key.size() + 1), "dataset header");
      return v.next_uint();
    };
    ds.feature_dim = static_cast<int>(field("dim"));
    ds.seed = field("seed");
    ds.classes = static_cast<int>(field("classes"));
    n_images = field("images");
  }
  ds.config = parse_config_line(lines[1]);
  if (lines.size() < n_images + 3) throw format_error("dataset: truncated file");
  for (std::size_t i = 0; i < n_images; ++i) {
    text::TokenReader rd(lines[2 + i], "dataset image record " + std::to_string(i));
    rd.expect("image");
    SyntheticImage im;
    im.id = static_cast<std::uint32_t>(rd.next_uint());
    im.split = parse_split(rd.next());
    im.class_id = static_cast<int>(rd.next_int());
    const auto n_gt = rd.next_uint();
    for (std::uint64_t g = 0; g < n_gt; ++g) im.ground_truth.push_back(read_rect(rd));
    im.region_count = rd.next_uint();
    im.first_region = ds.regions.size();
    const std::size_t per_region = 7 + static_cast<std::size_t>(ds.feature_dim);
    const std::size_t remaining = rd.remaining_tokens();
    if (remaining != im.region_count * per_region) {
      if (im.region_count > 0 && remaining % im.region_count == 0 &&
          remaining / im.region_count > 7) {
        throw dimension_error("dataset: image " + std::to_string(im.id) + " carries " +
                              std::to_string(remaining / im.region_count - 7) +
                              " features per region, header declares " +
                              std::to_string(ds.feature_dim));
      }
      throw format_error("dataset: image " + std::to_string(im.id) + " record is truncated");
    }
    for (std::size_t k = 0; k < im.region_count; ++k) {
      Region r;
      const auto id = rd.next_uint();
      if (id != ds.regions.size()) throw format_error("dataset: region ids out of order");
      r.id = region_id(id);
      const auto kind = rd.next_int();
      if (kind < 0 || kind > 5) throw format_error("dataset: bad region kind");
      r.kind = static_cast<RegionKind>(kind);
      r.rect = read_rect(rd);
      r.fixated = rd.next_int() != 0;
      r.features.reserve(static_cast<std::size_t>(ds.feature_dim));
      for (int d = 0; d < ds.feature_dim; ++d) r.features.push_back(rd.next_double());
      ds.regions.push_back(std::move(r));
    }
    ds.images.push_back(std::move(im));
  }
  if (lines[2 + n_images] != "end") throw format_error("dataset: missing end marker");
  ds.reindex();
  return ds;
}

void save_dataset(const Dataset& dataset, const std::string& path) {
  text::write_file(path, serialize_dataset(dataset));
}

Dataset load_dataset(const std::string& path) { return parse_dataset(text::read_file(path)); }

std::string dataset_hash(const Dataset& dataset) {
  return text::hex64(text::fnv1a(serialize_dataset(dataset)));
}

}  // namespace mirl
