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

#ifndef MIRL_DATASET_HPP_
#define MIRL_DATASET_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mirl/geometry.hpp"

namespace mirl {

// Generator bookkeeping: what each synthetic region was built to be.
// Features are derived from geometry alone, so the kind never leaks into them.
enum class RegionKind : std::uint8_t {
  kCanvas = 0,   // full-canvas region, always present
  kClutter = 1,  // background
  kTarget = 2,   // close to a ground-truth rect
  kSubpart = 3,  // mostly inside a ground truth, around its discriminative pattern
  kFringe = 4,   // partial overlap with a ground truth
  kContext = 5,  // superset of a ground truth
};

enum class Split : std::uint8_t { kTrain = 0, kVal = 1, kTest = 2 };

const char* to_string(Split split);
const char* to_string(RegionKind kind);

struct Region {
  RegionId id{};
  RegionKind kind = RegionKind::kClutter;
  Rect rect{0.0, 0.0, 1.0, 1.0};
  bool fixated = false;
  std::vector<double> features;
};

struct SyntheticImage {
  std::uint32_t id = 0;
  Split split = Split::kTrain;
  int class_id = 0;  // 0: no target present
  std::vector<Rect> ground_truth;
  std::size_t first_region = 0;
  std::size_t region_count = 0;

  // One-vs-all image label.
  int label(int target_class) const { return class_id == target_class ? 1 : -1; }
};

struct GeneratorConfig {
  int images = 160;
  int regions_min = 24;
  int regions_max = 32;
  int feature_dim = 24;
  int classes = 1;
  double positive_fraction = 0.5;
  // Distance between target and background appearance means.
  double separation = 3.75;
  // Strength of the shared part pattern, relative to `separation`. Sub-part
  // regions tightly around the pattern carry it at full density.
  double pattern_strength = 2.5;
  // Strength of the scene-context signature carried by supersets of a target.
  double context_strength = 1.2;
  double noise = 1.0;
  double pointer_noise = 0.05;
  double fixation_fraction = 0.34;
  std::uint64_t seed = 1;

  // Throws InvalidArgument on any out-of-range field.
  void validate() const;
};

// Everything the generator produced. Region ids index `regions`; each image
// owns the contiguous block [first_region, first_region + region_count).
struct Dataset {
  int feature_dim = 0;
  int classes = 1;
  std::uint64_t seed = 0;
  GeneratorConfig config;
  std::vector<SyntheticImage> images;
  std::vector<Region> regions;

  std::span<const Region> regions_of(const SyntheticImage& image) const {
    return {regions.data() + image.first_region, image.region_count};
  }
  std::vector<Rect> rects_of(const SyntheticImage& image) const;
  const SyntheticImage& image_of(RegionId id) const;
  std::vector<std::size_t> images_in(Split split) const;
  std::size_t image_index_of(RegionId id) const { return owner_.at(to_index(id)); }

  // Rebuilds the region -> image index; called by generate() and load().
  void reindex();

 private:
  std::vector<std::size_t> owner_;
};

// Per-class unit directions in the appearance subspace.
struct ClassSignature {
  std::vector<double> extent;   // whole-target signature
  std::vector<double> pattern;  // discriminative sub-part pattern
  std::vector<double> context;  // scene context around the target
};

// Number of leading appearance dimensions; the rest are two location-cue
// dimensions and the five-component geometric descriptor.
int appearance_dims(int feature_dim);
std::vector<ClassSignature> class_signatures(const GeneratorConfig& config);

Dataset generate(const GeneratorConfig& config);

enum class Supervision { kEye, kImageLabel, kBoundingBox };
Supervision parse_supervision(std::string_view name);
const char* to_string(Supervision mode);

struct Bag {
  std::uint32_t id = 0;
  std::uint32_t image = 0;  // index into Dataset::images
  std::vector<RegionId> regions;
  int label = -1;
};

struct InstanceLabel {
  RegionId region{};
  int label = -1;
};

struct BagSet {
  std::vector<Bag> bags;
  // Only filled for bounding-box supervision: direct instance labels, with
  // the fringe of each positive left out.
  std::vector<InstanceLabel> instances;
};

BagSet make_bags(const Dataset& dataset, Supervision mode,
                 std::span<const std::size_t> image_indices, int target_class = 1,
                 double fringe_threshold = 0.2);

std::string serialize_dataset(const Dataset& dataset);
Dataset parse_dataset(std::string_view text);
void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

// FNV-1a of the serialized form, 16 hex digits.
std::string dataset_hash(const Dataset& dataset);

}  // namespace mirl

#endif  // MIRL_DATASET_HPP_
