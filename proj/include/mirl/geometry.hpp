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

#ifndef MIRL_GEOMETRY_HPP_
#define MIRL_GEOMETRY_HPP_

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace mirl {

// Index into a dataset's global region table.
enum class RegionId : std::uint32_t {};

constexpr std::size_t to_index(RegionId id) {
  return static_cast<std::size_t>(id);
}
constexpr RegionId region_id(std::size_t index) {
  return static_cast<RegionId>(static_cast<std::uint32_t>(index));
}

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// Axis-aligned rectangle on the unit canvas. Construction rejects
// non-finite coordinates and zero or negative extent.
class Rect {
 public:
  Rect(double x1, double y1, double x2, double y2);

  double x1() const { return x1_; }
  double y1() const { return y1_; }
  double x2() const { return x2_; }
  double y2() const { return y2_; }
  double width() const { return x2_ - x1_; }
  double height() const { return y2_ - y1_; }
  double area() const { return width() * height(); }
  Point center() const { return {0.5 * (x1_ + x2_), 0.5 * (y1_ + y2_)}; }
  Point half_extent() const { return {0.5 * width(), 0.5 * height()}; }

  // Closed-rectangle membership.
  bool contains(Point p) const {
    return p.x >= x1_ && p.x <= x2_ && p.y >= y1_ && p.y <= y2_;
  }

  auto operator<=>(const Rect&) const = default;

 private:
  double x1_, y1_, x2_, y2_;
};

double intersection_area(const Rect& a, const Rect& b);
double iou(const Rect& a, const Rect& b);

// Fraction of `inner`'s area covered by `outer`.
double containment_fraction(const Rect& outer, const Rect& inner);

// Pool indices r' != r with containment_fraction(pool[r], pool[r']) >= threshold,
// i.e. regions lying mostly inside pool[r]. Ascending order.
std::vector<std::size_t> subregion_set(std::size_t r, std::span<const Rect> pool,
                                       double threshold);

// Pool indices r' != r with iou(pool[r], pool[r']) >= threshold. Ascending.
std::vector<std::size_t> fringe_set(std::size_t r, std::span<const Rect> pool,
                                    double threshold);

}  // namespace mirl

#endif  // MIRL_GEOMETRY_HPP_
