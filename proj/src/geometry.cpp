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

#include "mirl/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mirl/error.hpp"

namespace mirl {

Rect::Rect(double x1, double y1, double x2, double y2)
    : x1_(x1), y1_(y1), x2_(x2), y2_(y2) {
  if (!std::isfinite(x1) || !std::isfinite(y1) || !std::isfinite(x2) ||
      !std::isfinite(y2) || !(x1 < x2) || !(y1 < y2)) {
    std::ostringstream os;
    os << "invalid rect [" << x1 << ", " << y1 << ", " << x2 << ", " << y2
       << "]";
    throw invalid_argument(os.str());
  }
}

double intersection_area(const Rect& a, const Rect& b) {
  const double w = std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1());
  const double h = std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1());
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

double iou(const Rect& a, const Rect& b) {
  const double inter = intersection_area(a, b);
  if (inter == 0.0) return 0.0;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double containment_fraction(const Rect& outer, const Rect& inner) {
  return std::clamp(intersection_area(outer, inner) / inner.area(), 0.0, 1.0);
}

std::vector<std::size_t> subregion_set(std::size_t r, std::span<const Rect> pool,
                                       double threshold) {
  if (!(threshold > 0.0)) throw invalid_argument("subregion threshold must be > 0");
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < pool.size(); ++k) {
    if (k != r && containment_fraction(pool[r], pool[k]) >= threshold)
      out.push_back(k);
  }
  return out;
}

std::vector<std::size_t> fringe_set(std::size_t r, std::span<const Rect> pool,
                                    double threshold) {
  if (!(threshold > 0.0)) throw invalid_argument("fringe threshold must be > 0");
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < pool.size(); ++k) {
    if (k != r && iou(pool[r], pool[k]) >= threshold) out.push_back(k);
  }
  return out;
}

}  // namespace mirl
