// Copyright 2026 The resim Authors.
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

#include "resim/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace resim {

void Region::validate() const {
  if (!(std::isfinite(t) && std::isfinite(l) && std::isfinite(b) && std::isfinite(r))) {
    throw EmptyRegion("region has non-finite coordinates");
  }
  if (!(b > t && r > l)) {
    throw EmptyRegion("region must have strictly positive area");
  }
}

Region Affine2D::map(const Region& u) const {
  Point p0 = (*this)(Point{u.l, u.t});
  Point p1 = (*this)(Point{u.r, u.b});
  return Region{std::min(p0.y, p1.y), std::min(p0.x, p1.x),
                std::max(p0.y, p1.y), std::max(p0.x, p1.x)};
}

Affine2D forward_map(const ViewTransform& v) {
  const double sx = static_cast<double>(v.out_w) / v.crop.width();
  const double sy = static_cast<double>(v.out_h) / v.crop.height();
  Affine1D fx{sx, -v.crop.l * sx};
  if (v.hflip) {
    // x' = out_w - (x - crop.l) * sx
    fx = Affine1D{-sx, static_cast<double>(v.out_w) + v.crop.l * sx};
  }
  Affine1D fy{sy, -v.crop.t * sy};
  return Affine2D{fx, fy};
}

Affine2D inverse_transform(const ViewTransform& v) { return forward_map(v).inverse(); }

Point apply_transform(Point p, const ViewTransform& v) { return forward_map(v)(p); }

Region map_region(const Region& u_q, const ViewTransform& v_q, const ViewTransform& v_k) {
  if (v_q.hflip != v_k.hflip) {
    throw FlipMismatch("query and key views must share the flip decision");
  }
  return inverse_transform(v_q).then(forward_map(v_k)).map(u_q);
}

std::optional<Region> overlap_in_query(const ViewTransform& v_q, const ViewTransform& v_k) {
  if (v_q.hflip != v_k.hflip) {
    throw FlipMismatch("query and key views must share the flip decision");
  }
  Region src{std::max(v_q.crop.t, v_k.crop.t), std::max(v_q.crop.l, v_k.crop.l),
             std::min(v_q.crop.b, v_k.crop.b), std::min(v_q.crop.r, v_k.crop.r)};
  if (!(src.b > src.t && src.r > src.l)) return std::nullopt;
  return forward_map(v_q).map(src);
}

int64_t window_count(double extent, const WindowSpec& spec) {
  if (extent < spec.window) return 0;
  return static_cast<int64_t>(std::floor((extent - spec.window) / spec.stride)) + 1;
}

std::vector<Region> sliding_windows(const Region& area, const WindowSpec& spec) {
  area.validate();
  const int64_t rows = window_count(area.height(), spec);
  const int64_t cols = window_count(area.width(), spec);
  std::vector<Region> out;
  out.reserve(static_cast<size_t>(rows * cols));
  for (int64_t i = 0; i < rows; ++i) {
    const double t = area.t + static_cast<double>(i) * spec.stride;
    for (int64_t j = 0; j < cols; ++j) {
      const double l = area.l + static_cast<double>(j) * spec.stride;
      out.push_back(Region{t, l, t + spec.window, l + spec.window});
    }
  }
  return out;
}

Region to_feature_coords(const Region& u, double downsample_rate) {
  return Region{u.t / downsample_rate, u.l / downsample_rate,
                u.b / downsample_rate, u.r / downsample_rate};
}

std::vector<RegionPair> make_region_pairs(const ViewTransform& v_q, const ViewTransform& v_k,
                                          const WindowSpec& spec) {
  std::vector<RegionPair> pairs;
  auto overlap = overlap_in_query(v_q, v_k);
  if (!overlap) return pairs;
  if (overlap->height() < spec.window || overlap->width() < spec.window) return pairs;
  for (const Region& w : sliding_windows(*overlap, spec)) {
    pairs.push_back(RegionPair{w, map_region(w, v_q, v_k)});
  }
  return pairs;
}

}  // namespace resim
