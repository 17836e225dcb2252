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

#pragma once

#include <optional>
#include <vector>

#include "resim/common.hpp"

namespace resim {

// Continuous-coordinate view/region algebra. Convention used everywhere:
// the origin is the top-left corner of the top-left pixel and pixel
// (row i, col j) occupies [i, i+1] x [j, j+1]. All maps are exact affine
// transforms; nothing is ever rounded to integer pixels.

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// Axis-aligned rectangle given by top/left/bottom/right coordinates.
struct Region {
  double t = 0.0;
  double l = 0.0;
  double b = 0.0;
  double r = 0.0;

  double width() const { return r - l; }
  double height() const { return b - t; }
  double area() const { return width() * height(); }

  // Throws EmptyRegion unless finite with b > t and r > l.
  void validate() const;
};

// The spatial part of one augmentation: a crop rectangle in source-image
// pixels, the resize target, and an optional horizontal flip. Photometric
// augmentations never move coordinates and live elsewhere.
struct ViewTransform {
  Region crop;
  int out_w = 0;
  int out_h = 0;
  bool hflip = false;
};

// Square sliding window: side length and step, in view pixels.
struct WindowSpec {
  double window = 0.0;
  double stride = 0.0;
};

// A query-view window and its key-view counterpart (same source rectangle).
struct RegionPair {
  Region u_q;
  Region u_k;
};

// 1-D affine map x' = a*x + b; a < 0 encodes a flip.
struct Affine1D {
  double a = 1.0;
  double b = 0.0;

  double operator()(double x) const { return a * x + b; }
  Affine1D inverse() const { return Affine1D{1.0 / a, -b / a}; }
  // this, then `next`.
  Affine1D then(const Affine1D& next) const {
    return Affine1D{next.a * a, next.a * b + next.b};
  }
};

struct Affine2D {
  Affine1D x;
  Affine1D y;

  Point operator()(Point p) const { return Point{x(p.x), y(p.y)}; }
  Affine2D inverse() const { return Affine2D{x.inverse(), y.inverse()}; }
  Affine2D then(const Affine2D& next) const {
    return Affine2D{x.then(next.x), y.then(next.y)};
  }
  // Maps a rectangle and re-normalizes corner order (t<b, l<r).
  Region map(const Region& u) const;
};

// Source px -> view px for one transform.
Affine2D forward_map(const ViewTransform& v);

// View px -> source px; exact closed-form inverse of forward_map.
Affine2D inverse_transform(const ViewTransform& v);

Point apply_transform(Point p, const ViewTransform& v);

// Key-view coordinates of the source rectangle that u_q covers in the query
// view. Throws FlipMismatch when the two views disagree on flipping.
Region map_region(const Region& u_q, const ViewTransform& v_q, const ViewTransform& v_k);

// Intersection of the two source crops, expressed in query-view pixels.
// nullopt when the crops do not overlap with positive area.
std::optional<Region> overlap_in_query(const ViewTransform& v_q, const ViewTransform& v_k);

// All fully contained windows, anchored at the area's top-left corner,
// row-major. Empty when the window does not fit.
std::vector<Region> sliding_windows(const Region& area, const WindowSpec& spec);

// Per-axis window count: floor((extent - window) / stride) + 1, or 0 when
// the window does not fit.
int64_t window_count(double extent, const WindowSpec& spec);

// View px -> feature-map coordinates at the given downsampling rate.
Region to_feature_coords(const Region& u, double downsample_rate);

// Candidate pairs for one view pair: windows slid over the overlap in the
// query view, each mapped into the key view. Empty when the overlap is
// missing or smaller than the window.
std::vector<RegionPair> make_region_pairs(const ViewTransform& v_q, const ViewTransform& v_k,
                                          const WindowSpec& spec);

}  // namespace resim
