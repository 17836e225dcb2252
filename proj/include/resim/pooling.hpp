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

#include <vector>

#include "resim/geometry.hpp"
#include "resim/ops.hpp"
#include "resim/tensor.hpp"

namespace resim {

// Feature-map levels. C* are backbone stages, P* their top-down versions.
enum class Level { C3, C4, C5, P3, P4, P5 };

const char* level_name(Level level);
double level_rate(Level level);  // downsampling rate vs. the input image

// Single pooled region descriptor: one c-vector per region, matching the
// channel count of the source map.
struct PooledFeature {
  Tensor vector;         // length c
  Region source_region;  // feature-map coordinates
  Level level = Level::C4;
};

// Region on one image of a batched NCHW feature map.
struct RoiRef {
  int64_t batch = 0;
  Region region;  // feature-map coordinates
};

// Precise RoI pooling, single output bin: the exact mean of the bilinear
// extension of the map over the region. Pixel (i, j) sits at
// (x, y) = (j+0.5, i+0.5) and the extension is zero outside the padded
// border, so regions may spill past the map. Differentiable w.r.t. the map.
// The integral is evaluated cell by cell in closed form; per cell the
// bilinear patch integrates to corner-weighted first/second moments of the
// clipped bounds.
Tensor prroi_pool_rows(const Tensor& fm, const std::vector<RoiRef>& rois);

// RoI Align, single bin: mean of samples_per_axis^2 bilinear samples placed
// midpoint-style inside the region.
Tensor roi_align_rows(const Tensor& fm, const std::vector<RoiRef>& rois, int samples_per_axis);

PooledFeature prroi_pool(const Tensor& fm, const Region& u, Level level = Level::C4);
PooledFeature roi_align(const Tensor& fm, const Region& u, int samples_per_axis = 2,
                        Level level = Level::C4);

// Stride-one average pooling over the key maps; every output cell is one
// negative region feature. N x C x H x W -> N x C x (H-k+1) x (W-k+1).
Tensor negative_grid(const Tensor& fm, int kernel);

// Bilinear evaluation of one channel plane under the same pixel-center and
// zero-border convention as prroi_pool (exposed for oracles and resampling).
double bilinear_at(const double* plane, int64_t h, int64_t w, double x, double y);

}  // namespace resim
