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

#include "resim/geometry.hpp"
#include "resim/image.hpp"

namespace resim {

struct AugmentConfig {
  double scale_lo = 0.2;
  double scale_hi = 1.0;
  double aspect_lo = 3.0 / 4.0;
  double aspect_hi = 4.0 / 3.0;
  double flip_prob = 0.5;  // one decision shared by both views
  bool color_jitter = true;
  double grayscale_prob = 0.2;

  void validate() const;
};

struct ViewSample {
  Image pixels;
  ViewTransform transform;
};

struct ViewPair {
  ViewSample q;
  ViewSample k;
};

// Random resized crop: continuous crop rectangle with area fraction in
// scale_range and log-uniform aspect ratio; falls back to the largest
// centered square after 10 rejected draws.
ViewTransform sample_rrc(int src_w, int src_h, const AugmentConfig& cfg, int out_size, Rng& rng);

// Bilinear warp of the source through the transform's inverse map.
Image resample_view(const Image& src, const ViewTransform& vt);

// Two independent crops resized to out_size with a shared flip decision;
// photometric jitter (brightness, contrast, optional grayscale) is applied
// independently per view and never moves coordinates.
ViewPair sample_view_pair(const Image& src, const AugmentConfig& cfg, int out_size, Rng& rng);

}  // namespace resim
