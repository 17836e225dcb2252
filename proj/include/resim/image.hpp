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

#include <string>
#include <vector>

#include "resim/common.hpp"

namespace resim {

// Interleaved RGB, values in [0, 1].
struct Image {
  int w = 0;
  int h = 0;
  std::vector<float> rgb;

  Image() = default;
  Image(int width, int height) : w(width), h(height), rgb(static_cast<size_t>(width) * height * 3, 0.f) {}

  float at(int y, int x, int c) const { return rgb[(static_cast<size_t>(y) * w + x) * 3 + c]; }
  float& at(int y, int x, int c) { return rgb[(static_cast<size_t>(y) * w + x) * 3 + c]; }
};

// 8-bit binary PPM (P6, maxval 255). Quantization is the only loss.
Image read_ppm(const std::string& path);
void write_ppm(const Image& img, const std::string& path);

// Bilinear sample with pixel centers at (x, y) = (j+0.5, i+0.5) and
// clamp-to-edge behavior (resampling never reaches outside a crop by more
// than half a pixel, and replication avoids border darkening).
double image_bilinear(const Image& img, double x, double y, int c);

// Synthetic dataset: gradient background plus 1..k soft-edged colored
// shapes, at least one of them well inside the canvas. Image `index` is
// regenerated deterministically from (seed, index) alone.
struct SyntheticSpec {
  int count = 512;
  int canvas = 96;
  int shapes_min = 1;
  int shapes_max = 3;
  uint64_t seed = 1234;
};

Image synth_image(const SyntheticSpec& spec, int index);
std::vector<Image> synth_dataset(const SyntheticSpec& spec);

// All *.ppm files in a directory, sorted by filename.
std::vector<Image> load_ppm_dir(const std::string& dir);

}  // namespace resim
