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

#include "resim/augment.hpp"

#include <algorithm>
#include <cmath>

namespace resim {

void AugmentConfig::validate() const {
  if (!(scale_lo > 0.0 && scale_lo <= scale_hi && scale_hi <= 1.0)) {
    throw ConfigError("scale_range must satisfy 0 < lo <= hi <= 1");
  }
  if (!(aspect_lo > 0.0 && aspect_lo <= aspect_hi)) {
    throw ConfigError("aspect_range must satisfy 0 < lo <= hi");
  }
  if (flip_prob < 0.0 || flip_prob > 1.0) throw ConfigError("flip_prob must lie in [0,1]");
  if (grayscale_prob < 0.0 || grayscale_prob > 1.0) {
    throw ConfigError("grayscale_prob must lie in [0,1]");
  }
}

ViewTransform sample_rrc(int src_w, int src_h, const AugmentConfig& cfg, int out_size, Rng& rng) {
  const double area = static_cast<double>(src_w) * src_h;
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double target = rng.uniform(cfg.scale_lo, cfg.scale_hi) * area;
    const double ratio = std::exp(rng.uniform(std::log(cfg.aspect_lo), std::log(cfg.aspect_hi)));
    const double w = std::sqrt(target * ratio);
    const double h = std::sqrt(target / ratio);
    if (w <= src_w && h <= src_h) {
      const double l = rng.uniform(0.0, src_w - w);
      const double t = rng.uniform(0.0, src_h - h);
      return ViewTransform{Region{t, l, t + h, l + w}, out_size, out_size, false};
    }
  }
  // Fallback: largest centered square.
  const double side = std::min(src_w, src_h);
  const double l = (src_w - side) / 2.0;
  const double t = (src_h - side) / 2.0;
  return ViewTransform{Region{t, l, t + side, l + side}, out_size, out_size, false};
}

Image resample_view(const Image& src, const ViewTransform& vt) {
  Image out(vt.out_w, vt.out_h);
  const Affine2D to_src = inverse_transform(vt);
  for (int i = 0; i < vt.out_h; ++i) {
    for (int j = 0; j < vt.out_w; ++j) {
      const Point p = to_src(Point{j + 0.5, i + 0.5});
      for (int c = 0; c < 3; ++c) {
        out.at(i, j, c) = static_cast<float>(image_bilinear(src, p.x, p.y, c));
      }
    }
  }
  return out;
}

namespace {

void photometric(Image& img, const AugmentConfig& cfg, Rng& rng) {
  if (cfg.color_jitter) {
    const float brightness = static_cast<float>(rng.uniform(0.6, 1.4));
    const float contrast = static_cast<float>(rng.uniform(0.6, 1.4));
    double mean = 0.0;
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x)
        mean += 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
    mean /= static_cast<double>(img.w) * img.h;
    const float m = static_cast<float>(mean);
    for (float& v : img.rgb) v = (v * brightness - m) * contrast + m;
  }
  if (rng.bernoulli(cfg.grayscale_prob)) {
    for (int y = 0; y < img.h; ++y) {
      for (int x = 0; x < img.w; ++x) {
        const float g =
            0.299f * img.at(y, x, 0) + 0.587f * img.at(y, x, 1) + 0.114f * img.at(y, x, 2);
        img.at(y, x, 0) = img.at(y, x, 1) = img.at(y, x, 2) = g;
      }
    }
  }
  for (float& v : img.rgb) v = std::clamp(v, 0.0f, 1.0f);
}

}  // namespace

ViewPair sample_view_pair(const Image& src, const AugmentConfig& cfg, int out_size, Rng& rng) {
  cfg.validate();
  if (src.w < 2 || src.h < 2) throw ConfigError("source image too small to augment");

  ViewTransform vq = sample_rrc(src.w, src.h, cfg, out_size, rng);
  ViewTransform vk = sample_rrc(src.w, src.h, cfg, out_size, rng);
  const bool flip = rng.bernoulli(cfg.flip_prob);
  vq.hflip = flip;
  vk.hflip = flip;

  ViewPair pair;
  pair.q = ViewSample{resample_view(src, vq), vq};
  pair.k = ViewSample{resample_view(src, vk), vk};
  photometric(pair.q.pixels, cfg, rng);
  photometric(pair.k.pixels, cfg, rng);
  return pair;
}

}  // namespace resim
