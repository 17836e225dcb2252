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

#include "resim/image.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace resim {

Image read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string magic;
  in >> magic;
  if (magic != "P6") throw IoError(path + ": not a binary PPM (P6)");
  // Header tokens may be separated by whitespace and '#' comments.
  auto next_int = [&in, &path]() {
    int v = 0;
    while (true) {
      int ch = in.peek();
      if (ch == '#') {
        std::string line;
        std::getline(in, line);
        continue;
      }
      if (std::isspace(ch)) {
        in.get();
        continue;
      }
      if (!(in >> v)) throw IoError(path + ": malformed PPM header");
      return v;
    }
  };
  const int w = next_int();
  const int h = next_int();
  const int maxval = next_int();
  if (w <= 0 || h <= 0 || maxval != 255) throw IoError(path + ": unsupported PPM header");
  in.get();  // single whitespace before the raster
  std::vector<unsigned char> raw(static_cast<size_t>(w) * h * 3);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) throw IoError(path + ": truncated PPM raster");
  Image img(w, h);
  for (size_t i = 0; i < raw.size(); ++i) img.rgb[i] = static_cast<float>(raw[i]) / 255.0f;
  return img;
}

void write_ppm(const Image& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "P6\n" << img.w << " " << img.h << "\n255\n";
  std::vector<unsigned char> raw(img.rgb.size());
  for (size_t i = 0; i < raw.size(); ++i) {
    const float v = std::clamp(img.rgb[i], 0.0f, 1.0f);
    raw[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("failed writing " + path);
}

double image_bilinear(const Image& img, double x, double y, int c) {
  const auto clampi = [](int64_t v, int64_t hi) { return std::max<int64_t>(0, std::min(v, hi)); };
  const int64_t m = static_cast<int64_t>(std::floor(x - 0.5));
  const int64_t n = static_cast<int64_t>(std::floor(y - 0.5));
  const double u = x - 0.5 - static_cast<double>(m);
  const double v = y - 0.5 - static_cast<double>(n);
  const int64_t x0 = clampi(m, img.w - 1), x1 = clampi(m + 1, img.w - 1);
  const int64_t y0 = clampi(n, img.h - 1), y1 = clampi(n + 1, img.h - 1);
  const double c00 = img.at(static_cast<int>(y0), static_cast<int>(x0), c);
  const double c01 = img.at(static_cast<int>(y0), static_cast<int>(x1), c);
  const double c10 = img.at(static_cast<int>(y1), static_cast<int>(x0), c);
  const double c11 = img.at(static_cast<int>(y1), static_cast<int>(x1), c);
  return (1.0 - v) * ((1.0 - u) * c00 + u * c01) + v * ((1.0 - u) * c10 + u * c11);
}

namespace {

struct Shape2D {
  bool circle = true;
  double cx = 0, cy = 0;
  double rx = 0, ry = 0;  // radius / half extents
  float color[3] = {0, 0, 0};
};

// Soft coverage in [0,1]; edges fade over ~1.5 px so resampling stays tame.
double coverage(const Shape2D& s, double x, double y) {
  constexpr double kSoft = 1.5;
  if (s.circle) {
    const double dx = (x - s.cx) / s.rx;
    const double dy = (y - s.cy) / s.ry;
    const double d = (std::sqrt(dx * dx + dy * dy) - 1.0) * std::min(s.rx, s.ry);
    return std::clamp(0.5 - d / kSoft, 0.0, 1.0);
  }
  const double dx = std::fabs(x - s.cx) - s.rx;
  const double dy = std::fabs(y - s.cy) - s.ry;
  const double d = std::max(dx, dy);
  return std::clamp(0.5 - d / kSoft, 0.0, 1.0);
}

}  // namespace

Image synth_image(const SyntheticSpec& spec, int index) {
  if (spec.canvas < 8) throw ConfigError("synthetic canvas must be >= 8 px");
  if (spec.shapes_min < 1 || spec.shapes_max < spec.shapes_min) {
    throw ConfigError("invalid shapes-per-image range");
  }
  Rng rng(mix_seed(spec.seed, static_cast<uint64_t>(index)));
  const int s = spec.canvas;
  Image img(s, s);

  // Background: linear blend between two colors, random orientation.
  float bg0[3], bg1[3];
  for (int c = 0; c < 3; ++c) bg0[c] = static_cast<float>(rng.uniform(0.05, 0.6));
  for (int c = 0; c < 3; ++c) bg1[c] = static_cast<float>(rng.uniform(0.05, 0.6));
  const bool horizontal = rng.bernoulli(0.5);

  const int nshapes =
      spec.shapes_min + static_cast<int>(rng.uniform_int(spec.shapes_max - spec.shapes_min + 1));
  std::vector<Shape2D> shapes(static_cast<size_t>(nshapes));
  for (int i = 0; i < nshapes; ++i) {
    Shape2D& sh = shapes[static_cast<size_t>(i)];
    sh.circle = rng.bernoulli(0.5);
    sh.rx = rng.uniform(0.08, 0.22) * s;
    sh.ry = rng.uniform(0.08, 0.22) * s;
    if (i == 0) {
      // Keep the first shape fully inside so every image has a localized
      // object that windows can latch onto.
      sh.cx = rng.uniform(sh.rx + 2.0, s - sh.rx - 2.0);
      sh.cy = rng.uniform(sh.ry + 2.0, s - sh.ry - 2.0);
    } else {
      sh.cx = rng.uniform(0.0, s);
      sh.cy = rng.uniform(0.0, s);
    }
    for (int c = 0; c < 3; ++c) sh.color[c] = static_cast<float>(rng.uniform(0.3, 1.0));
  }

  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      const double t = horizontal ? (x + 0.5) / s : (y + 0.5) / s;
      float px[3];
      for (int c = 0; c < 3; ++c) px[c] = static_cast<float>((1.0 - t) * bg0[c] + t * bg1[c]);
      for (const Shape2D& sh : shapes) {
        const double a = coverage(sh, x + 0.5, y + 0.5);
        if (a <= 0.0) continue;
        for (int c = 0; c < 3; ++c) {
          px[c] = static_cast<float>((1.0 - a) * px[c] + a * sh.color[c]);
        }
      }
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = px[c];
    }
  }
  return img;
}

std::vector<Image> synth_dataset(const SyntheticSpec& spec) {
  std::vector<Image> out;
  out.reserve(static_cast<size_t>(spec.count));
  for (int i = 0; i < spec.count; ++i) out.push_back(synth_image(spec, i));
  return out;
}

std::vector<Image> load_ppm_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError(dir + " is not a directory");
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".ppm") {
      paths.push_back(entry.path().string());
    }
  }
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw IoError(dir + " contains no .ppm files");
  std::vector<Image> out;
  out.reserve(paths.size());
  for (const std::string& p : paths) out.push_back(read_ppm(p));
  return out;
}

}  // namespace resim
