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

#include "resim/pooling.hpp"

#include <algorithm>
#include <cmath>

namespace resim {

const char* level_name(Level level) {
  switch (level) {
    case Level::C3: return "C3";
    case Level::C4: return "C4";
    case Level::C5: return "C5";
    case Level::P3: return "P3";
    case Level::P4: return "P4";
    case Level::P5: return "P5";
  }
  return "?";
}

double level_rate(Level level) {
  switch (level) {
    case Level::C3:
    case Level::P3: return 8.0;
    case Level::C4:
    case Level::P4: return 16.0;
    case Level::C5:
    case Level::P5: return 32.0;
  }
  return 0.0;
}

namespace {

// One integration cell between adjacent pixel centers, clipped to the
// region. Corner pixel indices may be -1 or H/W (virtual zero pixels).
struct Cell {
  int64_t row;  // top-left corner pixel row (may be -1)
  int64_t col;
  double a0, a1;  // x-axis weights: integral of (1-u) and u over the clip
  double b0, b1;  // y-axis weights
};

// Axis decomposition: cells of the knot grid (knots at half-integers)
// overlapped by [lo, hi], with the first/second moment of the local
// coordinate over the clipped span.
struct AxisSeg {
  int64_t index;  // pixel index of the cell's low corner
  double w0, w1;  // integral of (1-u) du and u du over the clipped span
};

void axis_segments(double lo, double hi, int64_t extent, std::vector<AxisSeg>& segs) {
  segs.clear();
  int64_t m_lo = static_cast<int64_t>(std::floor(lo - 0.5));
  int64_t m_hi = static_cast<int64_t>(std::ceil(hi - 0.5)) - 1;
  m_lo = std::max<int64_t>(m_lo, -1);
  m_hi = std::min<int64_t>(m_hi, extent - 1);
  for (int64_t m = m_lo; m <= m_hi; ++m) {
    const double c_lo = static_cast<double>(m) + 0.5;
    const double x0 = std::max(lo, c_lo);
    const double x1 = std::min(hi, c_lo + 1.0);
    if (x1 <= x0) continue;
    const double u0 = x0 - c_lo;
    const double u1 = x1 - c_lo;
    const double first = u1 - u0;
    const double second = 0.5 * (u1 * u1 - u0 * u0);
    segs.push_back(AxisSeg{m, first - second, second});
  }
}

void region_cells(const Region& u, int64_t h, int64_t w, std::vector<Cell>& cells) {
  u.validate();
  std::vector<AxisSeg> xs, ys;
  axis_segments(u.l, u.r, w, xs);
  axis_segments(u.t, u.b, h, ys);
  cells.clear();
  cells.reserve(xs.size() * ys.size());
  for (const AxisSeg& sy : ys) {
    for (const AxisSeg& sx : xs) {
      cells.push_back(Cell{sy.index, sx.index, sx.w0, sx.w1, sy.w0, sy.w1});
    }
  }
}

inline double pixel_or_zero(const double* plane, int64_t h, int64_t w, int64_t i, int64_t j) {
  if (i < 0 || j < 0 || i >= h || j >= w) return 0.0;
  return plane[i * w + j];
}

}  // namespace

double bilinear_at(const double* plane, int64_t h, int64_t w, double x, double y) {
  const int64_t m = static_cast<int64_t>(std::floor(x - 0.5));
  const int64_t n = static_cast<int64_t>(std::floor(y - 0.5));
  const double u = x - 0.5 - static_cast<double>(m);
  const double v = y - 0.5 - static_cast<double>(n);
  const double c00 = pixel_or_zero(plane, h, w, n, m);
  const double c01 = pixel_or_zero(plane, h, w, n, m + 1);
  const double c10 = pixel_or_zero(plane, h, w, n + 1, m);
  const double c11 = pixel_or_zero(plane, h, w, n + 1, m + 1);
  return (1.0 - v) * ((1.0 - u) * c00 + u * c01) + v * ((1.0 - u) * c10 + u * c11);
}

Tensor prroi_pool_rows(const Tensor& fm, const std::vector<RoiRef>& rois) {
  if (fm.ndim() != 4) throw ShapeMismatch("prroi_pool: feature map must be NCHW");
  const int64_t N = fm.dim(0), C = fm.dim(1), H = fm.dim(2), W = fm.dim(3);
  const int64_t R = static_cast<int64_t>(rois.size());
  if (R == 0) throw EmptyRegion("prroi_pool: no regions");

  // Cell decompositions are shared by forward and backward.
  auto all_cells = std::make_shared<std::vector<std::vector<Cell>>>(rois.size());
  std::vector<double> inv_area(rois.size());
  for (size_t i = 0; i < rois.size(); ++i) {
    const Region& u = rois[i].region;
    u.validate();
    if (rois[i].batch < 0 || rois[i].batch >= N) {
      throw ShapeMismatch("prroi_pool: roi batch index out of range");
    }
    region_cells(u, H, W, (*all_cells)[i]);
    inv_area[i] = 1.0 / u.area();
  }

  std::vector<double> out(static_cast<size_t>(R * C), 0.0);
  const double* px = fm.data();
  for (int64_t r = 0; r < R; ++r) {
    const auto& cells = (*all_cells)[static_cast<size_t>(r)];
    const int64_t n = rois[static_cast<size_t>(r)].batch;
    for (int64_t c = 0; c < C; ++c) {
      const double* plane = px + (n * C + c) * H * W;
      double acc = 0.0;
      for (const Cell& cell : cells) {
        const double c00 = pixel_or_zero(plane, H, W, cell.row, cell.col);
        const double c01 = pixel_or_zero(plane, H, W, cell.row, cell.col + 1);
        const double c10 = pixel_or_zero(plane, H, W, cell.row + 1, cell.col);
        const double c11 = pixel_or_zero(plane, H, W, cell.row + 1, cell.col + 1);
        acc += cell.b0 * (cell.a0 * c00 + cell.a1 * c01) + cell.b1 * (cell.a0 * c10 + cell.a1 * c11);
      }
      out[static_cast<size_t>(r * C + c)] = acc * inv_area[static_cast<size_t>(r)];
    }
  }

  Tensor y = detail::make_tensor({R, C}, std::move(out));
  auto fi = fm.impl();
  std::vector<int64_t> batches(rois.size());
  for (size_t i = 0; i < rois.size(); ++i) batches[i] = rois[i].batch;
  detail::attach(y, {fm}, [fi, all_cells, inv_area, batches, C, H, W, R](TensorImpl& o) {
    auto& gx = detail::ensure_grad(*fi);
    const double* go = o.grad.data();
    auto add = [&](int64_t n, int64_t c, int64_t i, int64_t j, double v) {
      if (i < 0 || j < 0 || i >= H || j >= W) return;
      gx[static_cast<size_t>(((n * C + c) * H + i) * W + j)] += v;
    };
    for (int64_t r = 0; r < R; ++r) {
      const auto& cells = (*all_cells)[static_cast<size_t>(r)];
      const int64_t n = batches[static_cast<size_t>(r)];
      const double ia = inv_area[static_cast<size_t>(r)];
      for (int64_t c = 0; c < C; ++c) {
        const double g = go[r * C + c] * ia;
        if (g == 0.0) continue;
        for (const Cell& cell : cells) {
          add(n, c, cell.row, cell.col, g * cell.a0 * cell.b0);
          add(n, c, cell.row, cell.col + 1, g * cell.a1 * cell.b0);
          add(n, c, cell.row + 1, cell.col, g * cell.a0 * cell.b1);
          add(n, c, cell.row + 1, cell.col + 1, g * cell.a1 * cell.b1);
        }
      }
    }
  });
  return y;
}

Tensor roi_align_rows(const Tensor& fm, const std::vector<RoiRef>& rois, int samples_per_axis) {
  if (fm.ndim() != 4) throw ShapeMismatch("roi_align: feature map must be NCHW");
  if (samples_per_axis < 1) throw ShapeMismatch("roi_align: samples_per_axis must be >= 1");
  const int64_t N = fm.dim(0), C = fm.dim(1), H = fm.dim(2), W = fm.dim(3);
  const int64_t R = static_cast<int64_t>(rois.size());
  if (R == 0) throw EmptyRegion("roi_align: no regions");
  for (const RoiRef& roi : rois) {
    roi.region.validate();
    if (roi.batch < 0 || roi.batch >= N) throw ShapeMismatch("roi_align: batch index out of range");
  }

  const int S = samples_per_axis;
  const double inv = 1.0 / (static_cast<double>(S) * S);
  std::vector<double> out(static_cast<size_t>(R * C), 0.0);
  const double* px = fm.data();
  for (int64_t r = 0; r < R; ++r) {
    const Region& u = rois[static_cast<size_t>(r)].region;
    const int64_t n = rois[static_cast<size_t>(r)].batch;
    const double dx = u.width() / S;
    const double dy = u.height() / S;
    for (int64_t c = 0; c < C; ++c) {
      const double* plane = px + (n * C + c) * H * W;
      double acc = 0.0;
      for (int sy = 0; sy < S; ++sy) {
        const double y = u.t + (sy + 0.5) * dy;
        for (int sx = 0; sx < S; ++sx) {
          const double x = u.l + (sx + 0.5) * dx;
          acc += bilinear_at(plane, H, W, x, y);
        }
      }
      out[static_cast<size_t>(r * C + c)] = acc * inv;
    }
  }

  Tensor y = detail::make_tensor({R, C}, std::move(out));
  auto fi = fm.impl();
  std::vector<RoiRef> saved(rois);
  detail::attach(y, {fm}, [fi, saved, C, H, W, R, S, inv](TensorImpl& o) {
    auto& gx = detail::ensure_grad(*fi);
    const double* go = o.grad.data();
    auto add = [&](int64_t n, int64_t c, int64_t i, int64_t j, double v) {
      if (i < 0 || j < 0 || i >= H || j >= W) return;
      gx[static_cast<size_t>(((n * C + c) * H + i) * W + j)] += v;
    };
    for (int64_t r = 0; r < R; ++r) {
      const Region& u = saved[static_cast<size_t>(r)].region;
      const int64_t n = saved[static_cast<size_t>(r)].batch;
      const double dx = u.width() / S;
      const double dy = u.height() / S;
      for (int64_t c = 0; c < C; ++c) {
        const double g = go[r * C + c] * inv;
        if (g == 0.0) continue;
        for (int sy = 0; sy < S; ++sy) {
          const double yy = u.t + (sy + 0.5) * dy;
          const int64_t row = static_cast<int64_t>(std::floor(yy - 0.5));
          const double v = yy - 0.5 - static_cast<double>(row);
          for (int sx = 0; sx < S; ++sx) {
            const double xx = u.l + (sx + 0.5) * dx;
            const int64_t col = static_cast<int64_t>(std::floor(xx - 0.5));
            const double uu = xx - 0.5 - static_cast<double>(col);
            add(n, c, row, col, g * (1.0 - v) * (1.0 - uu));
            add(n, c, row, col + 1, g * (1.0 - v) * uu);
            add(n, c, row + 1, col, g * v * (1.0 - uu));
            add(n, c, row + 1, col + 1, g * v * uu);
          }
        }
      }
    }
  });
  return y;
}

PooledFeature prroi_pool(const Tensor& fm, const Region& u, Level level) {
  if (fm.ndim() != 4 || fm.dim(0) != 1) throw ShapeMismatch("prroi_pool: expected a 1xCxHxW map");
  Tensor rows = prroi_pool_rows(fm, {RoiRef{0, u}});
  return PooledFeature{reshape(rows, {rows.dim(1)}), u, level};
}

PooledFeature roi_align(const Tensor& fm, const Region& u, int samples_per_axis, Level level) {
  if (fm.ndim() != 4 || fm.dim(0) != 1) throw ShapeMismatch("roi_align: expected a 1xCxHxW map");
  Tensor rows = roi_align_rows(fm, {RoiRef{0, u}}, samples_per_axis);
  return PooledFeature{reshape(rows, {rows.dim(1)}), u, level};
}

Tensor negative_grid(const Tensor& fm, int kernel) {
  if (fm.ndim() != 4) throw ShapeMismatch("negative_grid: input must be NCHW");
  if (kernel < 1) throw KernelTooLarge("negative_grid: kernel must be >= 1");
  if (kernel > fm.dim(2) || kernel > fm.dim(3)) {
    throw KernelTooLarge("negative_grid: kernel exceeds feature-map size");
  }
  return avg_pool(fm, kernel, 1);
}

}  // namespace resim
