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

#include "resim/tensor.hpp"

namespace resim {

// All ops are pure value -> value functions on NCHW / NC / 1-D tensors and
// differentiable w.r.t. every floating input unless noted. Kernels are
// sequential, so forward values are bit-identical run to run.

// Running statistics of one batch-norm layer (state, not parameters).
struct BnStats {
  std::vector<double> running_mean;
  std::vector<double> running_var;

  explicit BnStats(int64_t channels = 0)
      : running_mean(static_cast<size_t>(channels), 0.0),
        running_var(static_cast<size_t>(channels), 1.0) {}
};

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor scalar_mul(const Tensor& x, double s);
Tensor scalar_add(const Tensor& x, double s);
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);
Tensor relu(const Tensor& x);

// Cross-correlation with zero padding; x NCHW, w OIKK, optional bias O.
Tensor conv2d(const Tensor& x, const Tensor& w, const std::optional<Tensor>& bias, int stride,
              int pad);

// Per-channel standardization. x is NCHW or NC; gamma/beta have length C.
// Train mode uses biased batch statistics and, when update_running is set,
// folds them into `stats` with the given momentum (unbiased variance).
// Eval mode normalizes with `stats`. Throws DegenerateBatch when train-mode
// statistics would be computed from fewer than 2 elements per channel.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BnStats* stats,
                  bool train, double eps = 1e-5, double momentum = 0.1,
                  bool update_running = true);

Tensor avg_pool(const Tensor& x, int kernel, int stride);
Tensor global_avg_pool(const Tensor& x);  // NCHW -> NC
Tensor nearest_upsample2x(const Tensor& x);

// x: N x in, w: out x in, optional bias out. Returns N x out.
Tensor linear(const Tensor& x, const Tensor& w, const std::optional<Tensor>& bias);

// Row-wise (dim=1 on 2-D input) or whole-vector (1-D input) normalization.
// Rows with norm < 1e-12 map to zeros and propagate zero gradient; with
// debug checks on this throws DegenerateNorm instead.
Tensor l2_normalize(const Tensor& x);

// a: n x c, b: m x c  ->  n x m matrix of row dot products (a . b^T).
Tensor pairwise_dot(const Tensor& a, const Tensor& b);

// a, b: n x c  ->  n x 1 of per-row dot products.
Tensor rowwise_dot(const Tensor& a, const Tensor& b);

Tensor concat_cols(const Tensor& a, const Tensor& b);

// Mean over rows of -log softmax(logits)[target]. logits: K or N x K with a
// shared target column. Log-sum-exp stabilized.
Tensor softmax_cross_entropy(const Tensor& logits, int64_t target_index);

// NCHW -> (N*H*W) x C; each spatial location becomes one row.
Tensor grid_to_rows(const Tensor& x);

// Same data, new shape (numel must match).
Tensor reshape(const Tensor& x, Shape shape);

// Rows [r0, r1) of a 2-D constant tensor (no gradient support: inputs must
// not require grad).
Tensor take_rows(const Tensor& x, int64_t r0, int64_t r1);

}  // namespace resim
