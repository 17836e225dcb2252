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

#include "resim/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace resim {

const char* loss_mode_name(LossMode m) {
  return m == LossMode::Contrastive ? "contrastive" : "cosine";
}

void LossConfig::validate() const {
  if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
  if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
  if (mode == LossMode::Contrastive && queue_size < 1) {
    throw ConfigError("queue_size must be >= 1 in contrastive mode");
  }
  if (neg_kernel < 1) throw ConfigError("neg_kernel must be >= 1");
  if (neg_shards < 1) throw ConfigError("neg_shards must be >= 1");
  if (cap_pairs < 0) throw ConfigError("cap_pairs must be >= 0");
}

namespace {

void check_unit_rows(const Tensor& t, const char* what) {
  if (!debug_checks()) return;
  const int64_t R = t.ndim() == 2 ? t.dim(0) : 1;
  const int64_t C = t.ndim() == 2 ? t.dim(1) : t.dim(0);
  const double* p = t.data();
  for (int64_t r = 0; r < R; ++r) {
    double s = 0.0;
    for (int64_t c = 0; c < C; ++c) s += p[r * C + c] * p[r * C + c];
    if (std::fabs(std::sqrt(s) - 1.0) > 1e-6) {
      throw NonUnitNorm(std::string(what) + ": row is not unit-norm");
    }
  }
}

}  // namespace

MomentumQueue::MomentumQueue(int64_t capacity, int64_t dim)
    : capacity_(capacity), dim_(dim), buf_(static_cast<size_t>(capacity * dim), 0.0) {
  if (capacity < 1 || dim < 1) throw ConfigError("queue capacity and dim must be >= 1");
}

void MomentumQueue::enqueue(const Tensor& keys) {
  if (keys.ndim() != 2 || keys.dim(1) != dim_) {
    throw ShapeMismatch("queue: keys must be N x dim");
  }
  const int64_t n = keys.dim(0);
  const double* p = keys.data();
  for (int64_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (int64_t c = 0; c < dim_; ++c) s += p[i * dim_ + c] * p[i * dim_ + c];
    if (std::fabs(std::sqrt(s) - 1.0) > 1e-6) {
      throw NonUnitNorm("queue: key embeddings must be unit-norm");
    }
    std::copy(p + i * dim_, p + (i + 1) * dim_, buf_.begin() + cursor_ * dim_);
    cursor_ = (cursor_ + 1) % capacity_;
    size_ = std::min(size_ + 1, capacity_);
  }
}

Tensor MomentumQueue::snapshot() const {
  if (size_ == 0) throw Error("queue: snapshot of an empty queue");
  std::vector<double> v(buf_.begin(), buf_.begin() + size_ * dim_);
  return Tensor::from_vector({size_, dim_}, std::move(v));
}

double region_similarity(std::span<const double> q_vec, std::span<const double> k_vec,
                         double tau) {
  if (q_vec.size() != k_vec.size()) throw ShapeMismatch("region_similarity: length mismatch");
  if (!(tau > 0.0)) throw ConfigError("region_similarity: tau must be > 0");
  double dot = 0.0, nq = 0.0, nk = 0.0;
  for (size_t i = 0; i < q_vec.size(); ++i) {
    dot += q_vec[i] * k_vec[i];
    nq += q_vec[i] * q_vec[i];
    nk += k_vec[i] * k_vec[i];
  }
  if (debug_checks() &&
      (std::fabs(std::sqrt(nq) - 1.0) > 1e-6 || std::fabs(std::sqrt(nk) - 1.0) > 1e-6)) {
    throw NonUnitNorm("region_similarity: inputs must be unit-norm");
  }
  return dot / tau;
}

Tensor region_loss(const Tensor& q_feats, const Tensor& k_pos, const Tensor& k_neg, double tau) {
  if (!q_feats.defined() || q_feats.dim(0) == 0) throw EmptyPairs("region_loss: no region pairs");
  if (q_feats.shape() != k_pos.shape()) throw ShapeMismatch("region_loss: q/k_pos shapes differ");
  check_unit_rows(q_feats, "region_loss q");
  check_unit_rows(k_pos, "region_loss k_pos");
  Tensor logits = rowwise_dot(q_feats, k_pos);
  if (k_neg.defined() && k_neg.dim(0) > 0) {
    check_unit_rows(k_neg, "region_loss k_neg");
    logits = concat_cols(logits, pairwise_dot(q_feats, k_neg));
  }
  return softmax_cross_entropy(scalar_mul(logits, 1.0 / tau), 0);
}

Tensor image_loss(const Tensor& q_embed, const Tensor& k_embed, const MomentumQueue& queue,
                  double tau) {
  if (q_embed.shape() != k_embed.shape()) throw ShapeMismatch("image_loss: q/k shapes differ");
  check_unit_rows(q_embed, "image_loss q");
  Tensor keys = k_embed.detach();
  check_unit_rows(keys, "image_loss k");
  Tensor logits = rowwise_dot(q_embed, keys);
  if (!queue.empty()) {
    logits = concat_cols(logits, pairwise_dot(q_embed, queue.snapshot()));
  }
  return softmax_cross_entropy(scalar_mul(logits, 1.0 / tau), 0);
}

Tensor combined_loss(const Tensor& loss_rs, const Tensor& loss_is, double lambda) {
  return add(loss_rs, scalar_mul(loss_is, lambda));
}

Tensor cosine_loss(const Tensor& p_q, const Tensor& z_k, const Tensor& p_k, const Tensor& z_q) {
  if (p_q.shape() != z_k.shape() || p_k.shape() != z_q.shape()) {
    throw ShapeMismatch("cosine_loss: prediction/projection shapes differ");
  }
  Tensor c1 = mean_all(rowwise_dot(l2_normalize(p_q), l2_normalize(z_k.detach())));
  Tensor c2 = mean_all(rowwise_dot(l2_normalize(p_k), l2_normalize(z_q.detach())));
  return scalar_mul(add(c1, c2), -0.5);
}

PairRois build_pair_rois(const std::vector<ViewTransform>& v_q,
                         const std::vector<ViewTransform>& v_k, double downsample_rate,
                         const WindowSpec& spec, int64_t cap_pairs, Rng* cap_rng) {
  if (v_q.size() != v_k.size()) {
    throw ShapeMismatch("build_pair_rois: one transform pair per image required");
  }
  PairRois out;
  out.per_image.assign(v_q.size(), 0);
  for (size_t i = 0; i < v_q.size(); ++i) {
    auto pairs = make_region_pairs(v_q[i], v_k[i], spec);
    if (cap_pairs > 0 && static_cast<int64_t>(pairs.size()) > cap_pairs) {
      if (cap_rng) {
        // Partial Fisher-Yates: keep the first cap_pairs of a random order.
        for (int64_t j = 0; j < cap_pairs; ++j) {
          const int64_t pick = j + cap_rng->uniform_int(static_cast<int64_t>(pairs.size()) - j);
          std::swap(pairs[static_cast<size_t>(j)], pairs[static_cast<size_t>(pick)]);
        }
      }
      pairs.resize(static_cast<size_t>(cap_pairs));
    }
    out.per_image[i] = static_cast<int64_t>(pairs.size());
    for (const RegionPair& pr : pairs) {
      out.q.push_back(RoiRef{static_cast<int64_t>(i), to_feature_coords(pr.u_q, downsample_rate)});
      out.k.push_back(RoiRef{static_cast<int64_t>(i), to_feature_coords(pr.u_k, downsample_rate)});
    }
  }
  out.total = static_cast<int64_t>(out.q.size());
  return out;
}

std::vector<RegionBatch> assemble_region_batch(const Tensor& q_map, const Tensor& k_map,
                                               const std::vector<ViewTransform>& v_q,
                                               const std::vector<ViewTransform>& v_k,
                                               double downsample_rate, const WindowSpec& spec,
                                               const LossConfig& cfg, Rng* cap_rng) {
  if (q_map.ndim() != 4 || k_map.ndim() != 4) {
    throw ShapeMismatch("assemble_region_batch: maps must be NCHW");
  }
  const int64_t N = q_map.dim(0);
  if (static_cast<int64_t>(v_q.size()) != N || static_cast<int64_t>(v_k.size()) != N) {
    throw ShapeMismatch("assemble_region_batch: one transform pair per image required");
  }

  PairRois rois = build_pair_rois(v_q, v_k, downsample_rate, spec, cfg.cap_pairs, cap_rng);
  const std::vector<RoiRef>& q_rois = rois.q;
  const std::vector<RoiRef>& k_rois = rois.k;
  const std::vector<int64_t>& pairs_per_image = rois.per_image;
  if (q_rois.empty()) return {};

  Tensor k_const = k_map.detach();
  Tensor neg_rows_all = l2_normalize(grid_to_rows(negative_grid(k_const, cfg.neg_kernel)));
  const int64_t grid_per_image = neg_rows_all.dim(0) / N;

  const bool sharded = !cfg.negatives_sync && cfg.neg_shards > 1;
  const int64_t shards = sharded ? std::min<int64_t>(cfg.neg_shards, N) : 1;

  std::vector<RegionBatch> out;
  for (int64_t s = 0; s < shards; ++s) {
    const int64_t img_lo = s * N / shards;
    const int64_t img_hi = (s + 1) * N / shards;
    std::vector<RoiRef> q_sub, k_sub;
    for (size_t idx = 0, img_base = 0; idx < pairs_per_image.size(); ++idx) {
      const int64_t count = pairs_per_image[idx];
      if (static_cast<int64_t>(idx) >= img_lo && static_cast<int64_t>(idx) < img_hi) {
        for (int64_t j = 0; j < count; ++j) {
          q_sub.push_back(q_rois[img_base + static_cast<size_t>(j)]);
          k_sub.push_back(k_rois[img_base + static_cast<size_t>(j)]);
        }
      }
      img_base += static_cast<size_t>(count);
    }
    if (q_sub.empty()) continue;

    RegionBatch batch;
    batch.q = l2_normalize(prroi_pool_rows(q_map, q_sub));
    batch.k_pos = l2_normalize(prroi_pool_rows(k_const, k_sub));
    batch.k_neg = sharded
                      ? take_rows(neg_rows_all, img_lo * grid_per_image, img_hi * grid_per_image)
                      : neg_rows_all;
    batch.n_pairs = static_cast<int64_t>(q_sub.size());
    batch.negatives = batch.k_neg.dim(0);
    out.push_back(std::move(batch));
  }
  return out;
}

}  // namespace resim
