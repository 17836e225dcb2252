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

#include <span>
#include <vector>

#include "resim/pooling.hpp"

namespace resim {

enum class LossMode { Contrastive, Cosine };
const char* loss_mode_name(LossMode m);

struct LossConfig {
  double tau = 0.2;
  double lambda = 1.0;
  LossMode mode = LossMode::Contrastive;
  int64_t queue_size = 4096;   // paper scale: 65,536
  bool negatives_sync = true;  // one shard by default
  int neg_shards = 1;
  int64_t cap_pairs = 0;  // 0 = use every valid window pair
  int neg_kernel = 3;

  void validate() const;
};

// FIFO ring of past key embeddings (image-level negatives). Vectors must be
// unit-norm; the current batch is enqueued only after its loss.
class MomentumQueue {
 public:
  MomentumQueue(int64_t capacity, int64_t dim);

  void enqueue(const Tensor& keys);  // N x d rows
  int64_t size() const { return size_; }
  int64_t capacity() const { return capacity_; }
  int64_t dim() const { return dim_; }
  bool empty() const { return size_ == 0; }
  // Constant size x d tensor of the stored negatives.
  Tensor snapshot() const;

 private:
  int64_t capacity_;
  int64_t dim_;
  int64_t size_ = 0;
  int64_t cursor_ = 0;
  std::vector<double> buf_;
};

// Similarity logit (q . k) / tau on unit vectors; exp() is deferred to the
// softmax. Debug checks reject non-unit inputs.
double region_similarity(std::span<const double> q_vec, std::span<const double> k_vec, double tau);

// InfoNCE over aligned region pairs: positives on the diagonal of
// (q, k_pos), negatives the grid rows in k_neg (which densely covers the
// key views, so no extra same-view positive terms are added). All inputs
// unit-norm; k-side inputs are constants. Throws EmptyPairs when n = 0.
Tensor region_loss(const Tensor& q_feats, const Tensor& k_pos, const Tensor& k_neg, double tau);

// Image-level InfoNCE against the momentum queue. Keys are detached; the
// queue is read, never written (the caller enqueues after the loss).
Tensor image_loss(const Tensor& q_embed, const Tensor& k_embed, const MomentumQueue& queue,
                  double tau);

// L = L_rs + lambda * L_is.
Tensor combined_loss(const Tensor& loss_rs, const Tensor& loss_is, double lambda);

// Symmetric negative-cosine objective with stop-gradient on the projection
// branches: -mean(cos(p_q, sg(z_k)))/2 - mean(cos(p_k, sg(z_q)))/2.
Tensor cosine_loss(const Tensor& p_q, const Tensor& z_k, const Tensor& p_k, const Tensor& z_q);

// One region-contrastive batch for a level (or one negative shard of it).
struct RegionBatch {
  Tensor q;      // n x c, unit rows, on the tape
  Tensor k_pos;  // n x c, unit rows, constant
  Tensor k_neg;  // M x c, unit rows, constant
  int64_t n_pairs = 0;
  int64_t negatives = 0;
};

// Aligned window pairs for a whole batch, as pooling-ready rois in
// feature-map coordinates. cap_pairs > 0 subsamples windows per image
// (random with cap_rng, else the leading ones).
struct PairRois {
  std::vector<RoiRef> q;
  std::vector<RoiRef> k;
  std::vector<int64_t> per_image;
  int64_t total = 0;
};
PairRois build_pair_rois(const std::vector<ViewTransform>& v_q,
                         const std::vector<ViewTransform>& v_k, double downsample_rate,
                         const WindowSpec& spec, int64_t cap_pairs, Rng* cap_rng);

// Builds the pooled, normalized features for one level from the two view
// batches: query windows pooled from q_map, their mapped counterparts from
// a detached k_map, and the stride-1 average-pool grid over all key maps as
// negatives (the positive's own cell stays in). Returns one batch per
// negative shard (a single batch unless negatives_sync is off); empty when
// no view pair produced a window.
std::vector<RegionBatch> assemble_region_batch(const Tensor& q_map, const Tensor& k_map,
                                               const std::vector<ViewTransform>& v_q,
                                               const std::vector<ViewTransform>& v_k,
                                               double downsample_rate, const WindowSpec& spec,
                                               const LossConfig& cfg, Rng* cap_rng);

}  // namespace resim
