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

#include "resim/augment.hpp"
#include "resim/checkpoint.hpp"
#include "resim/config.hpp"
#include "resim/image.hpp"

namespace resim {

struct MetricsRow {
  int64_t step = 0;  // 1-based
  double lr = 0;
  double loss_rs = 0;
  double loss_is = 0;
  double loss_total = 0;
};

struct TrainResult {
  std::vector<MetricsRow> metrics;
  // Mean negative count per region softmax (contrastive mode) and the
  // matching uniform-softmax baseline, mean of ln(M+1).
  double mean_region_negatives = 0.0;
  double uniform_region_baseline = 0.0;
  std::string checkpoint_path;
  std::string metrics_path;
};

// Half-cosine decay over the whole run, no floor: step 0 gives base_lr,
// the midpoint gives base_lr/2.
double cosine_lr(int64_t step, int64_t total_steps, double base_lr);

std::vector<Image> make_dataset(const DataConfig& cfg);

// Views as an N x 3 x S x S tensor, values mapped from [0,1] to [-1,1].
Tensor views_to_tensor(const std::vector<const Image*>& views);

// Full pretraining run: per step, sample pairs, forward both branches,
// assemble region batches per level, combined loss, SGD with cosine
// schedule, EMA + queue bookkeeping in contrastive mode. Writes
// metrics.csv and checkpoint.resim under out_dir. Deterministic per seed.
TrainResult train(const FullConfig& cfg, const std::vector<Image>& images,
                  const std::string& out_dir);

struct RetrievalReport {
  double pos_mean_cos = 0;
  double neg_mean_cos = 0;
  double top1_acc = 0;
  double chance = 0;  // mean 1/(M+1) over trials
  int64_t trials = 0;
};

// Frozen-encoder probe: pool aligned windows for held-out view pairs and
// rank the true counterpart against every negative-grid cell in the group.
RetrievalReport eval_retrieval(Encoder& encoder, const FullConfig& cfg,
                               const std::vector<Image>& images, int num_pairs, uint64_t seed);

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows);

}  // namespace resim
