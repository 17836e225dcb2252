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

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "resim/losses.hpp"
#include "resim/ops.hpp"
#include "resim/pooling.hpp"
#include "resim/tensor.hpp"

namespace resim {

enum class Variant { C4, FPN };
// The loss mode dictates the head layout (single projection vs. SimSiam
// projection/prediction MLPs).
using HeadMode = LossMode;

const char* variant_name(Variant v);
const char* head_mode_name(HeadMode m);

struct EncoderConfig {
  std::vector<int64_t> stage_channels{8, 16, 32, 64, 128};
  int input_size = 64;
  int64_t fpn_channels = 32;
  int64_t region_head_channels = 32;
  int64_t image_embed_dim = 32;
  Variant variant = Variant::C4;

  void validate() const;  // 5 stages, channels >= 1, input_size % 32 == 0
};

struct ParamRef {
  std::string name;
  Tensor tensor;  // shared handle; mutating it updates the layer
};
struct BufferRef {
  std::string name;
  std::vector<double>* data;  // batch-norm running statistics
};

struct Conv2dLayer {
  Tensor w;
  std::optional<Tensor> b;
  int stride = 1;
  int pad = 1;
  Tensor forward(const Tensor& x) const { return conv2d(x, w, b, stride, pad); }
};

struct BatchNormLayer {
  Tensor gamma;
  Tensor beta;
  BnStats stats;
  Tensor forward(const Tensor& x, bool train, bool update_running) {
    return batch_norm(x, gamma, beta, &stats, train, 1e-5, 0.1, update_running);
  }
};

struct LinearLayer {
  Tensor w;
  std::optional<Tensor> b;
  Tensor forward(const Tensor& x) const { return linear(x, w, b); }
};

struct BackboneMaps {
  Tensor c3, c4, c5;  // rates 8 / 16 / 32
};
struct PyramidMaps {
  Tensor p3, p4, p5;
};

// Toy convolutional encoder with named stages C1-C5, optional FPN top-down
// path, per-level region heads (two 3x3 convs, BN+ReLU between) and an
// image head over globally pooled C5. Contrastive mode uses a single
// projection layer; cosine mode uses 3-layer projection / 2-layer
// prediction MLPs plus small per-level region predictors.
class Encoder {
 public:
  Encoder(EncoderConfig cfg, HeadMode mode, Rng& rng);

  BackboneMaps forward_backbone(const Tensor& x, bool train, bool update_running = true);
  // Throws VariantMismatch unless configured as FPN.
  PyramidMaps build_fpn(const BackboneMaps& maps);
  Tensor region_head(const Tensor& fm, Level level, bool train, bool update_running = true);
  // GAP(C5) -> projection. Normalization is the caller's business.
  Tensor image_head(const Tensor& c5, bool train, bool update_running = true);
  // Cosine-mode prediction MLPs.
  Tensor image_prediction(const Tensor& z, bool train, bool update_running = true);
  Tensor region_prediction(const Tensor& feats, Level level);

  // Levels region similarity runs on: {C4} or {P3, P4}.
  const std::vector<Level>& region_levels() const { return region_levels_; }
  // Region-head output maps per active level, one backbone pass.
  std::map<Level, Tensor> forward_region_maps(const Tensor& x, bool train,
                                              bool update_running = true);

  struct ForwardOut {
    std::map<Level, Tensor> region_maps;
    Tensor image_embed;  // image-head projection, not yet normalized
  };
  // Region maps plus the image embedding from a single backbone pass.
  ForwardOut forward_all(const Tensor& x, bool train, bool update_running = true);

  const EncoderConfig& config() const { return cfg_; }
  HeadMode head_mode() const { return mode_; }

  // Declaration-order registries used by the optimizer, EMA and checkpoints.
  std::vector<ParamRef> named_params(const std::string& prefix = "");
  std::vector<BufferRef> named_buffers(const std::string& prefix = "");

  // Structural copy with requires_grad stripped (the momentum encoder).
  std::unique_ptr<Encoder> clone_detached() const;

 private:
  struct ConvBlock {
    Conv2dLayer conv;
    BatchNormLayer bn;
  };
  struct Stage {
    ConvBlock block1, block2;
  };
  struct RegionHead {
    Conv2dLayer conv1;
    BatchNormLayer bn;
    Conv2dLayer conv2;
  };
  struct MlpBlock {
    LinearLayer fc;
    std::optional<BatchNormLayer> bn;
    bool relu = false;
  };

  Encoder() = default;
  Tensor run_mlp(std::vector<MlpBlock>& mlp, const Tensor& x, bool train, bool update_running);
  RegionHead& head_for(Level level);

  EncoderConfig cfg_;
  HeadMode mode_ = HeadMode::Contrastive;
  std::vector<Level> region_levels_;

  ConvBlock stem_;
  Stage stage2_, stage3_, stage4_, stage5_;
  std::optional<Conv2dLayer> lat3_, lat4_, lat5_;
  std::map<Level, RegionHead> region_heads_;
  std::vector<MlpBlock> image_proj_;
  std::vector<MlpBlock> image_pred_;
  std::map<Level, std::pair<LinearLayer, LinearLayer>> region_pred_;
};

// Query/key pair: the key side is an EMA copy that never receives
// gradients. BN running statistics follow the same EMA rule as weights.
struct EncoderPair {
  EncoderPair(EncoderConfig cfg, HeadMode mode, double ema_momentum, uint64_t seed);

  double ema_momentum;
  std::unique_ptr<Encoder> query;
  std::unique_ptr<Encoder> key;
};

// theta_k <- m * theta_k + (1-m) * theta_q for every parameter and BN stat.
void momentum_update(EncoderPair& pair);

}  // namespace resim
