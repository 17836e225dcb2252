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

#include "resim/encoder.hpp"

#include <algorithm>
#include <cmath>

namespace resim {

const char* variant_name(Variant v) { return v == Variant::C4 ? "C4" : "FPN"; }
const char* head_mode_name(HeadMode m) { return loss_mode_name(m); }

void EncoderConfig::validate() const {
  if (stage_channels.size() != 5) throw ConfigError("stage_channels must have 5 entries");
  for (int64_t c : stage_channels) {
    if (c < 1) throw ConfigError("stage channels must be >= 1");
  }
  if (fpn_channels < 1 || region_head_channels < 1 || image_embed_dim < 1) {
    throw ConfigError("channel counts must be >= 1");
  }
  if (input_size <= 0 || input_size % 32 != 0) {
    throw ConfigError("input_size must be a positive multiple of 32");
  }
}

namespace {

// Kaiming-uniform (fan-in, ReLU gain): U(-sqrt(6/fan_in), sqrt(6/fan_in)).
Tensor kaiming_uniform(Shape shape, int64_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::vector<double> v(static_cast<size_t>(shape_numel(shape)));
  for (double& x : v) x = rng.uniform(-bound, bound);
  return Tensor::from_vector(std::move(shape), std::move(v), true);
}

Conv2dLayer make_conv(int64_t in, int64_t out, int k, int stride, int pad, bool bias, Rng& rng) {
  Conv2dLayer layer;
  layer.w = kaiming_uniform({out, in, k, k}, in * k * k, rng);
  if (bias) layer.b = Tensor::zeros({out}, true);
  layer.stride = stride;
  layer.pad = pad;
  return layer;
}

BatchNormLayer make_bn(int64_t channels, bool affine, Rng&) {
  BatchNormLayer layer;
  layer.gamma = Tensor::full({channels}, 1.0, affine);
  layer.beta = Tensor::zeros({channels}, affine);
  layer.stats = BnStats(channels);
  return layer;
}

LinearLayer make_linear(int64_t in, int64_t out, bool bias, Rng& rng) {
  LinearLayer layer;
  layer.w = kaiming_uniform({out, in}, in, rng);
  if (bias) layer.b = Tensor::zeros({out}, true);
  return layer;
}

}  // namespace

Encoder::Encoder(EncoderConfig cfg, HeadMode mode, Rng& rng) : cfg_(std::move(cfg)), mode_(mode) {
  cfg_.validate();
  const auto& ch = cfg_.stage_channels;

  stem_ = ConvBlock{make_conv(3, ch[0], 3, 2, 1, false, rng), make_bn(ch[0], true, rng)};
  auto make_stage = [&](int64_t in, int64_t out) {
    return Stage{ConvBlock{make_conv(in, out, 3, 1, 1, false, rng), make_bn(out, true, rng)},
                 ConvBlock{make_conv(out, out, 3, 1, 1, false, rng), make_bn(out, true, rng)}};
  };
  stage2_ = make_stage(ch[0], ch[1]);
  stage3_ = make_stage(ch[1], ch[2]);
  stage4_ = make_stage(ch[2], ch[3]);
  stage5_ = make_stage(ch[3], ch[4]);

  if (cfg_.variant == Variant::FPN) {
    lat3_ = make_conv(ch[2], cfg_.fpn_channels, 1, 1, 0, true, rng);
    lat4_ = make_conv(ch[3], cfg_.fpn_channels, 1, 1, 0, true, rng);
    lat5_ = make_conv(ch[4], cfg_.fpn_channels, 1, 1, 0, true, rng);
    region_levels_ = {Level::P3, Level::P4};
  } else {
    region_levels_ = {Level::C4};
  }

  const int64_t rh = cfg_.region_head_channels;
  for (Level level : region_levels_) {
    const int64_t in = cfg_.variant == Variant::FPN ? cfg_.fpn_channels : ch[3];
    region_heads_.emplace(level, RegionHead{make_conv(in, rh, 3, 1, 1, false, rng),
                                            make_bn(rh, true, rng),
                                            make_conv(rh, rh, 3, 1, 1, true, rng)});
  }

  const int64_t d = cfg_.image_embed_dim;
  if (mode_ == HeadMode::Contrastive) {
    image_proj_.push_back(MlpBlock{make_linear(ch[4], d, true, rng), std::nullopt, false});
  } else {
    // SimSiam-style heads: 3-layer projection (final BN without affine),
    // 2-layer prediction with a d/4 bottleneck.
    image_proj_.push_back(MlpBlock{make_linear(ch[4], d, false, rng), make_bn(d, true, rng), true});
    image_proj_.push_back(MlpBlock{make_linear(d, d, false, rng), make_bn(d, true, rng), true});
    image_proj_.push_back(MlpBlock{make_linear(d, d, false, rng), make_bn(d, false, rng), false});
    const int64_t hidden = std::max<int64_t>(1, d / 4);
    image_pred_.push_back(MlpBlock{make_linear(d, hidden, false, rng), make_bn(hidden, true, rng), true});
    image_pred_.push_back(MlpBlock{make_linear(hidden, d, true, rng), std::nullopt, false});
    for (Level level : region_levels_) {
      const int64_t rh_hidden = std::max<int64_t>(1, rh / 4);
      region_pred_.emplace(level, std::make_pair(make_linear(rh, rh_hidden, true, rng),
                                                 make_linear(rh_hidden, rh, true, rng)));
    }
  }
}

BackboneMaps Encoder::forward_backbone(const Tensor& x, bool train, bool update_running) {
  if (x.ndim() != 4 || x.dim(1) != 3) throw ShapeMismatch("backbone: input must be Nx3xHxW");
  if (x.dim(2) != cfg_.input_size || x.dim(3) != cfg_.input_size) {
    throw ShapeMismatch("backbone: input spatial size must equal config input_size");
  }
  auto block = [&](ConvBlock& b, const Tensor& in) {
    return relu(b.bn.forward(b.conv.forward(in), train, update_running));
  };
  auto stage = [&](Stage& s, const Tensor& in) { return block(s.block2, block(s.block1, in)); };

  Tensor h = block(stem_, x);          // rate 2
  h = avg_pool(h, 2, 2);               // rate 4
  Tensor c2 = stage(stage2_, h);       // rate 4
  Tensor c3 = stage(stage3_, avg_pool(c2, 2, 2));  // rate 8
  Tensor c4 = stage(stage4_, avg_pool(c3, 2, 2));  // rate 16
  Tensor c5 = stage(stage5_, avg_pool(c4, 2, 2));  // rate 32
  return BackboneMaps{c3, c4, c5};
}

PyramidMaps Encoder::build_fpn(const BackboneMaps& maps) {
  if (cfg_.variant != Variant::FPN) {
    throw VariantMismatch("build_fpn: encoder configured without FPN");
  }
  Tensor p5 = lat5_->forward(maps.c5);
  Tensor p4 = add(lat4_->forward(maps.c4), nearest_upsample2x(p5));
  Tensor p3 = add(lat3_->forward(maps.c3), nearest_upsample2x(p4));
  return PyramidMaps{p3, p4, p5};
}

Encoder::RegionHead& Encoder::head_for(Level level) {
  auto it = region_heads_.find(level);
  if (it == region_heads_.end()) {
    throw VariantMismatch(std::string("region head not built for level ") + level_name(level));
  }
  return it->second;
}

Tensor Encoder::region_head(const Tensor& fm, Level level, bool train, bool update_running) {
  RegionHead& head = head_for(level);
  Tensor h = relu(head.bn.forward(head.conv1.forward(fm), train, update_running));
  return head.conv2.forward(h);
}

Tensor Encoder::run_mlp(std::vector<MlpBlock>& mlp, const Tensor& x, bool train,
                        bool update_running) {
  Tensor h = x;
  for (MlpBlock& block : mlp) {
    h = block.fc.forward(h);
    if (block.bn) h = block.bn->forward(h, train, update_running);
    if (block.relu) h = relu(h);
  }
  return h;
}

Tensor Encoder::image_head(const Tensor& c5, bool train, bool update_running) {
  return run_mlp(image_proj_, global_avg_pool(c5), train, update_running);
}

Tensor Encoder::image_prediction(const Tensor& z, bool train, bool update_running) {
  if (mode_ != HeadMode::Cosine) throw VariantMismatch("image_prediction: cosine mode only");
  return run_mlp(image_pred_, z, train, update_running);
}

Tensor Encoder::region_prediction(const Tensor& feats, Level level) {
  if (mode_ != HeadMode::Cosine) throw VariantMismatch("region_prediction: cosine mode only");
  auto it = region_pred_.find(level);
  if (it == region_pred_.end()) {
    throw VariantMismatch(std::string("region predictor not built for level ") + level_name(level));
  }
  return it->second.second.forward(relu(it->second.first.forward(feats)));
}

std::map<Level, Tensor> Encoder::forward_region_maps(const Tensor& x, bool train,
                                                     bool update_running) {
  return forward_all(x, train, update_running).region_maps;
}

Encoder::ForwardOut Encoder::forward_all(const Tensor& x, bool train, bool update_running) {
  BackboneMaps maps = forward_backbone(x, train, update_running);
  ForwardOut out;
  if (cfg_.variant == Variant::FPN) {
    PyramidMaps pyr = build_fpn(maps);
    out.region_maps.emplace(Level::P3, region_head(pyr.p3, Level::P3, train, update_running));
    out.region_maps.emplace(Level::P4, region_head(pyr.p4, Level::P4, train, update_running));
  } else {
    out.region_maps.emplace(Level::C4, region_head(maps.c4, Level::C4, train, update_running));
  }
  out.image_embed = image_head(maps.c5, train, update_running);
  return out;
}

std::vector<ParamRef> Encoder::named_params(const std::string& prefix) {
  std::vector<ParamRef> out;
  auto add = [&](const std::string& name, const Tensor& t) {
    out.push_back(ParamRef{prefix + name, t});
  };
  auto add_conv = [&](const std::string& name, Conv2dLayer& c) {
    add(name + ".w", c.w);
    if (c.b) add(name + ".b", *c.b);
  };
  auto add_bn = [&](const std::string& name, BatchNormLayer& bn) {
    if (bn.gamma.requires_grad()) {
      add(name + ".gamma", bn.gamma);
      add(name + ".beta", bn.beta);
    }
  };
  auto add_block = [&](const std::string& name, ConvBlock& b) {
    add_conv(name + ".conv", b.conv);
    add_bn(name + ".bn", b.bn);
  };
  auto add_stage = [&](const std::string& name, Stage& s) {
    add_block(name + ".1", s.block1);
    add_block(name + ".2", s.block2);
  };
  auto add_linear = [&](const std::string& name, LinearLayer& l) {
    add(name + ".w", l.w);
    if (l.b) add(name + ".b", *l.b);
  };
  auto add_mlp = [&](const std::string& name, std::vector<MlpBlock>& mlp) {
    for (size_t i = 0; i < mlp.size(); ++i) {
      add_linear(name + "." + std::to_string(i) + ".fc", mlp[i].fc);
      if (mlp[i].bn) add_bn(name + "." + std::to_string(i) + ".bn", *mlp[i].bn);
    }
  };

  add_block("stem", stem_);
  add_stage("stage2", stage2_);
  add_stage("stage3", stage3_);
  add_stage("stage4", stage4_);
  add_stage("stage5", stage5_);
  if (lat3_) {
    add_conv("fpn.lat3", *lat3_);
    add_conv("fpn.lat4", *lat4_);
    add_conv("fpn.lat5", *lat5_);
  }
  for (auto& [level, head] : region_heads_) {
    const std::string name = std::string("head.") + level_name(level);
    add_conv(name + ".conv1", head.conv1);
    add_bn(name + ".bn", head.bn);
    add_conv(name + ".conv2", head.conv2);
  }
  add_mlp("image_proj", image_proj_);
  add_mlp("image_pred", image_pred_);
  for (auto& [level, pred] : region_pred_) {
    const std::string name = std::string("region_pred.") + level_name(level);
    add_linear(name + ".fc1", pred.first);
    add_linear(name + ".fc2", pred.second);
  }
  return out;
}

std::vector<BufferRef> Encoder::named_buffers(const std::string& prefix) {
  std::vector<BufferRef> out;
  auto add_bn = [&](const std::string& name, BatchNormLayer& bn) {
    out.push_back(BufferRef{prefix + name + ".running_mean", &bn.stats.running_mean});
    out.push_back(BufferRef{prefix + name + ".running_var", &bn.stats.running_var});
  };
  add_bn("stem.bn", stem_.bn);
  auto add_stage = [&](const std::string& name, Stage& s) {
    add_bn(name + ".1.bn", s.block1.bn);
    add_bn(name + ".2.bn", s.block2.bn);
  };
  add_stage("stage2", stage2_);
  add_stage("stage3", stage3_);
  add_stage("stage4", stage4_);
  add_stage("stage5", stage5_);
  for (auto& [level, head] : region_heads_) {
    add_bn(std::string("head.") + level_name(level) + ".bn", head.bn);
  }
  for (size_t i = 0; i < image_proj_.size(); ++i) {
    if (image_proj_[i].bn) add_bn("image_proj." + std::to_string(i) + ".bn", *image_proj_[i].bn);
  }
  for (size_t i = 0; i < image_pred_.size(); ++i) {
    if (image_pred_[i].bn) add_bn("image_pred." + std::to_string(i) + ".bn", *image_pred_[i].bn);
  }
  return out;
}

std::unique_ptr<Encoder> Encoder::clone_detached() const {
  // Re-run construction with a throwaway RNG to get identical structure,
  // then overwrite every tensor with a detached copy of ours.
  Rng rng(0);
  auto clone = std::unique_ptr<Encoder>(new Encoder(cfg_, mode_, rng));
  auto* self = const_cast<Encoder*>(this);
  auto src_params = self->named_params();
  auto dst_params = clone->named_params();
  for (size_t i = 0; i < src_params.size(); ++i) {
    Tensor copy = src_params[i].tensor.detach();
    *dst_params[i].tensor.impl() = *copy.impl();  // keep handles, swap contents
    dst_params[i].tensor.impl()->requires_grad = false;
  }
  auto src_bufs = self->named_buffers();
  auto dst_bufs = clone->named_buffers();
  for (size_t i = 0; i < src_bufs.size(); ++i) *dst_bufs[i].data = *src_bufs[i].data;
  // Non-affine BN constants in the clone should not require grad either.
  return clone;
}

EncoderPair::EncoderPair(EncoderConfig cfg, HeadMode mode, double ema_m, uint64_t seed)
    : ema_momentum(ema_m) {
  if (!(ema_m > 0.0 && ema_m < 1.0)) throw ConfigError("ema momentum must lie in (0,1)");
  Rng rng(seed);
  query = std::make_unique<Encoder>(cfg, mode, rng);
  key = query->clone_detached();
}

void momentum_update(EncoderPair& pair) {
  const double m = pair.ema_momentum;
  auto qp = pair.query->named_params();
  auto kp = pair.key->named_params();
  if (qp.size() != kp.size()) throw ShapeMismatch("momentum_update: parameter sets differ");
  for (size_t i = 0; i < qp.size(); ++i) {
    if (qp[i].tensor.shape() != kp[i].tensor.shape()) {
      throw ShapeMismatch("momentum_update: shape mismatch at " + qp[i].name);
    }
    const double* q = qp[i].tensor.data();
    double* k = kp[i].tensor.mutable_data();
    const int64_t n = qp[i].tensor.numel();
    for (int64_t j = 0; j < n; ++j) k[j] = m * k[j] + (1.0 - m) * q[j];
  }
  auto qb = pair.query->named_buffers();
  auto kb = pair.key->named_buffers();
  for (size_t i = 0; i < qb.size(); ++i) {
    auto& q = *qb[i].data;
    auto& k = *kb[i].data;
    for (size_t j = 0; j < q.size(); ++j) k[j] = m * k[j] + (1.0 - m) * q[j];
  }
}

}  // namespace resim
