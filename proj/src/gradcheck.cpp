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

#include "resim/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "resim/config.hpp"
#include "resim/encoder.hpp"
#include "resim/losses.hpp"
#include "resim/pooling.hpp"

namespace resim {

double finite_diff_max_err(const std::function<Tensor()>& loss_fn,
                           const std::vector<Tensor>& leaves, int samples_per_tensor, double h,
                           Rng& rng) {
  for (const Tensor& leaf : leaves) const_cast<Tensor&>(leaf).zero_grad();

  Tensor loss = loss_fn();
  backward(loss);
  std::vector<std::vector<double>> analytic;
  analytic.reserve(leaves.size());
  for (const Tensor& leaf : leaves) {
    analytic.push_back(leaf.has_grad() ? leaf.grad()
                                       : std::vector<double>(static_cast<size_t>(leaf.numel()), 0.0));
  }

  double max_err = 0.0;
  for (size_t li = 0; li < leaves.size(); ++li) {
    Tensor leaf = leaves[li];
    const int64_t n = leaf.numel();
    std::vector<int64_t> coords(static_cast<size_t>(n));
    std::iota(coords.begin(), coords.end(), 0);
    int64_t take = n;
    if (samples_per_tensor > 0 && samples_per_tensor < n) {
      take = samples_per_tensor;
      for (int64_t i = 0; i < take; ++i) {
        const int64_t pick = i + rng.uniform_int(n - i);
        std::swap(coords[static_cast<size_t>(i)], coords[static_cast<size_t>(pick)]);
      }
    }
    double* data = leaf.mutable_data();
    for (int64_t i = 0; i < take; ++i) {
      const int64_t idx = coords[static_cast<size_t>(i)];
      const double orig = data[idx];
      data[idx] = orig + h;
      const double f_plus = loss_fn().item();
      data[idx] = orig - h;
      const double f_minus = loss_fn().item();
      data[idx] = orig;
      const double numeric = (f_plus - f_minus) / (2.0 * h);
      const double a = analytic[li][static_cast<size_t>(idx)];
      const double rel =
          std::fabs(a - numeric) / std::max({1.0, std::fabs(a), std::fabs(numeric)});
      max_err = std::max(max_err, rel);
    }
  }
  for (const Tensor& leaf : leaves) const_cast<Tensor&>(leaf).zero_grad();
  return max_err;
}

namespace {

constexpr double kH = 1e-5;
constexpr double kOpTol = 1e-5;
constexpr double kEndToEndTol = 1e-4;

Tensor rand_tensor(Shape shape, Rng& rng, double lo, double hi, bool requires_grad) {
  std::vector<double> v(static_cast<size_t>(shape_numel(shape)));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor::from_vector(std::move(shape), std::move(v), requires_grad);
}

// Values bounded away from 0 so ReLU kinks stay h-far from the probes.
Tensor rand_signed(Shape shape, Rng& rng, bool requires_grad) {
  std::vector<double> v(static_cast<size_t>(shape_numel(shape)));
  for (double& x : v) {
    const double m = rng.uniform(0.1, 1.0);
    x = rng.bernoulli(0.5) ? m : -m;
  }
  return Tensor::from_vector(std::move(shape), std::move(v), requires_grad);
}

Tensor rand_unit_rows(int64_t n, int64_t c, Rng& rng) {
  std::vector<double> v(static_cast<size_t>(n * c));
  for (int64_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (int64_t j = 0; j < c; ++j) {
      v[static_cast<size_t>(i * c + j)] = rng.normal();
      s += v[static_cast<size_t>(i * c + j)] * v[static_cast<size_t>(i * c + j)];
    }
    const double inv = 1.0 / std::sqrt(s);
    for (int64_t j = 0; j < c; ++j) v[static_cast<size_t>(i * c + j)] *= inv;
  }
  return Tensor::from_vector({n, c}, std::move(v), false);
}

// Scalarize with a fixed random projection so no gradient entry can hide.
Tensor project(const Tensor& out, const Tensor& proj) { return sum_all(mul(out, proj)); }

struct Check {
  std::string name;
  double tol;
  std::function<double(Rng&)> run;
};

std::vector<Check> tensor_checks() {
  std::vector<Check> checks;
  auto simple = [](const char* name, auto make_fn) {
    return Check{name, kOpTol, [make_fn](Rng& rng) {
                   auto [fn, leaves] = make_fn(rng);
                   return finite_diff_max_err(fn, leaves, 0, kH, rng);
                 }};
  };

  checks.push_back(simple("add", [](Rng& rng) {
    Tensor a = rand_tensor({3, 4}, rng, -1, 1, true);
    Tensor b = rand_tensor({3, 4}, rng, -1, 1, true);
    Tensor p = rand_tensor({3, 4}, rng, -1, 1, false);
    auto fn = [=]() { return project(add(a, b), p); };
    return std::make_pair(std::function<Tensor()>(fn), std::vector<Tensor>{a, b});
  }));
  checks.push_back(simple("sub", [](Rng& rng) {
    Tensor a = rand_tensor({3, 4}, rng, -1, 1, true);
    Tensor b = rand_tensor({3, 4}, rng, -1, 1, true);
    Tensor p = rand_tensor({3, 4}, rng, -1, 1, false);
    auto fn = [=]() { return project(sub(a, b), p); };
    return std::make_pair(std::function<Tensor()>(fn), std::vector<Tensor>{a, b});
  }));
  checks.push_back(simple("mul", [](Rng& rng) {
    Tensor a = rand_tensor({3, 4}, rng, -1, 1, true);
    Tensor b = rand_tensor({3, 4}, rng, -1, 1, true);
    Tensor p = rand_tensor({3, 4}, rng, -1, 1, false);
    auto fn = [=]() { return project(mul(a, b), p); };
    return std::make_pair(std::function<Tensor()>(fn), std::vector<Tensor>{a, b});
  }));
  checks.push_back(simple("scalar_mul_add", [](Rng& rng) {
    Tensor a = rand_tensor({5}, rng, -1, 1, true);
    Tensor p = rand_tensor({5}, rng, -1, 1, false);
    auto fn = [=]() { return project(scalar_add(scalar_mul(a, 1.7), -0.3), p); };
    return std::make_pair(std::function<Tensor()>(fn), std::vector<Tensor>{a});
  }));
  checks.push_back(simple("relu", [](Rng& rng) {
    Tensor x = rand_signed({4, 5}, rng, true);
    Tensor p = rand_tensor({4, 5}, rng, -1, 1, false);
    auto fn = [=]() { return project(relu(x), p); };
    return std::make_pair(std::function<Tensor()>(fn), std::vector<Tensor>{x});
  }));
  checks.push_back(simple("conv2d", [](Rng& rng) {
    Tensor x = rand_tensor({2, 3, 6, 6}, rng, -1, 1, true);
    Tensor w = rand_tensor({4, 3, 3, 3}, rng, -1, 1, true);
    Tensor b = rand_tensor({4}, rng, -1, 1, true);
    Tensor p = rand_tensor({2, 4, 3, 3}, rng, -1, 1, false);
    auto fn = [=]() { return project(conv2d(x, w, b, 2, 1), p); };
    return std::make_pair(std::function<Tensor()>(fn), std::vector<Tensor>{x, w, b});
  }));
  checks.push_back(Check{"batch_norm_train", kOpTol, [](Rng& rng) {
    Tensor x = rand_tensor({4, 3, 4, 4}, rng, -1, 1, true);
    Tensor g = rand_tensor({3}, rng, 0.5, 1.5, true);
    Tensor b = rand_tensor({3}, rng, -0.5, 0.5, true);
    Tensor p = rand_tensor({4, 3, 4, 4}, rng, -1, 1, false);
    auto stats = std::make_shared<BnStats>(3);
    auto fn = [=]() {
      return project(batch_norm(x, g, b, stats.get(), true, 1e-5, 0.1, false), p);
    };
    return finite_diff_max_err(fn, {x, g, b}, 0, kH, rng);
  }});
  checks.push_back(Check{"batch_norm_eval", kOpTol, [](Rng& rng) {
    Tensor x = rand_tensor({4, 3, 4, 4}, rng, -1, 1, true);
    Tensor g = rand_tensor({3}, rng, 0.5, 1.5, true);
    Tensor b = rand_tensor({3}, rng, -0.5, 0.5, true);
    Tensor p = rand_tensor({4, 3, 4, 4}, rng, -1, 1, false);
    auto stats = std::make_shared<BnStats>(3);
    for (int c = 0; c < 3; ++c) {
      stats->running_mean[static_cast<size_t>(c)] = rng.uniform(-0.2, 0.2);
      stats->running_var[static_cast<size_t>(c)] = rng.uniform(0.5, 1.5);
    }
    auto fn = [=]() { return project(batch_norm(x, g, b, stats.get(), false), p); };
    return finite_diff_max_err(fn, {x, g, b}, 0, kH, rng);
  }});
  checks.push_back(simple("avg_pool", [](Rng& rng) {
    Tensor x = rand_tensor({2, 2, 6, 6}, rng, -1, 1, true);
    Tensor p = rand_tensor({2, 2, 3, 3}, rng, -1, 1, false);
    auto fn = [=]() { return project(avg_pool(x, 2, 2), p); };
    return std::make_pair(std::function<Tensor()>(fn), std::vector<Tensor>{x});
  }));
  checks.push_back(simple("global_avg_pool", [](Rng& rng) {
    Tensor x = rand_tensor({2, 3, 4, 4}, rng, -1, 1, true);
    Tensor p = rand_tensor({2, 3}, rng, -1, 1, false);
    auto fn = [=]() { return project(global_avg_pool(x), p); };
    return std::make_pair(std::function<Tensor()>(fn), std::vector<Tensor>{x});
  }));
  checks.push_back(simple("nearest_upsample2x", [](Rng& rng) {
    Tensor x = rand_tensor({2, 2, 3, 3}, rng, -1, 1, true);
    Tensor p = rand_tensor({2, 2, 6, 6}, rng, -1, 1, false);
    auto fn = [=]() { return project(nearest_upsample2x(x), p); };
    return std::make_pair(std::function<Tensor()>(fn), std::vector<Tensor>{x});
  }));
  checks.push_back(simple("linear", [](Rng& rng) {
    Tensor x = rand_tensor({3, 5}, rng, -1, 1, true);
    Tensor w = rand_tensor({4, 5}, rng, -1, 1, true);
    Tensor b = rand_tensor({4}, rng, -1, 1, true);
    Tensor p = rand_tensor({3, 4}, rng, -1, 1, false);
    auto fn = [=]() { return project(linear(x, w, b), p); };
    return std::make_pair(std::function<Tensor()>(fn), std::vector<Tensor>{x, w, b});
  }));
  checks.push_back(simple("l2_normalize", [](Rng& rng) {
    Tensor x = rand_signed({3, 6}, rng, true);
    Tensor p = rand_tensor({3, 6}, rng, -1, 1, false);
    auto fn = [=]() { return project(l2_normalize(x), p); };
    return std::make_pair(std::function<Tensor()>(fn), std::vector<Tensor>{x});
  }));
  checks.push_back(simple("pairwise_dot", [](Rng& rng) {
    Tensor a = rand_tensor({3, 4}, rng, -1, 1, true);
    Tensor b = rand_tensor({5, 4}, rng, -1, 1, true);
    Tensor p = rand_tensor({3, 5}, rng, -1, 1, false);
    auto fn = [=]() { return project(pairwise_dot(a, b), p); };
    return std::make_pair(std::function<Tensor()>(fn), std::vector<Tensor>{a, b});
  }));
  checks.push_back(simple("rowwise_dot", [](Rng& rng) {
    Tensor a = rand_tensor({4, 3}, rng, -1, 1, true);
    Tensor b = rand_tensor({4, 3}, rng, -1, 1, true);
    Tensor p = rand_tensor({4, 1}, rng, -1, 1, false);
    auto fn = [=]() { return project(rowwise_dot(a, b), p); };
    return std::make_pair(std::function<Tensor()>(fn), std::vector<Tensor>{a, b});
  }));
  checks.push_back(simple("concat_cols", [](Rng& rng) {
    Tensor a = rand_tensor({3, 2}, rng, -1, 1, true);
    Tensor b = rand_tensor({3, 4}, rng, -1, 1, true);
    Tensor p = rand_tensor({3, 6}, rng, -1, 1, false);
    auto fn = [=]() { return project(concat_cols(a, b), p); };
    return std::make_pair(std::function<Tensor()>(fn), std::vector<Tensor>{a, b});
  }));
  checks.push_back(simple("softmax_cross_entropy", [](Rng& rng) {
    Tensor logits = rand_tensor({4, 7}, rng, -2, 2, true);
    auto fn = [=]() { return softmax_cross_entropy(logits, 2); };
    return std::make_pair(std::function<Tensor()>(fn), std::vector<Tensor>{logits});
  }));
  checks.push_back(simple("reshape_grid_to_rows", [](Rng& rng) {
    Tensor x = rand_tensor({2, 3, 2, 2}, rng, -1, 1, true);
    Tensor p = rand_tensor({8, 3}, rng, -1, 1, false);
    auto fn = [=]() { return project(grid_to_rows(reshape(x, {2, 3, 2, 2})), p); };
    return std::make_pair(std::function<Tensor()>(fn), std::vector<Tensor>{x});
  }));
  checks.push_back(simple("mean_all", [](Rng& rng) {
    Tensor x = rand_tensor({3, 3}, rng, -1, 1, true);
    auto fn = [=]() { return mean_all(x); };
    return std::make_pair(std::function<Tensor()>(fn), std::vector<Tensor>{x});
  }));
  return checks;
}

std::vector<Check> pooling_checks() {
  std::vector<Check> checks;
  checks.push_back(Check{"prroi_pool", kOpTol, [](Rng& rng) {
    Tensor fm = rand_tensor({2, 3, 6, 6}, rng, -1, 1, true);
    std::vector<RoiRef> rois;
    for (int i = 0; i < 6; ++i) {
      const double t = rng.uniform(-1.0, 4.0), l = rng.uniform(-1.0, 4.0);
      rois.push_back(RoiRef{i % 2, Region{t, l, t + rng.uniform(0.5, 3.0), l + rng.uniform(0.5, 3.0)}});
    }
    Tensor p = rand_tensor({6, 3}, rng, -1, 1, false);
    auto fn = [=]() { return project(prroi_pool_rows(fm, rois), p); };
    return finite_diff_max_err(fn, {fm}, 0, kH, rng);
  }});
  checks.push_back(Check{"roi_align", kOpTol, [](Rng& rng) {
    Tensor fm = rand_tensor({2, 3, 6, 6}, rng, -1, 1, true);
    std::vector<RoiRef> rois;
    for (int i = 0; i < 6; ++i) {
      const double t = rng.uniform(0.0, 3.0), l = rng.uniform(0.0, 3.0);
      rois.push_back(RoiRef{i % 2, Region{t, l, t + rng.uniform(0.5, 2.5), l + rng.uniform(0.5, 2.5)}});
    }
    Tensor p = rand_tensor({6, 3}, rng, -1, 1, false);
    auto fn = [=]() { return project(roi_align_rows(fm, rois, 3), p); };
    return finite_diff_max_err(fn, {fm}, 0, kH, rng);
  }});
  checks.push_back(Check{"negative_grid", kOpTol, [](Rng& rng) {
    Tensor fm = rand_tensor({2, 2, 5, 5}, rng, -1, 1, true);
    Tensor p = rand_tensor({2, 2, 3, 3}, rng, -1, 1, false);
    auto fn = [=]() { return project(negative_grid(fm, 3), p); };
    return finite_diff_max_err(fn, {fm}, 0, kH, rng);
  }});
  return checks;
}

std::vector<Check> encoder_checks() {
  std::vector<Check> checks;
  checks.push_back(Check{"region_head", kOpTol, [](Rng& rng) {
    EncoderConfig cfg;
    cfg.stage_channels = {2, 3, 4, 5, 6};
    cfg.input_size = 64;
    cfg.region_head_channels = 4;
    cfg.image_embed_dim = 4;
    Rng init(11);
    auto enc = std::make_shared<Encoder>(cfg, HeadMode::Contrastive, init);
    Tensor fm = rand_tensor({2, 5, 4, 4}, rng, -1, 1, true);
    Tensor p = rand_tensor({2, 4, 4, 4}, rng, -1, 1, false);
    auto fn = [=]() { return project(enc->region_head(fm, Level::C4, true, false), p); };
    std::vector<Tensor> leaves{fm};
    for (auto& pr : enc->named_params()) {
      if (pr.name.rfind("head.", 0) == 0) leaves.push_back(pr.tensor);
    }
    return finite_diff_max_err(fn, leaves, 0, kH, rng);
  }});
  checks.push_back(Check{"image_head", kOpTol, [](Rng& rng) {
    EncoderConfig cfg;
    cfg.stage_channels = {2, 3, 4, 5, 6};
    cfg.input_size = 64;
    cfg.image_embed_dim = 4;
    Rng init(12);
    auto enc = std::make_shared<Encoder>(cfg, HeadMode::Contrastive, init);
    Tensor c5 = rand_tensor({3, 6, 2, 2}, rng, -1, 1, true);
    Tensor p = rand_tensor({3, 4}, rng, -1, 1, false);
    auto fn = [=]() { return project(enc->image_head(c5, true, false), p); };
    std::vector<Tensor> leaves{c5};
    for (auto& pr : enc->named_params()) {
      if (pr.name.rfind("image_proj", 0) == 0) leaves.push_back(pr.tensor);
    }
    return finite_diff_max_err(fn, leaves, 0, kH, rng);
  }});
  checks.push_back(Check{"fpn_top_down", kOpTol, [](Rng& rng) {
    EncoderConfig cfg;
    cfg.stage_channels = {2, 3, 4, 5, 6};
    cfg.input_size = 64;
    cfg.fpn_channels = 4;
    cfg.region_head_channels = 4;
    cfg.image_embed_dim = 4;
    cfg.variant = Variant::FPN;
    Rng init(13);
    auto enc = std::make_shared<Encoder>(cfg, HeadMode::Contrastive, init);
    Tensor c3 = rand_tensor({1, 4, 8, 8}, rng, -1, 1, true);
    Tensor c4 = rand_tensor({1, 5, 4, 4}, rng, -1, 1, true);
    Tensor c5 = rand_tensor({1, 6, 2, 2}, rng, -1, 1, true);
    Tensor p = rand_tensor({1, 4, 8, 8}, rng, -1, 1, false);
    auto fn = [=]() { return project(enc->build_fpn(BackboneMaps{c3, c4, c5}).p3, p); };
    std::vector<Tensor> leaves{c3, c4, c5};
    for (auto& pr : enc->named_params()) {
      if (pr.name.rfind("fpn.", 0) == 0) leaves.push_back(pr.tensor);
    }
    return finite_diff_max_err(fn, leaves, 0, kH, rng);
  }});
  return checks;
}

std::vector<Check> losses_checks() {
  std::vector<Check> checks;
  checks.push_back(Check{"region_loss", kOpTol, [](Rng& rng) {
    Tensor q_raw = rand_signed({4, 6}, rng, true);
    Tensor k_pos = rand_unit_rows(4, 6, rng);
    Tensor k_neg = rand_unit_rows(9, 6, rng);
    auto fn = [=]() { return region_loss(l2_normalize(q_raw), k_pos, k_neg, 0.2); };
    return finite_diff_max_err(fn, {q_raw}, 0, kH, rng);
  }});
  checks.push_back(Check{"image_loss", kOpTol, [](Rng& rng) {
    Tensor q_raw = rand_signed({3, 8}, rng, true);
    Tensor k = rand_unit_rows(3, 8, rng);
    auto queue = std::make_shared<MomentumQueue>(16, 8);
    queue->enqueue(rand_unit_rows(10, 8, rng));
    auto fn = [=]() { return image_loss(l2_normalize(q_raw), k, *queue, 0.2); };
    return finite_diff_max_err(fn, {q_raw}, 0, kH, rng);
  }});
  checks.push_back(Check{"cosine_loss", kOpTol, [](Rng& rng) {
    // FD probes the prediction side only; the projection side sits behind
    // stop-gradient by definition.
    Tensor p_q = rand_signed({4, 6}, rng, true);
    Tensor p_k = rand_signed({4, 6}, rng, true);
    Tensor z_q = rand_unit_rows(4, 6, rng);
    Tensor z_k = rand_unit_rows(4, 6, rng);
    auto fn = [=]() { return cosine_loss(p_q, z_k, p_k, z_q); };
    return finite_diff_max_err(fn, {p_q, p_k}, 0, kH, rng);
  }});
  checks.push_back(Check{"combined_loss", kOpTol, [](Rng& rng) {
    Tensor a = rand_tensor({1}, rng, 0.1, 1.0, true);
    Tensor b = rand_tensor({1}, rng, 0.1, 1.0, true);
    auto fn = [=]() { return combined_loss(a, b, 0.7); };
    return finite_diff_max_err(fn, {a, b}, 0, kH, rng);
  }});
  return checks;
}

// Full contrastive pipeline on a 2-image batch; gradients of every query
// parameter against finite differences of the combined loss.
Check end_to_end_check(Variant variant, int samples_per_tensor) {
  const std::string name =
      std::string("end_to_end_") + (variant == Variant::C4 ? "c4" : "fpn");
  return Check{name, kEndToEndTol, [variant, samples_per_tensor](Rng& rng) {
    EncoderConfig cfg;
    cfg.stage_channels = {4, 6, 8, 12, 16};
    cfg.input_size = 64;
    cfg.fpn_channels = 8;
    cfg.region_head_channels = 8;
    cfg.image_embed_dim = 8;
    cfg.variant = variant;
    LossConfig lcfg;
    auto pair = std::make_shared<EncoderPair>(cfg, HeadMode::Contrastive, 0.999, 21);

    Tensor x_q = rand_tensor({2, 3, 64, 64}, rng, 0.0, 1.0, false);
    Tensor x_k = rand_tensor({2, 3, 64, 64}, rng, 0.0, 1.0, false);
    auto v_q = std::make_shared<std::vector<ViewTransform>>();
    auto v_k = std::make_shared<std::vector<ViewTransform>>();
    for (int i = 0; i < 2; ++i) {
      v_q->push_back(ViewTransform{Region{0, 0, 96, 96}, 64, 64, false});
      v_k->push_back(ViewTransform{Region{32, 32, 128, 128}, 64, 64, false});
    }
    auto queue = std::make_shared<MomentumQueue>(16, cfg.image_embed_dim);
    queue->enqueue(rand_unit_rows(6, cfg.image_embed_dim, rng));

    auto fn = [=]() {
      auto q_out = pair->query->forward_all(x_q, true, false);
      std::map<Level, Tensor> k_maps;
      Tensor k_embed;
      {
        NoGradGuard ng;
        auto k_out = pair->key->forward_all(x_k, true, false);
        k_maps = std::move(k_out.region_maps);
        k_embed = k_out.image_embed;
      }
      Tensor loss_rs;
      int levels = 0;
      for (Level level : pair->query->region_levels()) {
        auto spec = default_window_spec(level, cfg.input_size);
        auto batches = assemble_region_batch(q_out.region_maps.at(level), k_maps.at(level), *v_q,
                                             *v_k, level_rate(level), spec, lcfg, nullptr);
        for (auto& b : batches) {
          Tensor l = region_loss(b.q, b.k_pos, b.k_neg, lcfg.tau);
          loss_rs = loss_rs.defined() ? add(loss_rs, l) : l;
          ++levels;
        }
      }
      loss_rs = scalar_mul(loss_rs, 1.0 / levels);
      Tensor loss_is =
          image_loss(l2_normalize(q_out.image_embed), l2_normalize(k_embed), *queue, lcfg.tau);
      return combined_loss(loss_rs, loss_is, lcfg.lambda);
    };

    std::vector<Tensor> leaves;
    for (auto& p : pair->query->named_params()) leaves.push_back(p.tensor);
    return finite_diff_max_err(fn, leaves, samples_per_tensor, kH, rng);
  }};
}

}  // namespace

std::vector<GradCheckResult> run_gradient_checks(const std::string& module) {
  std::vector<Check> checks;
  auto append = [&checks](std::vector<Check> more) {
    for (auto& c : more) checks.push_back(std::move(c));
  };
  if (module == "all" || module == "tensor") append(tensor_checks());
  if (module == "all" || module == "pooling") append(pooling_checks());
  if (module == "all" || module == "encoder") append(encoder_checks());
  if (module == "all" || module == "losses") append(losses_checks());
  if (module == "all") {
    checks.push_back(end_to_end_check(Variant::C4, 20));
    checks.push_back(end_to_end_check(Variant::FPN, 10));
  }
  if (checks.empty()) {
    throw ConfigError("unknown gradient-check module '" + module +
                      "' (expected all|tensor|pooling|encoder|losses)");
  }

  std::vector<GradCheckResult> results;
  Rng rng(20260810);
  for (Check& c : checks) {
    GradCheckResult r;
    r.name = c.name;
    r.tolerance = c.tol;
    r.max_rel_err = c.run(rng);
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace resim
