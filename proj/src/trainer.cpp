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

#include "resim/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

namespace resim {

namespace {

constexpr double kMocoMomentum = 0.999;

struct SgdOptimizer {
  double momentum;
  double weight_decay;
  std::vector<std::vector<double>> velocity;

  explicit SgdOptimizer(const std::vector<ParamRef>& params, double mom, double wd)
      : momentum(mom), weight_decay(wd) {
    velocity.reserve(params.size());
    for (const ParamRef& p : params) {
      velocity.emplace_back(static_cast<size_t>(p.tensor.numel()), 0.0);
    }
  }

  // v <- momentum*v + g + wd*theta; theta <- theta - lr*v. Parameters that
  // received no gradient this step are skipped.
  void step(std::vector<ParamRef>& params, double lr) {
    for (size_t i = 0; i < params.size(); ++i) {
      Tensor& t = params[i].tensor;
      if (!t.has_grad()) continue;
      const auto& g = t.grad();
      double* theta = t.mutable_data();
      auto& v = velocity[i];
      for (size_t j = 0; j < v.size(); ++j) {
        v[j] = momentum * v[j] + g[j] + weight_decay * theta[j];
        theta[j] -= lr * v[j];
      }
      t.zero_grad();
    }
  }
};

std::string metrics_line(const MetricsRow& r) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%lld,%.6f,%.6f,%.6f,%.6f", static_cast<long long>(r.step),
                r.lr, r.loss_rs, r.loss_is, r.loss_total);
  return buf;
}

Tensor zero_scalar() { return Tensor::zeros({1}); }

}  // namespace

double cosine_lr(int64_t step, int64_t total_steps, double base_lr) {
  const double t = static_cast<double>(step) / static_cast<double>(total_steps);
  return 0.5 * (1.0 + std::cos(3.14159265358979323846 * t)) * base_lr;
}

std::vector<Image> make_dataset(const DataConfig& cfg) {
  if (cfg.data == "synthetic") {
    return synth_dataset(SyntheticSpec{cfg.data_count, cfg.data_canvas, cfg.shapes_min,
                                       cfg.shapes_max, cfg.data_seed});
  }
  return load_ppm_dir(cfg.data);
}

Tensor views_to_tensor(const std::vector<const Image*>& views) {
  const int64_t n = static_cast<int64_t>(views.size());
  const int64_t h = views[0]->h, w = views[0]->w;
  std::vector<double> data(static_cast<size_t>(n * 3 * h * w));
  for (int64_t i = 0; i < n; ++i) {
    const Image& img = *views[static_cast<size_t>(i)];
    for (int64_t c = 0; c < 3; ++c) {
      double* dst = data.data() + ((i * 3 + c) * h) * w;
      for (int64_t y = 0; y < h; ++y) {
        for (int64_t x = 0; x < w; ++x) {
          dst[y * w + x] =
              (static_cast<double>(img.at(static_cast<int>(y), static_cast<int>(x),
                                          static_cast<int>(c))) -
               0.5) *
              2.0;
        }
      }
    }
  }
  return Tensor::from_vector({n, 3, h, w}, std::move(data));
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "step,lr,loss_rs,loss_is,loss_total\n";
  for (const MetricsRow& r : rows) out << metrics_line(r) << "\n";
  if (!out) throw IoError("failed writing " + path);
}

TrainResult train(const FullConfig& cfg, const std::vector<Image>& images,
                  const std::string& out_dir) {
  cfg.validate();
  const int batch = cfg.train.batch_size;
  if (static_cast<int>(images.size()) < batch) {
    throw ConfigError("dataset smaller than one batch");
  }
  std::filesystem::create_directories(out_dir);

  const bool contrastive = cfg.loss.mode == LossMode::Contrastive;
  EncoderPair pair(cfg.encoder, cfg.loss.mode, kMocoMomentum, cfg.train.seed);
  Encoder& query = *pair.query;
  Encoder& key = *pair.key;

  MomentumQueue queue(contrastive ? cfg.loss.queue_size : 1, cfg.encoder.image_embed_dim);
  auto params = query.named_params();
  SgdOptimizer opt(params, cfg.train.momentum, cfg.train.weight_decay);

  Rng rng(mix_seed(cfg.train.seed, 0x7261696eull));
  const int64_t steps_per_epoch = static_cast<int64_t>(images.size()) / batch;
  if (steps_per_epoch < 1) throw ConfigError("dataset smaller than one batch");
  const int64_t total_steps = steps_per_epoch * cfg.train.epochs;
  const double base_lr = cfg.train.lr * static_cast<double>(batch) / 256.0;

  TrainResult result;
  result.metrics.reserve(static_cast<size_t>(total_steps));
  result.metrics_path = out_dir + "/metrics.csv";
  result.checkpoint_path = out_dir + "/checkpoint.resim";
  std::ofstream csv(result.metrics_path);
  if (!csv) throw IoError("cannot write " + result.metrics_path);
  csv << "step,lr,loss_rs,loss_is,loss_total\n";

  double neg_sum = 0.0, baseline_sum = 0.0;
  int64_t neg_events = 0;

  std::vector<int64_t> order(images.size());
  std::iota(order.begin(), order.end(), 0);

  int64_t step = 0;
  for (int epoch = 0; epoch < cfg.train.epochs; ++epoch) {
    for (int64_t i = static_cast<int64_t>(order.size()) - 1; i > 0; --i) {
      std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(rng.uniform_int(i + 1))]);
    }
    for (int64_t sb = 0; sb < steps_per_epoch; ++sb) {
      // Sample the batch of view pairs.
      std::vector<ViewPair> views;
      std::vector<ViewTransform> v_q, v_k;
      std::vector<const Image*> q_imgs, k_imgs;
      std::vector<int64_t> batch_ids;
      views.reserve(static_cast<size_t>(batch));
      for (int b = 0; b < batch; ++b) {
        const int64_t id = order[static_cast<size_t>(sb * batch + b)];
        batch_ids.push_back(id);
        views.push_back(sample_view_pair(images[static_cast<size_t>(id)], cfg.augment,
                                         cfg.encoder.input_size, rng));
        v_q.push_back(views.back().q.transform);
        v_k.push_back(views.back().k.transform);
      }
      for (const ViewPair& vp : views) {
        q_imgs.push_back(&vp.q.pixels);
        k_imgs.push_back(&vp.k.pixels);
      }
      Tensor x_q = views_to_tensor(q_imgs);
      Tensor x_k = views_to_tensor(k_imgs);
      const double lr_t = cosine_lr(step, total_steps, base_lr);

      Tensor loss_rs, loss_is, total;
      if (contrastive) {
        momentum_update(pair);
        auto q_out = query.forward_all(x_q, true);
        std::map<Level, Tensor> k_maps;
        Tensor k_embed;
        {
          NoGradGuard ng;
          auto k_out = key.forward_all(x_k, true, /*update_running=*/false);
          k_maps = std::move(k_out.region_maps);
          k_embed = k_out.image_embed;
        }

        std::vector<Tensor> level_losses;
        for (Level level : query.region_levels()) {
          auto batches =
              assemble_region_batch(q_out.region_maps.at(level), k_maps.at(level), v_q, v_k,
                                    level_rate(level), window_spec_for(cfg, level), cfg.loss, &rng);
          if (batches.empty()) continue;
          int64_t level_pairs = 0;
          for (const RegionBatch& b : batches) level_pairs += b.n_pairs;
          Tensor level_loss;
          for (const RegionBatch& b : batches) {
            Tensor term = scalar_mul(region_loss(b.q, b.k_pos, b.k_neg, cfg.loss.tau),
                                     static_cast<double>(b.n_pairs) / level_pairs);
            level_loss = level_loss.defined() ? add(level_loss, term) : term;
            neg_sum += static_cast<double>(b.negatives);
            baseline_sum += std::log(static_cast<double>(b.negatives) + 1.0);
            ++neg_events;
          }
          level_losses.push_back(level_loss);
        }
        if (level_losses.empty()) {
          loss_rs = zero_scalar();
        } else {
          for (const Tensor& l : level_losses) {
            loss_rs = loss_rs.defined() ? add(loss_rs, l) : l;
          }
          loss_rs = scalar_mul(loss_rs, 1.0 / static_cast<double>(level_losses.size()));
        }

        Tensor q_embed = l2_normalize(q_out.image_embed);
        Tensor k_embed_n = l2_normalize(k_embed);
        loss_is = image_loss(q_embed, k_embed_n, queue, cfg.loss.tau);
        total = combined_loss(loss_rs, loss_is, cfg.loss.lambda);
        queue.enqueue(k_embed_n.detach());  // after the loss

        if (!std::isfinite(total.item())) {
          std::ostringstream os;
          os << "non-finite loss at step " << step + 1 << " (lr " << lr_t << "); batch images:";
          for (int64_t id : batch_ids) os << " " << id;
          throw NonFiniteLoss(os.str());
        }
        backward(total);
        opt.step(params, lr_t);
      } else {
        // Cosine mode: both views through the query encoder, stop-gradient
        // on the projection branches, no EMA and no queue.
        auto q_out = query.forward_all(x_q, true);
        auto k_out = query.forward_all(x_k, true);

        std::vector<Tensor> level_losses;
        for (Level level : query.region_levels()) {
          PairRois rois = build_pair_rois(v_q, v_k, level_rate(level),
                                          window_spec_for(cfg, level), cfg.loss.cap_pairs, &rng);
          if (rois.total == 0) continue;
          Tensor z_q = prroi_pool_rows(q_out.region_maps.at(level), rois.q);
          Tensor z_k = prroi_pool_rows(k_out.region_maps.at(level), rois.k);
          Tensor p_q = query.region_prediction(z_q, level);
          Tensor p_k = query.region_prediction(z_k, level);
          level_losses.push_back(cosine_loss(p_q, z_k, p_k, z_q));
        }
        if (level_losses.empty()) {
          loss_rs = zero_scalar();
        } else {
          for (const Tensor& l : level_losses) {
            loss_rs = loss_rs.defined() ? add(loss_rs, l) : l;
          }
          loss_rs = scalar_mul(loss_rs, 1.0 / static_cast<double>(level_losses.size()));
        }

        Tensor p_qi = query.image_prediction(q_out.image_embed, true);
        Tensor p_ki = query.image_prediction(k_out.image_embed, true);
        loss_is = cosine_loss(p_qi, k_out.image_embed, p_ki, q_out.image_embed);
        total = combined_loss(loss_rs, loss_is, cfg.loss.lambda);

        if (!std::isfinite(total.item())) {
          std::ostringstream os;
          os << "non-finite loss at step " << step + 1 << " (lr " << lr_t << "); batch images:";
          for (int64_t id : batch_ids) os << " " << id;
          throw NonFiniteLoss(os.str());
        }
        backward(total);
        opt.step(params, lr_t);
      }

      MetricsRow row{step + 1, lr_t, loss_rs.item(), loss_is.item(), total.item()};
      result.metrics.push_back(row);
      csv << metrics_line(row) << "\n";
      ++step;
    }
  }
  csv.close();
  if (neg_events > 0) {
    result.mean_region_negatives = neg_sum / static_cast<double>(neg_events);
    result.uniform_region_baseline = baseline_sum / static_cast<double>(neg_events);
  }
  save_checkpoint(result.checkpoint_path, pair);
  return result;
}

RetrievalReport eval_retrieval(Encoder& encoder, const FullConfig& cfg,
                               const std::vector<Image>& images, int num_pairs, uint64_t seed) {
  if (images.empty()) throw ConfigError("eval_retrieval: empty dataset");
  Rng rng(mix_seed(seed, 0x6576616cull));
  RetrievalReport report;
  double pos_sum = 0.0, neg_sum = 0.0, chance_sum = 0.0;
  int64_t hits = 0;

  int done = 0;
  while (done < num_pairs) {
    const int group = std::min(8, num_pairs - done);
    std::vector<ViewTransform> v_q, v_k;
    std::vector<const Image*> q_imgs, k_imgs;
    std::vector<ViewPair> views;
    for (int i = 0; i < group; ++i) {
      const int64_t id = rng.uniform_int(static_cast<int64_t>(images.size()));
      views.push_back(sample_view_pair(images[static_cast<size_t>(id)], cfg.augment,
                                       cfg.encoder.input_size, rng));
      v_q.push_back(views.back().q.transform);
      v_k.push_back(views.back().k.transform);
    }
    for (const ViewPair& vp : views) {
      q_imgs.push_back(&vp.q.pixels);
      k_imgs.push_back(&vp.k.pixels);
    }

    NoGradGuard ng;
    Tensor x_q = views_to_tensor(q_imgs);
    Tensor x_k = views_to_tensor(k_imgs);
    auto q_maps = encoder.forward_region_maps(x_q, /*train=*/false);
    auto k_maps = encoder.forward_region_maps(x_k, /*train=*/false);

    for (Level level : encoder.region_levels()) {
      PairRois rois = build_pair_rois(v_q, v_k, level_rate(level), window_spec_for(cfg, level),
                                      /*cap_pairs=*/0, nullptr);
      if (rois.total == 0) continue;
      Tensor q_rows = l2_normalize(prroi_pool_rows(q_maps.at(level), rois.q));
      Tensor k_rows = l2_normalize(prroi_pool_rows(k_maps.at(level), rois.k));
      Tensor negs =
          l2_normalize(grid_to_rows(negative_grid(k_maps.at(level), cfg.loss.neg_kernel)));
      const int64_t M = negs.dim(0);
      const int64_t C = q_rows.dim(1);
      for (int64_t i = 0; i < rois.total; ++i) {
        const double* q = q_rows.data() + i * C;
        const double* kp = k_rows.data() + i * C;
        double pos = 0.0;
        for (int64_t c = 0; c < C; ++c) pos += q[c] * kp[c];
        double best_neg = -2.0, mean_neg = 0.0;
        for (int64_t j = 0; j < M; ++j) {
          const double* nv = negs.data() + j * C;
          double d = 0.0;
          for (int64_t c = 0; c < C; ++c) d += q[c] * nv[c];
          best_neg = std::max(best_neg, d);
          mean_neg += d;
        }
        mean_neg /= static_cast<double>(M);
        pos_sum += pos;
        neg_sum += mean_neg;
        chance_sum += 1.0 / static_cast<double>(M + 1);
        if (pos > best_neg) ++hits;
        ++report.trials;
      }
    }
    done += group;
  }

  if (report.trials > 0) {
    report.pos_mean_cos = pos_sum / static_cast<double>(report.trials);
    report.neg_mean_cos = neg_sum / static_cast<double>(report.trials);
    report.top1_acc = static_cast<double>(hits) / static_cast<double>(report.trials);
    report.chance = chance_sum / static_cast<double>(report.trials);
  }
  return report;
}

}  // namespace resim
