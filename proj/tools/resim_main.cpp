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

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "resim/gradcheck.hpp"
#include "resim/trainer.hpp"

namespace {

resim::Region parse_region(const std::string& text) {
  double v[4];
  if (std::sscanf(text.c_str(), "%lf,%lf,%lf,%lf", &v[0], &v[1], &v[2], &v[3]) != 4) {
    throw resim::ConfigError("--region expects t,l,b,r");
  }
  return resim::Region{v[0], v[1], v[2], v[3]};
}

// PPM as a 1x3xHxW map with values in [0,1].
resim::Tensor load_map(const std::string& path) {
  resim::Image img = resim::read_ppm(path);
  std::vector<double> data(static_cast<size_t>(3) * img.h * img.w);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x)
        data[(static_cast<size_t>(c) * img.h + y) * img.w + x] = img.at(y, x, c);
  return resim::Tensor::from_vector({1, 3, img.h, img.w}, std::move(data));
}

int cmd_pretrain(const std::string& config_path, const std::string& out_dir) {
  resim::FullConfig cfg = resim::load_config_file(config_path);
  std::vector<resim::Image> images = resim::make_dataset(cfg.data);
  resim::TrainResult result = resim::train(cfg, images, out_dir);
  const auto& last = result.metrics.back();
  std::printf("steps=%lld final_loss=%.6f loss_rs=%.6f loss_is=%.6f\n",
              static_cast<long long>(last.step), last.loss_total, last.loss_rs, last.loss_is);
  std::printf("checkpoint=%s metrics=%s\n", result.checkpoint_path.c_str(),
              result.metrics_path.c_str());
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data, int pairs, uint64_t seed,
             int count) {
  auto pair = resim::load_checkpoint(ckpt_path);
  resim::FullConfig cfg;
  cfg.encoder = pair->query->config();
  cfg.loss.mode = pair->query->head_mode();
  cfg.data.data = data;
  cfg.data.data_count = count;
  cfg.data.data_seed = seed ^ 0x5eedull;
  std::vector<resim::Image> images = resim::make_dataset(cfg.data);
  resim::RetrievalReport r = resim::eval_retrieval(*pair->query, cfg, images, pairs, seed);
  std::printf("trials=%lld top1_acc=%.4f chance=%.4f pos_mean_cos=%.4f neg_mean_cos=%.4f\n",
              static_cast<long long>(r.trials), r.top1_acc, r.chance, r.pos_mean_cos,
              r.neg_mean_cos);
  return 0;
}

int cmd_check_gradients(const std::string& module) {
  resim::set_debug_checks(false);  // FD perturbs values; norms drift by h
  auto results = resim::run_gradient_checks(module);
  bool ok = true;
  for (const auto& r : results) {
    std::printf("%-24s max_rel_err=%.3e tol=%.0e %s\n", r.name.c_str(), r.max_rel_err,
                r.tolerance, r.pass() ? "ok" : "FAIL");
    ok = ok && r.pass();
  }
  if (!ok) {
    std::fprintf(stderr, "error: gradient checks failed\n");
    return 1;
  }
  return 0;
}

int cmd_pool(const std::string& map_path, const std::string& region_text,
             const std::string& method, int samples) {
  resim::Tensor fm = load_map(map_path);
  resim::Region region = parse_region(region_text);
  resim::PooledFeature feat = method == "align" ? resim::roi_align(fm, region, samples)
                                                : resim::prroi_pool(fm, region);
  for (int64_t c = 0; c < feat.vector.numel(); ++c) {
    std::printf("%s%.6f", c ? " " : "", feat.vector.data()[c]);
  }
  std::printf("\n");
  return 0;
}

int cmd_gen_data(uint64_t seed, int count, const std::string& out_dir, int canvas) {
  std::filesystem::create_directories(out_dir);
  resim::SyntheticSpec spec;
  spec.count = count;
  spec.canvas = canvas;
  spec.seed = seed;
  for (int i = 0; i < count; ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "img_%05d.ppm", i);
    resim::write_ppm(resim::synth_image(spec, i), out_dir + "/" + name);
  }
  std::printf("wrote %d images to %s\n", count, out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"resim: region-similarity self-supervised pretraining (desk scale)"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  auto* pretrain = app.add_subcommand("pretrain", "train on synthetic or PPM data");
  pretrain->add_option("--config", config_path, "key=value config file")->required();
  pretrain->add_option("--out", out_dir, "output directory")->required();

  std::string ckpt_path, data = "synthetic";
  int pairs = 128, count = 128;
  uint64_t seed = 7;
  auto* evalr = app.add_subcommand("eval-retrieval", "region retrieval probe on a checkpoint");
  evalr->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
  evalr->add_option("--data", data, "'synthetic' or a directory of .ppm files");
  evalr->add_option("--pairs", pairs, "number of view pairs");
  evalr->add_option("--seed", seed, "evaluation seed");
  evalr->add_option("--count", count, "synthetic image count");

  std::string module = "all";
  auto* checkg = app.add_subcommand("check-gradients", "finite-difference gradient audit");
  checkg->add_option("--module", module, "all|tensor|pooling|encoder|losses");

  std::string map_path, region_text, method = "prroi";
  int samples = 2;
  auto* pool = app.add_subcommand("pool", "pool one region from a saved map (PPM)");
  pool->add_option("--feature-map", map_path, "PPM file used as a 3-channel map")->required();
  pool->add_option("--region", region_text, "t,l,b,r in map coordinates")->required();
  pool->add_option("--method", method, "prroi|align");
  pool->add_option("--samples", samples, "samples per axis (align)");

  uint64_t gen_seed = 1234;
  int gen_count = 512, gen_canvas = 96;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen-data", "write a synthetic PPM dataset");
  gen->add_option("--seed", gen_seed, "dataset seed");
  gen->add_option("--count", gen_count, "image count");
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--canvas", gen_canvas, "canvas size in px");

  CLI11_PARSE(app, argc, argv);

  try {
    if (pretrain->parsed()) return cmd_pretrain(config_path, out_dir);
    if (evalr->parsed()) return cmd_eval(ckpt_path, data, pairs, seed, count);
    if (checkg->parsed()) return cmd_check_gradients(module);
    if (pool->parsed()) {
      if (method != "prroi" && method != "align") {
        throw resim::ConfigError("--method expects prroi or align");
      }
      return cmd_pool(map_path, region_text, method, samples);
    }
    if (gen->parsed()) return cmd_gen_data(gen_seed, gen_count, gen_out, gen_canvas);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
