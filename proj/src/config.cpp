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

#include "resim/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace resim {

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must lie in [0,1)");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2 (batch norm)");
  if (schedule != "cosine") throw ConfigError("schedule must be 'cosine'");
  for (const auto& [name, spec] : window_specs) {
    if (name != "C4" && name != "P3" && name != "P4") {
      throw ConfigError("window_specs: unknown level '" + name + "'");
    }
    if (!(spec.window > 0.0 && spec.stride > 0.0)) {
      throw ConfigError("window_specs: window and stride must be > 0");
    }
  }
}

void FullConfig::validate() const {
  encoder.validate();
  loss.validate();
  augment.validate();
  train.validate();
  if (data.data_count < 1) throw ConfigError("data_count must be >= 1");
  if (data.shapes_min < 1 || data.shapes_max < data.shapes_min) {
    throw ConfigError("shapes range invalid");
  }
}

WindowSpec default_window_spec(Level level, int input_size) {
  const double f = static_cast<double>(input_size) / 224.0;
  auto scaled = [f](double v) { return std::ceil(v * f); };
  switch (level) {
    case Level::C4:
    case Level::P4:
      return WindowSpec{scaled(48.0), scaled(32.0)};
    case Level::P3:
      return WindowSpec{scaled(32.0), scaled(24.0)};
    default:
      throw ConfigError(std::string("no default window spec for level ") + level_name(level));
  }
}

WindowSpec window_spec_for(const FullConfig& cfg, Level level) {
  auto it = cfg.train.window_specs.find(level_name(level));
  if (it != cfg.train.window_specs.end()) return it->second;
  return default_window_spec(level, cfg.encoder.input_size);
}

namespace {

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

double parse_double(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

int64_t parse_int(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    long long i = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
}

uint64_t parse_u64(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    unsigned long long i = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an unsigned integer, got '" + v + "'");
  }
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  size_t b = s.find_last_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

void apply_key(FullConfig& cfg, const std::string& key, const std::string& value) {
  // encoder
  if (key == "stage_channels") {
    auto parts = split(value, ',');
    if (parts.size() != 5) throw ConfigError("stage_channels: expected 5 comma-separated ints");
    cfg.encoder.stage_channels.clear();
    for (const auto& p : parts) cfg.encoder.stage_channels.push_back(parse_int(trim(p), key));
  } else if (key == "input_size") {
    cfg.encoder.input_size = static_cast<int>(parse_int(value, key));
  } else if (key == "fpn_channels") {
    cfg.encoder.fpn_channels = parse_int(value, key);
  } else if (key == "region_head_channels") {
    cfg.encoder.region_head_channels = parse_int(value, key);
  } else if (key == "image_embed_dim") {
    cfg.encoder.image_embed_dim = parse_int(value, key);
  } else if (key == "variant") {
    if (value == "C4") cfg.encoder.variant = Variant::C4;
    else if (value == "FPN") cfg.encoder.variant = Variant::FPN;
    else throw ConfigError("variant: expected C4 or FPN, got '" + value + "'");
  }
  // loss
  else if (key == "tau") {
    cfg.loss.tau = parse_double(value, key);
  } else if (key == "lambda") {
    cfg.loss.lambda = parse_double(value, key);
  } else if (key == "mode") {
    if (value == "contrastive") cfg.loss.mode = LossMode::Contrastive;
    else if (value == "cosine") cfg.loss.mode = LossMode::Cosine;
    else throw ConfigError("mode: expected contrastive or cosine, got '" + value + "'");
  } else if (key == "queue_size") {
    cfg.loss.queue_size = parse_int(value, key);
  } else if (key == "negatives_sync") {
    cfg.loss.negatives_sync = parse_bool(value, key);
  } else if (key == "neg_shards") {
    cfg.loss.neg_shards = static_cast<int>(parse_int(value, key));
  } else if (key == "cap_pairs") {
    cfg.loss.cap_pairs = parse_int(value, key);
  } else if (key == "neg_kernel") {
    cfg.loss.neg_kernel = static_cast<int>(parse_int(value, key));
  }
  // augment
  else if (key == "scale_range") {
    auto parts = split(value, ',');
    if (parts.size() != 2) throw ConfigError("scale_range: expected 'lo,hi'");
    cfg.augment.scale_lo = parse_double(trim(parts[0]), key);
    cfg.augment.scale_hi = parse_double(trim(parts[1]), key);
  } else if (key == "aspect_range") {
    auto parts = split(value, ',');
    if (parts.size() != 2) throw ConfigError("aspect_range: expected 'lo,hi'");
    cfg.augment.aspect_lo = parse_double(trim(parts[0]), key);
    cfg.augment.aspect_hi = parse_double(trim(parts[1]), key);
  } else if (key == "flip_prob") {
    cfg.augment.flip_prob = parse_double(value, key);
  } else if (key == "color_jitter") {
    cfg.augment.color_jitter = parse_bool(value, key);
  } else if (key == "grayscale_prob") {
    cfg.augment.grayscale_prob = parse_double(value, key);
  }
  // train
  else if (key == "lr") {
    cfg.train.lr = parse_double(value, key);
  } else if (key == "momentum") {
    cfg.train.momentum = parse_double(value, key);
  } else if (key == "weight_decay") {
    cfg.train.weight_decay = parse_double(value, key);
  } else if (key == "epochs") {
    cfg.train.epochs = static_cast<int>(parse_int(value, key));
  } else if (key == "batch_size") {
    cfg.train.batch_size = static_cast<int>(parse_int(value, key));
  } else if (key == "schedule") {
    cfg.train.schedule = value;
  } else if (key == "seed") {
    cfg.train.seed = parse_u64(value, key);
  } else if (key == "window_specs") {
    // level:window:stride, comma separated, e.g. "C4:48:32,P3:32:24"
    cfg.train.window_specs.clear();
    for (const auto& entry : split(value, ',')) {
      auto parts = split(trim(entry), ':');
      if (parts.size() != 3) throw ConfigError("window_specs: expected level:window:stride");
      cfg.train.window_specs[trim(parts[0])] =
          WindowSpec{parse_double(trim(parts[1]), key), parse_double(trim(parts[2]), key)};
    }
  }
  // data
  else if (key == "data") {
    cfg.data.data = value;
  } else if (key == "data_count") {
    cfg.data.data_count = static_cast<int>(parse_int(value, key));
  } else if (key == "data_canvas") {
    cfg.data.data_canvas = static_cast<int>(parse_int(value, key));
  } else if (key == "shapes_min") {
    cfg.data.shapes_min = static_cast<int>(parse_int(value, key));
  } else if (key == "shapes_max") {
    cfg.data.shapes_max = static_cast<int>(parse_int(value, key));
  } else if (key == "data_seed") {
    cfg.data.data_seed = parse_u64(value, key);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

}  // namespace

FullConfig parse_config_text(const std::string& text) {
  FullConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    }
    apply_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  cfg.validate();
  return cfg;
}

FullConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

namespace {

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::string config_to_text(const FullConfig& cfg) {
  std::ostringstream os;
  os << "stage_channels=";
  for (size_t i = 0; i < cfg.encoder.stage_channels.size(); ++i) {
    os << (i ? "," : "") << cfg.encoder.stage_channels[i];
  }
  os << "\n";
  os << "input_size=" << cfg.encoder.input_size << "\n";
  os << "fpn_channels=" << cfg.encoder.fpn_channels << "\n";
  os << "region_head_channels=" << cfg.encoder.region_head_channels << "\n";
  os << "image_embed_dim=" << cfg.encoder.image_embed_dim << "\n";
  os << "variant=" << variant_name(cfg.encoder.variant) << "\n";
  os << "tau=" << fmt_double(cfg.loss.tau) << "\n";
  os << "lambda=" << fmt_double(cfg.loss.lambda) << "\n";
  os << "mode=" << loss_mode_name(cfg.loss.mode) << "\n";
  os << "queue_size=" << cfg.loss.queue_size << "\n";
  os << "negatives_sync=" << (cfg.loss.negatives_sync ? "true" : "false") << "\n";
  os << "neg_shards=" << cfg.loss.neg_shards << "\n";
  os << "cap_pairs=" << cfg.loss.cap_pairs << "\n";
  os << "neg_kernel=" << cfg.loss.neg_kernel << "\n";
  os << "scale_range=" << fmt_double(cfg.augment.scale_lo) << "," << fmt_double(cfg.augment.scale_hi)
     << "\n";
  os << "aspect_range=" << fmt_double(cfg.augment.aspect_lo) << ","
     << fmt_double(cfg.augment.aspect_hi) << "\n";
  os << "flip_prob=" << fmt_double(cfg.augment.flip_prob) << "\n";
  os << "color_jitter=" << (cfg.augment.color_jitter ? "true" : "false") << "\n";
  os << "grayscale_prob=" << fmt_double(cfg.augment.grayscale_prob) << "\n";
  os << "lr=" << fmt_double(cfg.train.lr) << "\n";
  os << "momentum=" << fmt_double(cfg.train.momentum) << "\n";
  os << "weight_decay=" << fmt_double(cfg.train.weight_decay) << "\n";
  os << "epochs=" << cfg.train.epochs << "\n";
  os << "batch_size=" << cfg.train.batch_size << "\n";
  os << "schedule=" << cfg.train.schedule << "\n";
  os << "seed=" << cfg.train.seed << "\n";
  if (!cfg.train.window_specs.empty()) {
    os << "window_specs=";
    bool first = true;
    for (const auto& [name, spec] : cfg.train.window_specs) {
      os << (first ? "" : ",") << name << ":" << fmt_double(spec.window) << ":"
         << fmt_double(spec.stride);
      first = false;
    }
    os << "\n";
  }
  os << "data=" << cfg.data.data << "\n";
  os << "data_count=" << cfg.data.data_count << "\n";
  os << "data_canvas=" << cfg.data.data_canvas << "\n";
  os << "shapes_min=" << cfg.data.shapes_min << "\n";
  os << "shapes_max=" << cfg.data.shapes_max << "\n";
  os << "data_seed=" << cfg.data.data_seed << "\n";
  return os.str();
}

uint64_t fnv1a64(const std::string& text) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace resim
