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
#include <string>

#include "resim/augment.hpp"
#include "resim/encoder.hpp"
#include "resim/losses.hpp"

namespace resim {

struct TrainConfig {
  double lr = 0.03;  // scaled by batch_size/256 at use
  double momentum = 0.9;
  double weight_decay = 1e-4;
  int epochs = 10;
  int batch_size = 8;
  std::string schedule = "cosine";
  uint64_t seed = 0;
  // Level name -> spec; levels not listed fall back to the scaled defaults.
  std::map<std::string, WindowSpec> window_specs;

  void validate() const;
};

struct DataConfig {
  std::string data = "synthetic";  // "synthetic" or a directory of .ppm files
  int data_count = 512;
  int data_canvas = 96;
  int shapes_min = 1;
  int shapes_max = 3;
  uint64_t data_seed = 1234;
};

struct FullConfig {
  EncoderConfig encoder;
  LossConfig loss;
  AugmentConfig augment;
  TrainConfig train;
  DataConfig data;

  void validate() const;
};

// Paper-scale defaults are W48-S32 on C4/P4 and W32-S24 on P3 at 224 px
// input; other input sizes scale the pixels linearly (ceil).
WindowSpec default_window_spec(Level level, int input_size);
WindowSpec window_spec_for(const FullConfig& cfg, Level level);

// Flat key=value text. '#' starts a comment; unknown keys are an error.
FullConfig parse_config_text(const std::string& text);
FullConfig load_config_file(const std::string& path);

// Canonical dump of every key (parses back to the same config).
std::string config_to_text(const FullConfig& cfg);

uint64_t fnv1a64(const std::string& text);

}  // namespace resim
