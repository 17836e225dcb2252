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

#include <memory>
#include <string>

#include "resim/encoder.hpp"

namespace resim {

// Checkpoint layout (little-endian):
//   magic "RESIM1" | u32 format version | u64 FNV-1a digest of the config
//   text | u32 config length | config text | u32 tensor count | manifest of
//   (u16 name length, name, u8 ndim, u32 dims..., u64 byte offset) | u64
//   blob size | fp32 data blob.
// Entries cover query and key parameters plus batch-norm running stats, in
// declaration order. Load-then-save reproduces the file byte for byte.

void save_checkpoint(const std::string& path, EncoderPair& pair);

std::unique_ptr<EncoderPair> load_checkpoint(const std::string& path);

// The canonical config text stored in the header (encoder architecture,
// head mode, EMA momentum).
std::string checkpoint_config_text(const EncoderConfig& cfg, HeadMode mode, double ema_momentum);

}  // namespace resim
