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

#include "resim/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "resim/config.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian only");

namespace resim {

namespace {

constexpr char kMagic[6] = {'R', 'E', 'S', 'I', 'M', '1'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("checkpoint: unexpected end of file");
  return v;
}

struct Entry {
  std::string name;
  Shape shape;
  const std::vector<double>* data;
};

std::vector<Entry> collect_entries(EncoderPair& pair) {
  std::vector<Entry> entries;
  auto add_params = [&entries](Encoder& enc, const std::string& prefix) {
    for (auto& p : enc.named_params(prefix)) {
      entries.push_back(Entry{p.name, p.tensor.shape(), &p.tensor.impl()->data});
    }
    for (auto& b : enc.named_buffers(prefix)) {
      entries.push_back(Entry{b.name, Shape{static_cast<int64_t>(b.data->size())}, b.data});
    }
  };
  add_params(*pair.query, "query/");
  add_params(*pair.key, "key/");
  return entries;
}

}  // namespace

std::string checkpoint_config_text(const EncoderConfig& cfg, HeadMode mode, double ema_momentum) {
  std::ostringstream os;
  os << "stage_channels=";
  for (size_t i = 0; i < cfg.stage_channels.size(); ++i) {
    os << (i ? "," : "") << cfg.stage_channels[i];
  }
  os << "\n";
  os << "input_size=" << cfg.input_size << "\n";
  os << "fpn_channels=" << cfg.fpn_channels << "\n";
  os << "region_head_channels=" << cfg.region_head_channels << "\n";
  os << "image_embed_dim=" << cfg.image_embed_dim << "\n";
  os << "variant=" << variant_name(cfg.variant) << "\n";
  os << "mode=" << head_mode_name(mode) << "\n";
  std::ostringstream ema;
  ema.precision(17);
  ema << ema_momentum;
  os << "ema_momentum=" << ema.str() << "\n";
  return os.str();
}

void save_checkpoint(const std::string& path, EncoderPair& pair) {
  const std::string config = checkpoint_config_text(pair.query->config(), pair.query->head_mode(),
                                                    pair.ema_momentum);
  auto entries = collect_entries(pair);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path);
  out.write(kMagic, sizeof(kMagic));
  write_pod<uint32_t>(out, kVersion);
  write_pod<uint64_t>(out, fnv1a64(config));
  write_pod<uint32_t>(out, static_cast<uint32_t>(config.size()));
  out.write(config.data(), static_cast<std::streamsize>(config.size()));

  write_pod<uint32_t>(out, static_cast<uint32_t>(entries.size()));
  uint64_t offset = 0;
  for (const Entry& e : entries) {
    write_pod<uint16_t>(out, static_cast<uint16_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    write_pod<uint8_t>(out, static_cast<uint8_t>(e.shape.size()));
    for (int64_t d : e.shape) write_pod<uint32_t>(out, static_cast<uint32_t>(d));
    write_pod<uint64_t>(out, offset);
    offset += e.data->size() * sizeof(float);
  }
  write_pod<uint64_t>(out, offset);
  for (const Entry& e : entries) {
    for (double v : *e.data) {
      const float f = static_cast<float>(v);
      out.write(reinterpret_cast<const char*>(&f), sizeof(float));
    }
  }
  if (!out) throw IoError("failed writing checkpoint " + path);
}

std::unique_ptr<EncoderPair> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  char magic[6];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError(path + ": not a resim checkpoint");
  }
  if (read_pod<uint32_t>(in) != kVersion) throw IoError(path + ": unsupported checkpoint version");
  const uint64_t digest = read_pod<uint64_t>(in);
  const uint32_t config_len = read_pod<uint32_t>(in);
  std::string config(config_len, '\0');
  in.read(config.data(), config_len);
  if (!in) throw IoError(path + ": truncated config");
  if (fnv1a64(config) != digest) throw IoError(path + ": config digest mismatch");

  // Rebuild the architecture from the stored config text.
  EncoderConfig cfg;
  HeadMode mode = HeadMode::Contrastive;
  double ema = 0.999;
  {
    std::istringstream cs(config);
    std::string line;
    while (std::getline(cs, line)) {
      const size_t eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(0, eq);
      const std::string value = line.substr(eq + 1);
      if (key == "stage_channels") {
        cfg.stage_channels.clear();
        std::istringstream vs(value);
        std::string tok;
        while (std::getline(vs, tok, ',')) cfg.stage_channels.push_back(std::stoll(tok));
      } else if (key == "input_size") {
        cfg.input_size = std::stoi(value);
      } else if (key == "fpn_channels") {
        cfg.fpn_channels = std::stoll(value);
      } else if (key == "region_head_channels") {
        cfg.region_head_channels = std::stoll(value);
      } else if (key == "image_embed_dim") {
        cfg.image_embed_dim = std::stoll(value);
      } else if (key == "variant") {
        cfg.variant = value == "FPN" ? Variant::FPN : Variant::C4;
      } else if (key == "mode") {
        mode = value == "cosine" ? HeadMode::Cosine : HeadMode::Contrastive;
      } else if (key == "ema_momentum") {
        ema = std::stod(value);
      }
    }
  }
  auto pair = std::make_unique<EncoderPair>(cfg, mode, ema, /*seed=*/0);

  const uint32_t count = read_pod<uint32_t>(in);
  struct ManifestEntry {
    std::string name;
    Shape shape;
    uint64_t offset;
    uint64_t elems;
  };
  std::vector<ManifestEntry> manifest(count);
  for (auto& e : manifest) {
    const uint16_t name_len = read_pod<uint16_t>(in);
    e.name.resize(name_len);
    in.read(e.name.data(), name_len);
    const uint8_t ndim = read_pod<uint8_t>(in);
    e.shape.resize(ndim);
    e.elems = 1;
    for (auto& d : e.shape) {
      d = read_pod<uint32_t>(in);
      e.elems *= static_cast<uint64_t>(d);
    }
    e.offset = read_pod<uint64_t>(in);
  }
  const uint64_t blob_size = read_pod<uint64_t>(in);
  std::vector<float> blob(blob_size / sizeof(float));
  in.read(reinterpret_cast<char*>(blob.data()), static_cast<std::streamsize>(blob_size));
  if (!in) throw IoError(path + ": truncated blob");

  auto expected = collect_entries(*pair);
  if (expected.size() != manifest.size()) {
    throw IoError(path + ": tensor count does not match the architecture");
  }
  for (size_t i = 0; i < manifest.size(); ++i) {
    const auto& m = manifest[i];
    const auto& e = expected[i];
    if (m.name != e.name || m.shape != e.shape) {
      throw IoError(path + ": manifest mismatch at '" + m.name + "'");
    }
    auto* dst = const_cast<std::vector<double>*>(e.data);
    const float* src = blob.data() + m.offset / sizeof(float);
    for (size_t j = 0; j < m.elems; ++j) (*dst)[j] = static_cast<double>(src[j]);
  }
  return pair;
}

}  // namespace resim
