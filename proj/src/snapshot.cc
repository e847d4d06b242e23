/*
 * Copyright 2026 The CDL Sentinel Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "cdl_sentinel/snapshot.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "cdl_sentinel/errors.h"
#include "cdl_sentinel/rng.h"

namespace cdl_sentinel {
namespace {

constexpr unsigned char kMagic[8] = {'C', 'D', 'L', 'S', 'N', 'A', 'P', '\0'};

class Reader {
 public:
  explicit Reader(std::span<const unsigned char> bytes) : bytes_(bytes) {}

  uint64_t u(size_t width) {
    if (pos_ + width > bytes_.size()) throw InputError("truncated snapshot");
    uint64_t v = 0;
    for (size_t i = 0; i < width; ++i) {
      v |= static_cast<uint64_t>(bytes_[pos_ + i]) << (8 * i);
    }
    pos_ += width;
    return v;
  }
  uint32_t u32() { return static_cast<uint32_t>(u(4)); }
  uint64_t u64() { return u(8); }
  double f64() { return std::bit_cast<double>(u64()); }

  void expect_magic() {
    if (bytes_.size() < sizeof(kMagic) ||
        std::memcmp(bytes_.data(), kMagic, sizeof(kMagic)) != 0) {
      throw InputError("bad snapshot magic");
    }
    pos_ = sizeof(kMagic);
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const unsigned char> bytes_;
  size_t pos_ = 0;
};

}  // namespace

void put_u32(std::vector<unsigned char>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_u64(std::vector<unsigned char>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_f64(std::vector<unsigned char>& out, double v) {
  put_u64(out, std::bit_cast<uint64_t>(v));
}

std::vector<unsigned char> serialize_snapshot(const ParameterSnapshot& snapshot) {
  const MultiViewModel& m = snapshot.model;
  std::vector<unsigned char> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kSnapshotFormatVersion);
  put_u64(out, snapshot.version);
  put_u32(out, static_cast<uint32_t>(m.num_views()));
  put_u32(out, static_cast<uint32_t>(m.num_classes));
  put_u32(out, static_cast<uint32_t>(m.input_shape.channels));
  put_u32(out, static_cast<uint32_t>(m.input_shape.height));
  put_u32(out, static_cast<uint32_t>(m.input_shape.width));
  put_u32(out, static_cast<uint32_t>(m.hidden_spec.size()));
  for (size_t h : m.hidden_spec) put_u32(out, static_cast<uint32_t>(h));
  for (size_t v : m.view_indices) put_u32(out, static_cast<uint32_t>(v));
  const std::vector<double> params = flatten_parameters(m);
  put_u64(out, params.size());
  out.reserve(out.size() + params.size() * 8);
  for (double p : params) put_f64(out, p);
  return out;
}

ParameterSnapshot deserialize_snapshot(std::span<const unsigned char> bytes) {
  Reader in(bytes);
  in.expect_magic();
  if (in.u32() != kSnapshotFormatVersion) {
    throw InputError("unsupported snapshot format version");
  }
  ParameterSnapshot snap;
  snap.version = in.u64();
  const uint32_t views = in.u32();
  const uint32_t classes = in.u32();
  InputShape shape;
  shape.channels = in.u32();
  shape.height = in.u32();
  shape.width = in.u32();
  const uint32_t hidden_count = in.u32();
  if (views == 0 || hidden_count == 0 || hidden_count > 64 || views > 4096) {
    throw InputError("implausible snapshot header");
  }
  std::vector<size_t> hidden(hidden_count);
  for (auto& h : hidden) h = in.u32();
  std::vector<size_t> view_indices(views);
  for (auto& v : view_indices) v = in.u32();

  MultiViewModel model;
  try {
    model = build_model(views, classes, shape, hidden, 0);
  } catch (const ConfigError& e) {
    throw InputError(std::string("invalid snapshot header: ") + e.what());
  }
  model.view_indices = view_indices;
  const uint64_t count = in.u64();
  if (count != param_count(model)) throw InputError("parameter count mismatch");
  Network layers = flat_layers(model);
  for (auto& layer : layers) {
    for (double& w : layer.weights.data) w = in.f64();
    for (double& b : layer.biases) b = in.f64();
  }
  if (!in.done()) throw InputError("trailing bytes after snapshot");
  assign_flat_layers(model, layers);
  snap.model = std::move(model);
  return snap;
}

uint64_t snapshot_digest(const ParameterSnapshot& snapshot) {
  return fnv1a64(serialize_snapshot(snapshot));
}

void write_snapshot_file(const std::filesystem::path& path,
                         const ParameterSnapshot& snapshot) {
  const auto bytes = serialize_snapshot(snapshot);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("cannot write snapshot " + path.string());
}

ParameterSnapshot read_snapshot_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open snapshot " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return deserialize_snapshot(bytes);
}

}  // namespace cdl_sentinel
