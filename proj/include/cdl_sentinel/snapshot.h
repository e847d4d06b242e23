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

#ifndef CDL_SENTINEL_SNAPSHOT_H_
#define CDL_SENTINEL_SNAPSHOT_H_

// Versioned flat binary snapshot of a multi-view model.
//
// Layout (all integers little-endian):
//   char[8]  magic "CDLSNAP\0"
//   u32      format version (1)
//   u64      snapshot version
//   u32      num_views, num_classes, channels, height, width
//   u32      hidden layer count, then each hidden width
//   u32      view index for each branch
//   u64      parameter count
//   f64      parameters in canonical layer order, weights row-major then
//            biases for each layer

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cdl_sentinel/multiview.h"

namespace cdl_sentinel {

inline constexpr uint32_t kSnapshotFormatVersion = 1;

struct ParameterSnapshot {
  uint64_t version = 0;
  MultiViewModel model;

  bool operator==(const ParameterSnapshot&) const = default;
};

std::vector<unsigned char> serialize_snapshot(const ParameterSnapshot& snapshot);
// Throws InputError on a malformed or truncated buffer.
ParameterSnapshot deserialize_snapshot(std::span<const unsigned char> bytes);

uint64_t snapshot_digest(const ParameterSnapshot& snapshot);

void write_snapshot_file(const std::filesystem::path& path,
                         const ParameterSnapshot& snapshot);
ParameterSnapshot read_snapshot_file(const std::filesystem::path& path);

// Little-endian append/read helpers shared by the packet encoder.
void put_u32(std::vector<unsigned char>& out, uint32_t v);
void put_u64(std::vector<unsigned char>& out, uint64_t v);
void put_f64(std::vector<unsigned char>& out, double v);

}  // namespace cdl_sentinel

#endif  // CDL_SENTINEL_SNAPSHOT_H_
