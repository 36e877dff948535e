// Copyright 2026 The AGN Authors. All Rights Reserved.
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

#include <string>
#include <vector>

#include "agn/params.hpp"

namespace agn {

/// One named array of a checkpoint file.
struct CheckpointEntry {
  std::string name;
  Shape shape;  // empty for scalars
  std::vector<float> values;
};

/// Entries of a store in insertion order. Each layer contributes
/// <layer>.weight, .weight.m, .weight.v, then .bias, .bias.m, .bias.v and
/// .running_mean, .running_var when present, then the scalar <layer>.step.
std::vector<CheckpointEntry> checkpoint_entries(const ParamStore& store);

/// "AGNC", version byte 1, u32 count, then per entry: u32 name length, name,
/// u32 rank, rank x u32 dims, float32 LE payload.
std::vector<char> serialize_checkpoint(const ParamStore& store);
void save_checkpoint(const ParamStore& store, const std::string& path);
std::vector<CheckpointEntry> read_checkpoint(const std::string& path);
std::vector<CheckpointEntry> parse_checkpoint(const std::vector<char>& bytes, const std::string& what);

enum class LoadMode {
  exact,   // file and store hold the same entries in the same order
  subset,  // every file entry must exist in the store; other store layers keep their values
};

void load_checkpoint(ParamStore& store, const std::vector<CheckpointEntry>& entries, LoadMode mode = LoadMode::exact);
void load_checkpoint(ParamStore& store, const std::string& path, LoadMode mode = LoadMode::exact);

}  // namespace agn
