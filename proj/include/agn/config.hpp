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

#include <cstdint>
#include <string>

#include "agn/layers.hpp"
#include "agn/model.hpp"
#include "agn/phantom.hpp"

namespace agn {

struct TrainConfig {
  Real cnn_lr = 0.01;
  Real joint_lr = 0.01;
  int batch_size = 1;
  int cnn_iters = 2000;
  int joint_iters = 2000;
  int graph_update_period = 250;
  std::uint64_t seed = 42;
  AdamConfig adam;  // lr is taken from cnn_lr / joint_lr
  void validate() const;
};

/// Everything a pipeline run reads from a config file. Slice dimensions are
/// not configured; they come from the data.
struct PipelineConfig {
  TrainConfig train;
  ModelConfig model;
  PreprocessConfig preprocess;
  void validate() const;
};

/// Flat `key = value` lines; '#' starts a comment; unknown keys are rejected.
PipelineConfig parse_config(const std::string& text, const std::string& source = "<config>");
PipelineConfig load_config(const std::string& path);
/// Every key with its current value, parseable by parse_config.
std::string format_config(const PipelineConfig& cfg);

}  // namespace agn
