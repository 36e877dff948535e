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
#include <memory>
#include <optional>

#include "agn/cnn.hpp"
#include "agn/gat.hpp"
#include "agn/inference.hpp"

namespace agn {

enum class ModelKind { cnn_only, joint };

struct ModelConfig {
  CnnConfig cnn;
  GatConfig gat{4, 4, GatMode::concat};
  GraphConfig graph;
  int stage_channels = 0;  // 0 selects the CNN side width
  Real dropout_p = 0.1;
  ActivationConfig activation;

  int decoder_channels() const { return stage_channels > 0 ? stage_channels : cnn.sides(); }
  void validate() const;
};

/// Pre-sigmoid BCE losses of one training step.
struct StepLoss {
  Real output = 0;  // loss of the model's final probability map
  Real cnn = 0;     // loss of the CNN probability map
  Real total = 0;   // optimized objective
};

/// CNN stream alone, or CNN -> graph -> GAT -> fusion decoder.
class AgnModel {
 public:
  AgnModel(const ModelConfig& cfg, ModelKind kind, std::uint64_t init_seed);
  AgnModel(const AgnModel&) = delete;
  AgnModel& operator=(const AgnModel&) = delete;

  ModelKind kind() const { return kind_; }
  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }
  CnnStream& cnn() { return *cnn_; }
  GatLayer* gat() { return gat_.get(); }
  InferenceStream* decoder() { return decoder_.get(); }

  /// Graph from the eval-mode CNN probability map of `slice`.
  Graph build_graph(const Tensor& slice);

  struct Output {
    CnnOutput cnn;
    Tensor rows;     // gathered vertex features (joint)
    Tensor refined;  // GAT output (joint)
    Tensor prob;     // final map: decoder output (joint) or CNN prob
  };

  /// `graph` is required for the joint model and ignored otherwise.
  Output forward(const Tensor& slice, const Graph* graph, bool training, Rng& rng);

  /// BCE of the final map, plus the CNN map for the joint model, and backward
  /// into every parameter. Call after forward() with the same output.
  StepLoss backward(const Output& out, const Tensor& mask);

  /// Eval-mode final probability map; builds the graph for the joint model.
  Tensor predict(const Tensor& slice);

 private:
  ModelConfig cfg_;
  ModelKind kind_;
  ParamStore store_;
  std::unique_ptr<CnnStream> cnn_;
  std::unique_ptr<GatLayer> gat_;
  std::unique_ptr<InferenceStream> decoder_;
  std::optional<Graph> last_graph_;
};

}  // namespace agn
