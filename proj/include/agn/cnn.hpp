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

#include <array>
#include <optional>
#include <cstdint>
#include <string>
#include <vector>

#include "agn/modules.hpp"

namespace agn {

inline constexpr std::size_t kCnnStages = 4;

struct CnnConfig {
  int base_channels = 16;
  std::array<int, kCnnStages> stage_convs{2, 2, 3, 3};
  int side_channels = 0;  // 0 selects base_channels / 4
  std::size_t height = 64;
  std::size_t width = 64;
  BatchNormSettings batchnorm;

  int sides() const { return side_channels > 0 ? side_channels : base_channels / 4; }
  void validate() const;
};

struct CnnOutput {
  Tensor logits;    // [1,1,h,w] pre-sigmoid; empty when the final conv was skipped
  Tensor prob;      // [1,1,h,w]
  Tensor features;  // [1, 4*side, h, w], upsampled side outputs concatenated
  std::array<Tensor, kCnnStages> side;  // side conv outputs at scales 1, 1/2, 1/4, 1/8
};

/// Contracting trunk of conv-BN-ReLU stages with side outputs, learnable
/// upsampling of each side and a final 1x1 conv + sigmoid.
class CnnStream {
 public:
  CnnStream(const CnnConfig& cfg, ParamStore& store, Rng& rng, const std::string& prefix = "cnn");

  /// slice: [1,1,h,w] already windowed to [0,1].
  CnnOutput forward(const Tensor& slice, bool training, bool compute_prob = true);

  /// Any of the gradients may be null. grad_logits is w.r.t. the pre-sigmoid output.
  void backward(const Tensor* grad_logits, const Tensor* grad_features,
                const std::array<Tensor, kCnnStages>* grad_side);

  const CnnConfig& config() const { return cfg_; }
  std::size_t conv_count() const;
  std::size_t maxpool_count() const { return pools_.size(); }
  std::size_t feature_channels() const { return kCnnStages * static_cast<std::size_t>(cfg_.sides()); }
  /// ReLU masks and pooling argmaxes of the last forward pass.
  std::vector<std::uint32_t> signature() const;

 private:
  CnnConfig cfg_;
  std::array<std::vector<ConvBnRelu>, kCnnStages> stages_;
  std::vector<MaxPool2d> pools_;
  std::vector<Conv2d> side_convs_;
  std::vector<TransposeConv2d> ups_;
  std::optional<Conv2d> final_;
};

}  // namespace agn
