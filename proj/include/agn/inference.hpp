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
#include <string>
#include <vector>

#include "agn/cnn.hpp"
#include "agn/graph.hpp"

namespace agn {

inline constexpr std::size_t kDecoderStages = 4;

struct InferenceConfig {
  int stage_channels = 4;
  Real dropout_p = 0.1;
  int delta = 3;  // must match the graph sampling delta; >= 3
  BatchNormSettings batchnorm;
  void validate() const;
};

/// Upsampling factor of each decoder stage: the first stage lifts the vertex
/// grid (scale 2^-delta) to the coarsest side scale 1/8, the rest double.
std::array<int, kDecoderStages> decoder_factors(int delta);

/// Decoder fusing refined vertex rows with the CNN side outputs.
class InferenceStream {
 public:
  InferenceStream(std::size_t in_features, std::size_t side_channels, const InferenceConfig& cfg, ParamStore& store,
                  Rng& rng, const std::string& prefix = "dec");

  /// side: CNN side outputs at scales 1, 1/2, 1/4, 1/8 (CnnOutput::side).
  /// Returns the [1,1,h,w] probability map.
  Tensor forward(const Tensor& refined, const VertexSet& vertices, const std::array<Tensor, kCnnStages>& side,
                 bool training, Rng& rng);

  struct Gradients {
    Tensor refined;
    std::array<Tensor, kCnnStages> side;
  };
  Gradients backward(const Tensor& grad_logits);

  const Tensor& logits() const { return logits_; }
  /// Channel count of the last full-resolution concatenation.
  std::size_t final_concat_channels() const { return static_cast<std::size_t>(cfg_.stage_channels) + side_channels_; }
  const Tensor& last_concat() const { return concat_; }
  std::vector<std::uint32_t> signature() const;

 private:
  InferenceConfig cfg_;
  std::size_t side_channels_;
  std::array<int, kDecoderStages> factors_;
  std::vector<ConvBnRelu> stages_;
  std::optional<Conv2d> final_;
  // forward cache
  VertexSet vertices_;
  bool ready_ = false;
  std::array<DropoutResult, kDecoderStages> drops_;
  Tensor concat_, logits_;
};

}  // namespace agn
