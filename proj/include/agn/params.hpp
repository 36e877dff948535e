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
#include <string>
#include <utility>
#include <vector>

#include "agn/tensor.hpp"

namespace agn {

/// Trainable weights (plus optional bias and batch-norm statistics) of one layer
/// together with their Adam moment buffers.
struct LayerParams {
  std::string name;
  Tensor weights;
  std::optional<Tensor> bias;
  std::optional<Tensor> running_mean;
  std::optional<Tensor> running_var;
  Tensor adam_m;
  Tensor adam_v;
  std::optional<Tensor> bias_m;
  std::optional<Tensor> bias_v;
  std::int64_t step_count = 0;

  LayerParams(std::string name, Tensor weights, std::optional<Tensor> bias = std::nullopt);

  std::size_t trainable_size() const;
  void zero_grad();
};

/// Ordered, name-unique collection of layer parameters. Addresses are stable.
class ParamStore {
 public:
  LayerParams& add(LayerParams params);
  LayerParams* find(const std::string& name);
  const LayerParams* find(const std::string& name) const;

  std::size_t size() const noexcept { return layers_.size(); }
  bool empty() const noexcept { return layers_.empty(); }
  LayerParams& operator[](std::size_t i) { return *layers_[i]; }
  const LayerParams& operator[](std::size_t i) const { return *layers_[i]; }

  void zero_grad();

 private:
  std::vector<std::unique_ptr<LayerParams>> layers_;
};

/// name -> trainable element count, in insertion order.
std::vector<std::pair<std::string, std::size_t>> count_params(const ParamStore& store);
std::size_t total_params(const ParamStore& store);

}  // namespace agn
