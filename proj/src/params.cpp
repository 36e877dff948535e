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

#include "agn/params.hpp"

#include "agn/error.hpp"

namespace agn {

LayerParams::LayerParams(std::string name_, Tensor weights_, std::optional<Tensor> bias_)
    : name(std::move(name_)), weights(std::move(weights_)), bias(std::move(bias_)) {
  weights.ensure_grad();
  adam_m = Tensor(weights.shape());
  adam_v = Tensor(weights.shape());
  if (bias) {
    bias->ensure_grad();
    bias_m = Tensor(bias->shape());
    bias_v = Tensor(bias->shape());
  }
}

std::size_t LayerParams::trainable_size() const { return weights.size() + (bias ? bias->size() : 0); }

void LayerParams::zero_grad() {
  weights.zero_grad();
  if (bias) bias->zero_grad();
}

LayerParams& ParamStore::add(LayerParams params) {
  require(!params.name.empty(), "parameter name must not be empty");
  if (find(params.name)) fail(ErrorCode::invalid_argument, "duplicate parameter name '" + params.name + "'");
  layers_.push_back(std::make_unique<LayerParams>(std::move(params)));
  return *layers_.back();
}

LayerParams* ParamStore::find(const std::string& name) {
  for (auto& l : layers_)
    if (l->name == name) return l.get();
  return nullptr;
}

const LayerParams* ParamStore::find(const std::string& name) const {
  for (const auto& l : layers_)
    if (l->name == name) return l.get();
  return nullptr;
}

void ParamStore::zero_grad() {
  for (auto& l : layers_) l->zero_grad();
}

std::vector<std::pair<std::string, std::size_t>> count_params(const ParamStore& store) {
  std::vector<std::pair<std::string, std::size_t>> table;
  for (std::size_t i = 0; i < store.size(); ++i) table.emplace_back(store[i].name, store[i].trainable_size());
  return table;
}

std::size_t total_params(const ParamStore& store) {
  std::size_t total = 0;
  for (std::size_t i = 0; i < store.size(); ++i) total += store[i].trainable_size();
  return total;
}

}  // namespace agn
