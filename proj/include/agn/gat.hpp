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
#include <utility>
#include <vector>

#include "agn/graph.hpp"
#include "agn/layers.hpp"

namespace agn {

enum class GatMode { concat, average_sigmoid };

struct GatConfig {
  int heads = 4;
  int out_features = 16;  // per head
  GatMode mode = GatMode::concat;
  void validate() const;
};

/// One multi-head graph attention layer. Per head k:
///   z = X W_k,  e_ij = LeakyReLU(z_i . a_k[:n'] + z_j . a_k[n':]),
///   alpha = softmax over the neighborhood,  h_i = sum_j alpha_ij z_j.
/// concat mode emits ELU(h) of every head side by side; average_sigmoid emits
/// sigmoid of the head mean.
class GatLayer {
 public:
  GatLayer(std::size_t in_features, const GatConfig& cfg, ParamStore& store, Rng& rng,
           const std::string& prefix = "gat");

  /// x: [V, in_features]; adjacency must be symmetric with self-loops.
  Tensor forward(const Tensor& x, const Adjacency& adjacency, const ActivationConfig& act = {});
  /// Returns the gradient w.r.t. x and accumulates parameter gradients.
  Tensor backward(const Tensor& grad_out);

  std::size_t in_features() const { return in_; }
  std::size_t output_width() const;
  const GatConfig& config() const { return cfg_; }
  /// Attention matrices of the last forward, one [V,V] per head.
  const std::vector<Tensor>& attention() const { return alpha_; }

 private:
  std::size_t in_;
  GatConfig cfg_;
  std::vector<LayerParams*> w_;
  std::vector<LayerParams*> a_;
  // forward cache
  Tensor x_;
  Adjacency adj_;
  ActivationConfig act_;
  std::vector<Tensor> z_, pre_, alpha_, h_;
  Tensor out_;
};

/// Samples vertices and builds the adjacency from prob, gathers vertex rows
/// from cnn_features and applies the layer.
std::pair<Graph, Tensor> gnn_module_forward(const Tensor& cnn_features, const Tensor& prob, const GraphConfig& cfg,
                                            GatLayer& layer, const ActivationConfig& act = {});

}  // namespace agn
