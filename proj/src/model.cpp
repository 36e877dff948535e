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

#include "agn/model.hpp"

#include "agn/error.hpp"

namespace agn {

void ModelConfig::validate() const {
  cnn.validate();
  gat.validate();
  activation.validate();
  graph.validate(cnn.height, cnn.width);
  require(dropout_p >= 0 && dropout_p < 1, "dropout_p must lie in [0,1)");
  require(stage_channels >= 0, "stage_channels must be nonnegative");
}

AgnModel::AgnModel(const ModelConfig& cfg, ModelKind kind, std::uint64_t init_seed) : cfg_(cfg), kind_(kind) {
  cfg_.validate();
  Rng rng(init_seed);
  cnn_ = std::make_unique<CnnStream>(cfg_.cnn, store_, rng);
  if (kind_ == ModelKind::joint) {
    const std::size_t cell = std::size_t{1} << cfg_.graph.delta;
    if (cfg_.cnn.height % cell != 0 || cfg_.cnn.width % cell != 0)
      fail(ErrorCode::invalid_argument, "joint model: input size must be divisible by 2^delta = " +
                                            std::to_string(cell));
    GatConfig gat_cfg = cfg_.gat;
    gat_cfg.mode = GatMode::concat;
    gat_ = std::make_unique<GatLayer>(cnn_->feature_channels(), gat_cfg, store_, rng);
    InferenceConfig dec;
    dec.stage_channels = cfg_.decoder_channels();
    dec.dropout_p = cfg_.dropout_p;
    dec.delta = cfg_.graph.delta;
    dec.batchnorm = cfg_.cnn.batchnorm;
    decoder_ = std::make_unique<InferenceStream>(gat_->output_width(), static_cast<std::size_t>(cfg_.cnn.sides()),
                                                 dec, store_, rng);
  }
}

Graph AgnModel::build_graph(const Tensor& slice) {
  const CnnOutput out = cnn_->forward(slice, /*training=*/false);
  return agn::build_graph(out.prob, cfg_.graph);
}

AgnModel::Output AgnModel::forward(const Tensor& slice, const Graph* graph, bool training, Rng& rng) {
  Output out;
  out.cnn = cnn_->forward(slice, training);
  if (kind_ == ModelKind::cnn_only) {
    out.prob = out.cnn.prob;
    return out;
  }
  require(graph != nullptr, "joint forward needs a graph");
  last_graph_ = *graph;
  out.rows = gather_features(out.cnn.features, graph->vertices);
  out.refined = gat_->forward(out.rows, graph->adjacency, cfg_.activation);
  out.prob = decoder_->forward(out.refined, graph->vertices, out.cnn.side, training, rng);
  return out;
}

StepLoss AgnModel::backward(const Output& out, const Tensor& mask) {
  StepLoss loss;
  loss.cnn = bce_loss(out.cnn.prob, mask);
  // Gradients are taken w.r.t. the logits, which stays informative where the
  // probability clamp would otherwise zero it.
  const Tensor g_cnn = bce_logit_backward(out.cnn.prob, mask);
  if (kind_ == ModelKind::cnn_only) {
    loss.output = loss.total = loss.cnn;
    cnn_->backward(&g_cnn, nullptr, nullptr);
    return loss;
  }
  loss.output = bce_loss(out.prob, mask);
  loss.total = loss.output + loss.cnn;
  const auto dec = decoder_->backward(bce_logit_backward(out.prob, mask));
  const Tensor g_rows = gat_->backward(dec.refined);
  const Tensor g_feat = gather_features_backward(g_rows, last_graph_->vertices, out.cnn.features.shape());
  cnn_->backward(&g_cnn, &g_feat, &dec.side);
  return loss;
}

Tensor AgnModel::predict(const Tensor& slice) {
  Rng unused(0);
  if (kind_ == ModelKind::cnn_only) return forward(slice, nullptr, false, unused).prob;
  const Graph g = build_graph(slice);
  return forward(slice, &g, false, unused).prob;
}

}  // namespace agn
