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

#include "agn/inference.hpp"

#include "agn/error.hpp"

namespace agn {

void InferenceConfig::validate() const {
  require(stage_channels >= 1, "inference: stage_channels must be >= 1");
  require(dropout_p >= 0 && dropout_p < 1, "inference: dropout_p must lie in [0,1)");
  require(delta >= 3, "inference: delta must be >= 3 so the vertex grid is no finer than the coarsest side output");
}

std::array<int, kDecoderStages> decoder_factors(int delta) {
  require(delta >= 3 && delta < 16, "decoder_factors: delta must lie in [3,16)");
  return {1 << (delta - 3), 2, 2, 2};
}

InferenceStream::InferenceStream(std::size_t in_features, std::size_t side_channels, const InferenceConfig& cfg,
                                 ParamStore& store, Rng& rng, const std::string& prefix)
    : cfg_(cfg), side_channels_(side_channels) {
  cfg_.validate();
  factors_ = decoder_factors(cfg_.delta);
  const auto sc = static_cast<std::size_t>(cfg_.stage_channels);
  std::size_t in = in_features;
  for (std::size_t t = 0; t < kDecoderStages; ++t) {
    const std::string idx = std::to_string(t + 1);
    auto& conv = store.add(make_conv(prefix + ".conv" + idx, in, sc, 3, rng, false));
    auto& bn = store.add(make_batchnorm(prefix + ".bn" + idx, sc));
    stages_.emplace_back(conv, bn, cfg_.batchnorm);
    in = sc + side_channels_;
  }
  final_.emplace(store.add(make_conv(prefix + ".final", in, 1, 3, rng)), 1, 1);
}

Tensor InferenceStream::forward(const Tensor& refined, const VertexSet& vertices,
                                const std::array<Tensor, kCnnStages>& side, bool training, Rng& rng) {
  if (vertices.delta != cfg_.delta)
    fail(ErrorCode::invalid_argument, "inference_forward: graph delta " + std::to_string(vertices.delta) +
                                          " differs from decoder delta " + std::to_string(cfg_.delta));
  vertices_ = vertices;
  ready_ = true;
  Tensor x = scatter_features(refined, vertices);
  for (std::size_t t = 0; t < kDecoderStages; ++t) {
    x = upsample_nearest(stages_[t].forward(x, training), factors_[t]);
    const Tensor& s = side[kCnnStages - 1 - t];
    if (s.rank() != 4 || s.dim(2) != x.dim(2) || s.dim(3) != x.dim(3) || s.dim(1) != side_channels_)
      fail(ErrorCode::shape_mismatch, "inference_forward stage " + std::to_string(t + 1) + ": decoder tensor " +
                                          shape_string(x.shape()) + " vs side tensor " + shape_string(s.shape()));
    drops_[t] = dropout(s, cfg_.dropout_p, training, rng);
    x = concat_channels({&x, &drops_[t].output});
  }
  concat_ = x;
  logits_ = final_->forward(x);
  return activation(logits_, Activation::sigmoid);
}

InferenceStream::Gradients InferenceStream::backward(const Tensor& grad_logits) {
  require(ready_, "inference backward before forward");
  Gradients grads;
  Tensor g = final_->backward(grad_logits);
  const std::array<std::size_t, 2> parts{static_cast<std::size_t>(cfg_.stage_channels), side_channels_};
  for (std::size_t t = kDecoderStages; t-- > 0;) {
    auto pieces = split_channels(g, parts);
    grads.side[kCnnStages - 1 - t] = dropout_backward(drops_[t], pieces[1]);
    g = stages_[t].backward(upsample_nearest_backward(pieces[0], factors_[t]));
  }
  grads.refined = scatter_features_backward(g, vertices_);
  return grads;
}

std::vector<std::uint32_t> InferenceStream::signature() const {
  std::vector<std::uint32_t> sig;
  for (const auto& s : stages_) s.append_signature(sig);
  return sig;
}

}  // namespace agn
