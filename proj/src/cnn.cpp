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

#include "agn/cnn.hpp"

#include "agn/error.hpp"

namespace agn {

void CnnConfig::validate() const {
  require(base_channels >= 4 && base_channels % 4 == 0,
          "cnn: base_channels must be a positive multiple of 4, got " + std::to_string(base_channels));
  require(side_channels >= 0, "cnn: side_channels must be nonnegative");
  for (int c : stage_convs) require(c >= 1, "cnn: every stage needs at least one convolution");
  if (height == 0 || width == 0 || height % 8 != 0 || width % 8 != 0)
    fail(ErrorCode::invalid_argument, "cnn: input size " + std::to_string(height) + "x" + std::to_string(width) +
                                          " must be divisible by 8");
}

CnnStream::CnnStream(const CnnConfig& cfg, ParamStore& store, Rng& rng, const std::string& prefix) : cfg_(cfg) {
  cfg_.validate();
  const auto side = static_cast<std::size_t>(cfg_.sides());
  std::size_t in = 1;
  for (std::size_t s = 0; s < kCnnStages; ++s) {
    const auto width = static_cast<std::size_t>(cfg_.base_channels) << s;
    const std::string stage = prefix + ".s" + std::to_string(s + 1);
    for (int i = 0; i < cfg_.stage_convs[s]; ++i) {
      const std::string idx = std::to_string(i + 1);
      auto& conv = store.add(make_conv(stage + ".conv" + idx, in, width, 3, rng, false));
      auto& bn = store.add(make_batchnorm(stage + ".bn" + idx, width));
      stages_[s].emplace_back(conv, bn, cfg_.batchnorm);
      in = width;
    }
    side_convs_.emplace_back(store.add(make_conv(prefix + ".side" + std::to_string(s + 1), in, side, 3, rng)), 1, 1);
    const int factor = 1 << s;
    ups_.emplace_back(store.add(make_transpose_conv(prefix + ".up" + std::to_string(s + 1), side, side, factor, rng)),
                      factor);
    if (s + 1 < kCnnStages) pools_.emplace_back(2);
  }
  final_.emplace(store.add(make_conv(prefix + ".final", side * kCnnStages, 1, 1, rng)), 1, 0);
}

std::size_t CnnStream::conv_count() const {
  std::size_t n = side_convs_.size() + 1;
  for (const auto& s : stages_) n += s.size();
  return n;
}

CnnOutput CnnStream::forward(const Tensor& slice, bool training, bool compute_prob) {
  require_same_shape(slice.shape(), Shape{1, 1, cfg_.height, cfg_.width}, "cnn_forward input");
  CnnOutput out;
  std::array<Tensor, kCnnStages> upsampled;
  Tensor x = slice;
  for (std::size_t s = 0; s < kCnnStages; ++s) {
    for (auto& layer : stages_[s]) x = layer.forward(x, training);
    out.side[s] = side_convs_[s].forward(x);
    upsampled[s] = ups_[s].forward(out.side[s]);
    if (s < pools_.size()) x = pools_[s].forward(x);
  }
  out.features = concat_channels({&upsampled[0], &upsampled[1], &upsampled[2], &upsampled[3]});
  if (compute_prob) {
    out.logits = final_->forward(out.features);
    out.prob = activation(out.logits, Activation::sigmoid);
  }
  return out;
}

void CnnStream::backward(const Tensor* grad_logits, const Tensor* grad_features,
                         const std::array<Tensor, kCnnStages>* grad_side) {
  Tensor gfeat;
  if (grad_logits) gfeat = final_->backward(*grad_logits);
  if (grad_features) {
    if (gfeat.empty()) {
      gfeat = *grad_features;
    } else {
      require_same_shape(gfeat.shape(), grad_features->shape(), "cnn_backward features");
      for (std::size_t i = 0; i < gfeat.size(); ++i) gfeat[i] += (*grad_features)[i];
    }
  }
  std::array<Tensor, kCnnStages> gside;
  if (!gfeat.empty()) {
    std::array<std::size_t, kCnnStages> parts;
    parts.fill(static_cast<std::size_t>(cfg_.sides()));
    auto pieces = split_channels(gfeat, parts);
    for (std::size_t s = 0; s < kCnnStages; ++s) gside[s] = ups_[s].backward(pieces[s]);
  }
  if (grad_side) {
    for (std::size_t s = 0; s < kCnnStages; ++s) {
      const Tensor& extra = (*grad_side)[s];
      if (extra.empty()) continue;
      if (gside[s].empty()) {
        gside[s] = extra;
      } else {
        require_same_shape(gside[s].shape(), extra.shape(), "cnn_backward side");
        for (std::size_t i = 0; i < extra.size(); ++i) gside[s][i] += extra[i];
      }
    }
  }

  Tensor g;  // gradient w.r.t. the output of the current stage
  for (std::size_t s = kCnnStages; s-- > 0;) {
    Tensor from_side;
    if (!gside[s].empty()) from_side = side_convs_[s].backward(gside[s]);
    if (s < pools_.size() && !g.empty()) {
      Tensor from_pool = pools_[s].backward(g);
      if (from_side.empty()) {
        g = std::move(from_pool);
      } else {
        for (std::size_t i = 0; i < from_pool.size(); ++i) from_side[i] += from_pool[i];
        g = std::move(from_side);
      }
    } else {
      g = std::move(from_side);
    }
    if (g.empty()) continue;
    for (std::size_t i = stages_[s].size(); i-- > 0;) {
      const bool first_layer = s == 0 && i == 0;
      g = stages_[s][i].backward(g, !first_layer);
    }
  }
}

std::vector<std::uint32_t> CnnStream::signature() const {
  std::vector<std::uint32_t> sig;
  for (std::size_t s = 0; s < kCnnStages; ++s) {
    for (const auto& layer : stages_[s]) layer.append_signature(sig);
    if (s < pools_.size()) pools_[s].append_signature(sig);
  }
  return sig;
}

}  // namespace agn
