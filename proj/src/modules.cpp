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

#include "agn/modules.hpp"

#include <cmath>

namespace agn {

namespace {

Tensor kaiming(Shape shape, std::size_t fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const Real stddev = std::sqrt(2.0 / static_cast<Real>(fan_in));
  for (auto& v : t.values()) v = stddev * normal(rng);
  return t;
}

}  // namespace

LayerParams make_conv(std::string name, std::size_t in_channels, std::size_t out_channels, int kernel, Rng& rng,
                      bool with_bias) {
  const auto k = static_cast<std::size_t>(kernel);
  std::optional<Tensor> bias;
  if (with_bias) bias = Tensor({out_channels});
  return LayerParams(std::move(name), kaiming({out_channels, in_channels, k, k}, in_channels * k * k, rng),
                     std::move(bias));
}

LayerParams make_transpose_conv(std::string name, std::size_t in_channels, std::size_t out_channels, int factor,
                                Rng& rng) {
  const auto k = static_cast<std::size_t>(transpose_kernel_size(factor));
  // Each output pixel sees roughly (k / factor)^2 taps per input channel.
  const std::size_t taps = (k / static_cast<std::size_t>(factor)) * (k / static_cast<std::size_t>(factor));
  return LayerParams(std::move(name), kaiming({in_channels, out_channels, k, k}, in_channels * taps, rng),
                     Tensor({out_channels}));
}

LayerParams make_batchnorm(std::string name, std::size_t channels) {
  LayerParams p(std::move(name), Tensor({channels}, 1.0), Tensor({channels}));
  p.running_mean = Tensor({channels});
  p.running_var = Tensor({channels}, 1.0);
  return p;
}

Tensor Conv2d::forward(const Tensor& x) {
  input_ = x;
  return conv2d(x, *p_, stride_, padding_);
}

Tensor Conv2d::backward(const Tensor& grad_out, bool need_input_grad) {
  return conv2d_backward(input_, *p_, stride_, padding_, grad_out, need_input_grad);
}

Tensor TransposeConv2d::forward(const Tensor& x) {
  input_ = x;
  return transpose_conv2d(x, *p_, factor_);
}

Tensor TransposeConv2d::backward(const Tensor& grad_out) {
  return transpose_conv2d_backward(input_, *p_, factor_, grad_out);
}

Tensor BatchNorm2d::forward(const Tensor& x, bool training) {
  return batchnorm2d(x, *p_, training, settings_.eps, settings_.momentum, &cache_);
}

Tensor BatchNorm2d::backward(const Tensor& grad_out) { return batchnorm2d_backward(cache_, *p_, grad_out); }

Tensor Relu::forward(const Tensor& x) {
  input_ = x;
  return activation(x, Activation::relu);
}

Tensor Relu::backward(const Tensor& grad_out) const {
  Tensor g(grad_out.shape());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = input_[i] > 0 ? grad_out[i] : Real{0};
  return g;
}

void Relu::append_signature(std::vector<std::uint32_t>& sig) const {
  std::uint32_t word = 0;
  for (std::size_t i = 0; i < input_.size(); ++i) {
    word = (word << 1) | (input_[i] > 0 ? 1u : 0u);
    if (i % 32 == 31) sig.push_back(word), word = 0;
  }
  sig.push_back(word);
}

Tensor MaxPool2d::forward(const Tensor& x) {
  input_shape_ = x.shape();
  auto r = maxpool2d(x, window_);
  argmax_ = std::move(r.argmax);
  return std::move(r.output);
}

Tensor MaxPool2d::backward(const Tensor& grad_out) const { return maxpool2d_backward(input_shape_, argmax_, grad_out); }

void MaxPool2d::append_signature(std::vector<std::uint32_t>& sig) const {
  sig.insert(sig.end(), argmax_.begin(), argmax_.end());
}

Tensor ConvBnRelu::forward(const Tensor& x, bool training) {
  return relu_.forward(bn_.forward(conv_.forward(x), training));
}

Tensor ConvBnRelu::backward(const Tensor& grad_out, bool need_input_grad) {
  return conv_.backward(bn_.backward(relu_.backward(grad_out)), need_input_grad);
}

std::uint64_t hash_signature(const std::vector<std::uint32_t>& sig) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (auto w : sig) {
    h ^= w;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace agn
