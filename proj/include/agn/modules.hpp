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
#include <vector>

#include "agn/layers.hpp"

namespace agn {

// Parameter construction with the project's initialization scheme.
/// Convolutions feeding batch norm are built without a bias.
LayerParams make_conv(std::string name, std::size_t in_channels, std::size_t out_channels, int kernel, Rng& rng,
                      bool with_bias = true);
LayerParams make_transpose_conv(std::string name, std::size_t in_channels, std::size_t out_channels, int factor,
                                Rng& rng);
LayerParams make_batchnorm(std::string name, std::size_t channels);

struct BatchNormSettings {
  Real eps = 1e-5;
  Real momentum = 0.9;
};

// Stateful wrappers that keep the forward inputs they need for backward.

class Conv2d {
 public:
  Conv2d(LayerParams& params, int stride = 1, int padding = 1) : p_(&params), stride_(stride), padding_(padding) {}
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out, bool need_input_grad = true);
  LayerParams& params() { return *p_; }

 private:
  LayerParams* p_;
  int stride_, padding_;
  Tensor input_;
};

class TransposeConv2d {
 public:
  TransposeConv2d(LayerParams& params, int factor) : p_(&params), factor_(factor) {}
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out);
  int factor() const { return factor_; }

 private:
  LayerParams* p_;
  int factor_;
  Tensor input_;
};

class BatchNorm2d {
 public:
  BatchNorm2d(LayerParams& params, BatchNormSettings settings) : p_(&params), settings_(settings) {}
  Tensor forward(const Tensor& x, bool training);
  Tensor backward(const Tensor& grad_out);

 private:
  LayerParams* p_;
  BatchNormSettings settings_;
  BatchNormCache cache_;
};

class Relu {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out) const;
  void append_signature(std::vector<std::uint32_t>& sig) const;

 private:
  Tensor input_;
};

class MaxPool2d {
 public:
  explicit MaxPool2d(int window = 2) : window_(window) {}
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out) const;
  void append_signature(std::vector<std::uint32_t>& sig) const;

 private:
  int window_;
  Shape input_shape_;
  std::vector<std::uint32_t> argmax_;
};

/// conv(3x3, same) -> batch norm -> ReLU
class ConvBnRelu {
 public:
  ConvBnRelu(LayerParams& conv, LayerParams& bn, BatchNormSettings settings) : conv_(conv), bn_(bn, settings) {}
  Tensor forward(const Tensor& x, bool training);
  Tensor backward(const Tensor& grad_out, bool need_input_grad = true);
  void append_signature(std::vector<std::uint32_t>& sig) const { relu_.append_signature(sig); }

 private:
  Conv2d conv_;
  BatchNorm2d bn_;
  Relu relu_;
};

std::uint64_t hash_signature(const std::vector<std::uint32_t>& sig);

}  // namespace agn
