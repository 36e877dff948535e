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

#include "agn/adjacency.hpp"
#include "agn/params.hpp"
#include "agn/rng.hpp"
#include "agn/tensor.hpp"

namespace agn {

// Differentiable primitives. Each forward has a matching backward that
// accumulates parameter gradients into LayerParams and returns the gradient
// with respect to its input. All image tensors are NCHW.

struct ActivationConfig {
  Real leaky_slope = 0.2;
  Real elu_alpha = 1.0;
  void validate() const;
};

enum class Activation { relu, leaky_relu, elu, sigmoid };

Real activate(Real x, Activation kind, const ActivationConfig& cfg = {});
/// Derivative expressed through the pre-activation x and output y.
Real activate_derivative(Real x, Real y, Activation kind, const ActivationConfig& cfg = {});

Tensor activation(const Tensor& x, Activation kind, const ActivationConfig& cfg = {});
Tensor activation_backward(const Tensor& x, const Tensor& y, const Tensor& grad_out, Activation kind,
                           const ActivationConfig& cfg = {});

/// Kernel [C', C, k, k], optional bias [C'].
Tensor conv2d(const Tensor& input, const LayerParams& params, int stride, int padding);
Tensor conv2d_backward(const Tensor& input, LayerParams& params, int stride, int padding,
                       const Tensor& grad_out, bool need_input_grad = true);

/// Learnable upsampling by `factor`: kernel [C, C', 2f, 2f] (factor 1 uses a 2x2
/// kernel), stride f, cropping offset f/2, output extent exactly f times the input.
Tensor transpose_conv2d(const Tensor& input, const LayerParams& params, int factor);
Tensor transpose_conv2d_backward(const Tensor& input, LayerParams& params, int factor,
                                 const Tensor& grad_out);
int transpose_kernel_size(int factor);

struct BatchNormCache {
  Tensor normalized;
  std::vector<Real> inv_std;
  bool training = false;
};

/// weights = gamma [C], bias = beta [C]; running_mean/running_var required.
/// Running statistics follow running = momentum * running + (1 - momentum) * batch.
Tensor batchnorm2d(const Tensor& input, LayerParams& params, bool training, Real eps, Real momentum,
                   BatchNormCache* cache = nullptr);
Tensor batchnorm2d_backward(const BatchNormCache& cache, LayerParams& params, const Tensor& grad_out);

struct MaxPoolResult {
  Tensor output;
  std::vector<std::uint32_t> argmax;  // flat input index per output element
};

MaxPoolResult maxpool2d(const Tensor& input, int window);
Tensor maxpool2d_backward(const Shape& input_shape, const std::vector<std::uint32_t>& argmax,
                          const Tensor& grad_out);

Tensor upsample_nearest(const Tensor& input, int factor);
Tensor upsample_nearest_backward(const Tensor& grad_out, int factor);

/// Row softmax of a [V, V] score matrix restricted to mask entries; zeros elsewhere.
Tensor masked_row_softmax(const Tensor& scores, const Adjacency& mask);
Tensor masked_row_softmax_backward(const Tensor& alpha, const Adjacency& mask, const Tensor& grad_out);

inline constexpr Real kBceClamp = 1e-7;

/// Mean binary cross-entropy with predictions clamped to [1e-7, 1 - 1e-7].
Real bce_loss(const Tensor& pred, const Tensor& target);
/// Gradient w.r.t. pred (zero where the clamp is active).
Tensor bce_backward(const Tensor& pred, const Tensor& target);
/// Gradient w.r.t. the logits of pred = sigmoid(logit): (pred - target) / count.
Tensor bce_logit_backward(const Tensor& pred, const Tensor& target);

struct DropoutResult {
  Tensor output;
  std::vector<Real> scale;  // 0 or 1/(1-p) per element; empty when identity
};

/// Inverted dropout: identity in eval mode or when p == 0.
DropoutResult dropout(const Tensor& x, Real p, bool training, Rng& rng);
Tensor dropout_backward(const DropoutResult& fwd, const Tensor& grad_out);

struct AdamConfig {
  Real lr = 0.01;
  Real beta1 = 0.9;
  Real beta2 = 0.999;
  Real eps = 1e-8;
};

/// Bias-corrected Adam on weights and bias; gradients are left in place.
void adam_step(LayerParams& params, const AdamConfig& cfg);

}  // namespace agn
