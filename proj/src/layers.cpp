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

#include "agn/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "agn/error.hpp"

namespace agn {
namespace {

using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

struct Geometry {
  std::size_t channels, height, width;  // image side
  int kernel, stride, pad;
  std::size_t out_h, out_w;             // window positions
};

// Valid output range [lo, hi) for which 0 <= o*stride - pad + k < extent.
std::pair<long, long> valid_range(long out, long stride, long pad, long k, long extent) {
  long lo = 0;
  while (lo < out && lo * stride - pad + k < 0) ++lo;
  long hi = out;
  while (hi > lo && (hi - 1) * stride - pad + k >= extent) --hi;
  return {lo, hi};
}

// cols[(c*k + ki)*k + kj][oy*out_w + ox] = img[c][oy*s - p + ki][ox*s - p + kj]
void im2col(const Real* img, const Geometry& g, Real* cols) {
  const std::size_t positions = g.out_h * g.out_w;
  const long H = static_cast<long>(g.height), W = static_cast<long>(g.width);
  const long oh = static_cast<long>(g.out_h), ow = static_cast<long>(g.out_w);
  for (std::size_t c = 0; c < g.channels; ++c)
    for (int ki = 0; ki < g.kernel; ++ki) {
      const auto [ylo, yhi] = valid_range(oh, g.stride, g.pad, ki, H);
      for (int kj = 0; kj < g.kernel; ++kj) {
        const auto [xlo, xhi] = valid_range(ow, g.stride, g.pad, kj, W);
        Real* row = cols + ((c * g.kernel + ki) * g.kernel + kj) * positions;
        const Real* plane = img + c * g.height * g.width;
        for (long oy = 0; oy < oh; ++oy) {
          Real* dst = row + oy * ow;
          if (oy < ylo || oy >= yhi || xlo >= xhi) {
            std::fill_n(dst, ow, Real{0});
            continue;
          }
          const Real* src = plane + (oy * g.stride - g.pad + ki) * W - g.pad + kj;
          std::fill(dst, dst + xlo, Real{0});
          if (g.stride == 1) {
            std::copy(src + xlo, src + xhi, dst + xlo);
          } else {
            for (long ox = xlo; ox < xhi; ++ox) dst[ox] = src[ox * g.stride];
          }
          std::fill(dst + xhi, dst + ow, Real{0});
        }
      }
    }
}

// Adjoint of im2col: scatter-add columns back into the image.
void col2im(const Real* cols, const Geometry& g, Real* img) {
  const std::size_t positions = g.out_h * g.out_w;
  const long H = static_cast<long>(g.height), W = static_cast<long>(g.width);
  const long oh = static_cast<long>(g.out_h), ow = static_cast<long>(g.out_w);
  for (std::size_t c = 0; c < g.channels; ++c)
    for (int ki = 0; ki < g.kernel; ++ki) {
      const auto [ylo, yhi] = valid_range(oh, g.stride, g.pad, ki, H);
      for (int kj = 0; kj < g.kernel; ++kj) {
        const auto [xlo, xhi] = valid_range(ow, g.stride, g.pad, kj, W);
        const Real* row = cols + ((c * g.kernel + ki) * g.kernel + kj) * positions;
        Real* plane = img + c * g.height * g.width;
        for (long oy = ylo; oy < yhi; ++oy) {
          Real* dst = plane + (oy * g.stride - g.pad + ki) * W - g.pad + kj;
          const Real* src = row + oy * ow;
          if (g.stride == 1) {
            for (long ox = xlo; ox < xhi; ++ox) dst[ox] += src[ox];
          } else {
            for (long ox = xlo; ox < xhi; ++ox) dst[ox * g.stride] += src[ox];
          }
        }
      }
    }
}

// Per-thread scratch reused across calls; contents are always overwritten.
Real* scratch(int slot, std::size_t n) {
  thread_local std::vector<Real> buffers[2];
  auto& b = buffers[slot];
  if (b.size() < n) b.resize(n);
  return b.data();
}

bool is_pointwise(const Geometry& g) { return g.kernel == 1 && g.stride == 1 && g.pad == 0; }

void add_bias(Real* out, const Tensor& bias, std::size_t plane) {
  for (std::size_t c = 0; c < bias.size(); ++c) {
    Real* p = out + c * plane;
    const Real b = bias[c];
    for (std::size_t i = 0; i < plane; ++i) p[i] += b;
  }
}

void accumulate_bias_grad(const Real* grad_out, Tensor& bias, std::size_t plane) {
  auto g = bias.grad();
  for (std::size_t c = 0; c < bias.size(); ++c) {
    const Real* p = grad_out + c * plane;
    Real s = 0;
    for (std::size_t i = 0; i < plane; ++i) s += p[i];
    g[c] += s;
  }
}

void require_finite_grad(LayerParams& p) {
  p.weights.ensure_grad();
  if (p.bias) p.bias->ensure_grad();
}

}  // namespace

// ---------------------------------------------------------------- activations

void ActivationConfig::validate() const {
  require(leaky_slope > 0 && leaky_slope < 1, "leaky_slope must lie in (0,1)");
  require(elu_alpha > 0, "elu_alpha must be positive");
}

Real activate(Real x, Activation kind, const ActivationConfig& cfg) {
  switch (kind) {
    case Activation::relu: return x > 0 ? x : Real{0};
    case Activation::leaky_relu: return x > 0 ? x : cfg.leaky_slope * x;
    case Activation::elu: return x > 0 ? x : cfg.elu_alpha * std::expm1(x);
    case Activation::sigmoid:
      if (x >= 0) return 1 / (1 + std::exp(-x));
      else {
        const Real e = std::exp(x);
        return e / (1 + e);
      }
  }
  return x;
}

Real activate_derivative(Real x, Real y, Activation kind, const ActivationConfig& cfg) {
  switch (kind) {
    case Activation::relu: return x > 0 ? Real{1} : Real{0};
    case Activation::leaky_relu: return x > 0 ? Real{1} : cfg.leaky_slope;
    case Activation::elu: return x > 0 ? Real{1} : y + cfg.elu_alpha;
    case Activation::sigmoid: return y * (1 - y);
  }
  return 1;
}

Tensor activation(const Tensor& x, Activation kind, const ActivationConfig& cfg) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = activate(x[i], kind, cfg);
  return y;
}

Tensor activation_backward(const Tensor& x, const Tensor& y, const Tensor& grad_out, Activation kind,
                           const ActivationConfig& cfg) {
  require_same_shape(x.shape(), grad_out.shape(), "activation_backward");
  Tensor g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = grad_out[i] * activate_derivative(x[i], y[i], kind, cfg);
  return g;
}

// ---------------------------------------------------------------- conv2d

namespace {

Geometry conv_geometry(const Tensor& input, const LayerParams& params, int stride, int padding) {
  require_rank(input, 4, "conv2d input");
  require_rank(params.weights, 4, "conv2d kernel");
  const Shape& ks = params.weights.shape();
  if (ks[1] != input.dim(1))
    fail(ErrorCode::shape_mismatch, "conv2d '" + params.name + "': input " + shape_string(input.shape()) +
                                        " has " + std::to_string(input.dim(1)) + " channels but kernel " +
                                        shape_string(ks) + " expects " + std::to_string(ks[1]));
  require(ks[2] == ks[3], "conv2d: kernel must be square");
  require(stride >= 1 && padding >= 0, "conv2d: stride must be >= 1 and padding >= 0");
  const int k = static_cast<int>(ks[2]);
  const long hp = static_cast<long>(input.dim(2)) + 2 * padding, wp = static_cast<long>(input.dim(3)) + 2 * padding;
  if (hp < k || wp < k)
    fail(ErrorCode::shape_mismatch, "conv2d '" + params.name + "': padded input " + shape_string(input.shape()) +
                                        " smaller than kernel " + shape_string(ks));
  return Geometry{input.dim(1), input.dim(2), input.dim(3), k, stride, padding,
                  static_cast<std::size_t>((hp - k) / stride + 1), static_cast<std::size_t>((wp - k) / stride + 1)};
}

}  // namespace

Tensor conv2d(const Tensor& input, const LayerParams& params, int stride, int padding) {
  const Geometry g = conv_geometry(input, params, stride, padding);
  const std::size_t n = input.dim(0), cout = params.weights.dim(0);
  const std::size_t inner = g.channels * g.kernel * g.kernel, positions = g.out_h * g.out_w;
  if (params.bias && params.bias->size() != cout)
    fail(ErrorCode::shape_mismatch, "conv2d '" + params.name + "': bias " + shape_string(params.bias->shape()) +
                                        " does not match kernel " + shape_string(params.weights.shape()));
  Tensor out({n, cout, g.out_h, g.out_w});
  Real* cols = is_pointwise(g) ? nullptr : scratch(0, inner * positions);
  ConstMatMap wmat(params.weights.data(), cout, inner);
  for (std::size_t b = 0; b < n; ++b) {
    const Real* img = input.data() + b * g.channels * g.height * g.width;
    if (cols) im2col(img, g, cols);
    ConstMatMap cmat(cols ? cols : img, inner, positions);
    MatMap omat(out.data() + b * cout * positions, cout, positions);
    omat.noalias() = wmat * cmat;
    if (params.bias) add_bias(omat.data(), *params.bias, positions);
  }
  return out;
}

Tensor conv2d_backward(const Tensor& input, LayerParams& params, int stride, int padding, const Tensor& grad_out,
                       bool need_input_grad) {
  const Geometry g = conv_geometry(input, params, stride, padding);
  const std::size_t n = input.dim(0), cout = params.weights.dim(0);
  const std::size_t inner = g.channels * g.kernel * g.kernel, positions = g.out_h * g.out_w;
  require_same_shape(grad_out.shape(), Shape{n, cout, g.out_h, g.out_w}, "conv2d_backward");
  require_finite_grad(params);
  Tensor grad_in;
  if (need_input_grad) grad_in = Tensor(input.shape());
  Real* cols = is_pointwise(g) ? nullptr : scratch(0, inner * positions);
  Real* gcols = is_pointwise(g) ? nullptr : scratch(1, inner * positions);
  ConstMatMap wmat(params.weights.data(), cout, inner);
  MatMap gw(params.weights.grad().data(), cout, inner);
  for (std::size_t b = 0; b < n; ++b) {
    const Real* img = input.data() + b * g.channels * g.height * g.width;
    if (cols) im2col(img, g, cols);
    ConstMatMap cmat(cols ? cols : img, inner, positions);
    ConstMatMap gy(grad_out.data() + b * cout * positions, cout, positions);
    gw.noalias() += gy * cmat.transpose();
    if (params.bias) accumulate_bias_grad(gy.data(), *params.bias, positions);
    if (!need_input_grad) continue;
    Real* gimg = grad_in.data() + b * g.channels * g.height * g.width;
    if (is_pointwise(g)) {
      MatMap gx(gimg, inner, positions);
      gx.noalias() = wmat.transpose() * gy;
    } else {
      MatMap gc(gcols, inner, positions);
      gc.noalias() = wmat.transpose() * gy;
      col2im(gcols, g, gimg);
    }
  }
  return grad_in;
}

// ---------------------------------------------------------------- transpose conv

int transpose_kernel_size(int factor) { return factor == 1 ? 2 : 2 * factor; }

namespace {

// Geometry of the adjoint convolution: image = output, window positions = input pixels.
Geometry transpose_geometry(const Tensor& input, const LayerParams& params, int factor) {
  require(factor >= 1, "transpose_conv2d: factor must be >= 1");
  if (factor != 1 && factor % 2 != 0)
    fail(ErrorCode::invalid_argument, "transpose_conv2d: odd factor " + std::to_string(factor) + " not supported");
  require_rank(input, 4, "transpose_conv2d input");
  require_rank(params.weights, 4, "transpose_conv2d kernel");
  const Shape& ks = params.weights.shape();
  const int k = transpose_kernel_size(factor);
  if (ks[0] != input.dim(1) || ks[2] != static_cast<std::size_t>(k) || ks[3] != static_cast<std::size_t>(k))
    fail(ErrorCode::shape_mismatch, "transpose_conv2d '" + params.name + "': input " + shape_string(input.shape()) +
                                        " incompatible with kernel " + shape_string(ks) + " for factor " +
                                        std::to_string(factor));
  return Geometry{ks[1], input.dim(2) * factor, input.dim(3) * factor, k, factor, factor / 2,
                  input.dim(2), input.dim(3)};
}

}  // namespace

Tensor transpose_conv2d(const Tensor& input, const LayerParams& params, int factor) {
  const Geometry g = transpose_geometry(input, params, factor);
  const std::size_t n = input.dim(0), cin = input.dim(1), cout = g.channels;
  const std::size_t inner = cout * g.kernel * g.kernel, positions = g.out_h * g.out_w;
  Tensor out({n, cout, g.height, g.width});
  Real* cols = scratch(0, inner * positions);
  ConstMatMap wmat(params.weights.data(), cin, inner);
  for (std::size_t b = 0; b < n; ++b) {
    ConstMatMap x(input.data() + b * cin * positions, cin, positions);
    MatMap c(cols, inner, positions);
    c.noalias() = wmat.transpose() * x;
    Real* img = out.data() + b * cout * g.height * g.width;
    col2im(cols, g, img);
    if (params.bias) add_bias(img, *params.bias, g.height * g.width);
  }
  return out;
}

Tensor transpose_conv2d_backward(const Tensor& input, LayerParams& params, int factor, const Tensor& grad_out) {
  const Geometry g = transpose_geometry(input, params, factor);
  const std::size_t n = input.dim(0), cin = input.dim(1), cout = g.channels;
  const std::size_t inner = cout * g.kernel * g.kernel, positions = g.out_h * g.out_w;
  require_same_shape(grad_out.shape(), Shape{n, cout, g.height, g.width}, "transpose_conv2d_backward");
  require_finite_grad(params);
  Tensor grad_in(input.shape());
  Real* gcols = scratch(1, inner * positions);
  ConstMatMap wmat(params.weights.data(), cin, inner);
  MatMap gw(params.weights.grad().data(), cin, inner);
  for (std::size_t b = 0; b < n; ++b) {
    const Real* gimg = grad_out.data() + b * cout * g.height * g.width;
    im2col(gimg, g, gcols);
    ConstMatMap gc(gcols, inner, positions);
    ConstMatMap x(input.data() + b * cin * positions, cin, positions);
    gw.noalias() += x * gc.transpose();
    MatMap gx(grad_in.data() + b * cin * positions, cin, positions);
    gx.noalias() = wmat * gc;
    if (params.bias) accumulate_bias_grad(gimg, *params.bias, g.height * g.width);
  }
  return grad_in;
}

// ---------------------------------------------------------------- batch norm

Tensor batchnorm2d(const Tensor& input, LayerParams& params, bool training, Real eps, Real momentum,
                   BatchNormCache* cache) {
  require_rank(input, 4, "batchnorm2d input");
  const std::size_t n = input.dim(0), c = input.dim(1), plane = input.dim(2) * input.dim(3);
  const std::size_t count = n * plane;
  if (params.weights.size() != c || !params.bias || !params.running_mean || !params.running_var)
    fail(ErrorCode::shape_mismatch, "batchnorm2d '" + params.name + "': parameters " +
                                        shape_string(params.weights.shape()) + " do not match input " +
                                        shape_string(input.shape()));
  if (training && count < 2)
    fail(ErrorCode::invalid_argument,
         "batchnorm2d '" + params.name + "': training mode needs more than one value per channel, got input " +
             shape_string(input.shape()));

  Tensor out(input.shape());
  Tensor normalized(input.shape());
  std::vector<Real> inv_std(c);
  auto& rm = *params.running_mean;
  auto& rv = *params.running_var;
  for (std::size_t ch = 0; ch < c; ++ch) {
    Real mean, var;
    if (training) {
      Real s = 0;
      for (std::size_t b = 0; b < n; ++b) {
        const Real* p = input.data() + (b * c + ch) * plane;
        for (std::size_t i = 0; i < plane; ++i) s += p[i];
      }
      mean = s / static_cast<Real>(count);
      Real ss = 0;
      for (std::size_t b = 0; b < n; ++b) {
        const Real* p = input.data() + (b * c + ch) * plane;
        for (std::size_t i = 0; i < plane; ++i) ss += (p[i] - mean) * (p[i] - mean);
      }
      var = ss / static_cast<Real>(count);
      const Real unbiased = ss / static_cast<Real>(count - 1);
      rm[ch] = momentum * rm[ch] + (1 - momentum) * mean;
      rv[ch] = momentum * rv[ch] + (1 - momentum) * unbiased;
    } else {
      mean = rm[ch];
      var = rv[ch];
    }
    const Real is = 1 / std::sqrt(var + eps);
    inv_std[ch] = is;
    const Real gamma = params.weights[ch], beta = (*params.bias)[ch];
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t off = (b * c + ch) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const Real xh = (input[off + i] - mean) * is;
        normalized[off + i] = xh;
        out[off + i] = gamma * xh + beta;
      }
    }
  }
  if (cache) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
    cache->training = training;
  }
  return out;
}

Tensor batchnorm2d_backward(const BatchNormCache& cache, LayerParams& params, const Tensor& grad_out) {
  const Tensor& xh = cache.normalized;
  require_same_shape(xh.shape(), grad_out.shape(), "batchnorm2d_backward");
  require_finite_grad(params);
  const std::size_t n = xh.dim(0), c = xh.dim(1), plane = xh.dim(2) * xh.dim(3);
  const Real count = static_cast<Real>(n * plane);
  Tensor grad_in(xh.shape());
  auto ggamma = params.weights.grad();
  auto gbeta = params.bias->grad();
  for (std::size_t ch = 0; ch < c; ++ch) {
    Real sum_g = 0, sum_gx = 0;
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t off = (b * c + ch) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        sum_g += grad_out[off + i];
        sum_gx += grad_out[off + i] * xh[off + i];
      }
    }
    ggamma[ch] += sum_gx;
    gbeta[ch] += sum_g;
    const Real scale = params.weights[ch] * cache.inv_std[ch];
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t off = (b * c + ch) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        if (cache.training)
          grad_in[off + i] = scale * (grad_out[off + i] - sum_g / count - xh[off + i] * sum_gx / count);
        else
          grad_in[off + i] = scale * grad_out[off + i];
      }
    }
  }
  return grad_in;
}

// ---------------------------------------------------------------- pooling / upsampling

MaxPoolResult maxpool2d(const Tensor& input, int window) {
  require_rank(input, 4, "maxpool2d input");
  require(window >= 1, "maxpool2d: window must be >= 1");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const auto win = static_cast<std::size_t>(window);
  if (h % win != 0 || w % win != 0)
    fail(ErrorCode::shape_mismatch, "maxpool2d: input " + shape_string(input.shape()) +
                                        " not divisible by window " + std::to_string(window));
  const std::size_t oh = h / win, ow = w / win;
  MaxPoolResult r{Tensor({n, c, oh, ow}), std::vector<std::uint32_t>(n * c * oh * ow)};
  std::size_t o = 0;
  for (std::size_t nc = 0; nc < n * c; ++nc) {
    const std::size_t base = nc * h * w;
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox, ++o) {
        std::size_t best = base + (oy * win) * w + ox * win;
        for (std::size_t dy = 0; dy < win; ++dy)
          for (std::size_t dx = 0; dx < win; ++dx) {
            const std::size_t idx = base + (oy * win + dy) * w + ox * win + dx;
            if (input[idx] > input[best]) best = idx;
          }
        r.output[o] = input[best];
        r.argmax[o] = static_cast<std::uint32_t>(best);
      }
  }
  return r;
}

Tensor maxpool2d_backward(const Shape& input_shape, const std::vector<std::uint32_t>& argmax, const Tensor& grad_out) {
  if (argmax.size() != grad_out.size())
    fail(ErrorCode::shape_mismatch, "maxpool2d_backward: gradient " + shape_string(grad_out.shape()) +
                                        " does not match stored argmax map");
  Tensor g(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) g[argmax[i]] += grad_out[i];
  return g;
}

Tensor upsample_nearest(const Tensor& input, int factor) {
  require(factor >= 1, "upsample_nearest: factor must be >= 1, got " + std::to_string(factor));
  require_rank(input, 4, "upsample_nearest input");
  const auto f = static_cast<std::size_t>(factor);
  const std::size_t nc = input.dim(0) * input.dim(1), h = input.dim(2), w = input.dim(3);
  Tensor out({input.dim(0), input.dim(1), h * f, w * f});
  for (std::size_t p = 0; p < nc; ++p)
    for (std::size_t y = 0; y < h * f; ++y) {
      const Real* src = input.data() + (p * h + y / f) * w;
      Real* dst = out.data() + (p * h * f + y) * w * f;
      for (std::size_t x = 0; x < w * f; ++x) dst[x] = src[x / f];
    }
  return out;
}

Tensor upsample_nearest_backward(const Tensor& grad_out, int factor) {
  require(factor >= 1, "upsample_nearest_backward: factor must be >= 1");
  require_rank(grad_out, 4, "upsample_nearest_backward");
  const auto f = static_cast<std::size_t>(factor);
  require(grad_out.dim(2) % f == 0 && grad_out.dim(3) % f == 0, "upsample_nearest_backward: extent not divisible");
  const std::size_t nc = grad_out.dim(0) * grad_out.dim(1), h = grad_out.dim(2) / f, w = grad_out.dim(3) / f;
  Tensor g({grad_out.dim(0), grad_out.dim(1), h, w});
  for (std::size_t p = 0; p < nc; ++p)
    for (std::size_t y = 0; y < h * f; ++y) {
      const Real* src = grad_out.data() + (p * h * f + y) * w * f;
      Real* dst = g.data() + (p * h + y / f) * w;
      for (std::size_t x = 0; x < w * f; ++x) dst[x / f] += src[x];
    }
  return g;
}

// ---------------------------------------------------------------- softmax

Tensor masked_row_softmax(const Tensor& scores, const Adjacency& mask) {
  require_rank(scores, 2, "masked_row_softmax");
  const std::size_t v = scores.dim(0);
  if (scores.dim(1) != v || mask.size() != v)
    fail(ErrorCode::shape_mismatch, "masked_row_softmax: scores " + shape_string(scores.shape()) +
                                        " vs mask of size " + std::to_string(mask.size()));
  Tensor alpha({v, v});
  std::vector<Real> terms;
  for (std::size_t i = 0; i < v; ++i) {
    Real mx = -std::numeric_limits<Real>::infinity();
    bool any = false;
    for (std::size_t j = 0; j < v; ++j)
      if (mask(i, j)) {
        mx = std::max(mx, scores[i * v + j]);
        any = true;
      }
    if (!any) fail(ErrorCode::invalid_argument, "masked_row_softmax: row " + std::to_string(i) + " has no neighbors");
    terms.clear();
    for (std::size_t j = 0; j < v; ++j)
      if (mask(i, j)) {
        const Real e = std::exp(scores[i * v + j] - mx);
        alpha[i * v + j] = e;
        terms.push_back(e);
      }
    // Sorted summation makes the row result independent of vertex numbering.
    std::sort(terms.begin(), terms.end());
    Real denom = 0;
    for (Real t : terms) denom += t;
    for (std::size_t j = 0; j < v; ++j)
      if (mask(i, j)) alpha[i * v + j] /= denom;
  }
  return alpha;
}

Tensor masked_row_softmax_backward(const Tensor& alpha, const Adjacency& mask, const Tensor& grad_out) {
  require_same_shape(alpha.shape(), grad_out.shape(), "masked_row_softmax_backward");
  const std::size_t v = alpha.dim(0);
  Tensor g({v, v});
  for (std::size_t i = 0; i < v; ++i) {
    Real dot = 0;
    for (std::size_t j = 0; j < v; ++j)
      if (mask(i, j)) dot += alpha[i * v + j] * grad_out[i * v + j];
    for (std::size_t j = 0; j < v; ++j)
      if (mask(i, j)) g[i * v + j] = alpha[i * v + j] * (grad_out[i * v + j] - dot);
  }
  return g;
}

// ---------------------------------------------------------------- loss

Real bce_loss(const Tensor& pred, const Tensor& target) {
  require_same_shape(pred.shape(), target.shape(), "bce_loss");
  require(pred.size() > 0, "bce_loss: empty input");
  long double sum = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const long double p = std::clamp(pred[i], kBceClamp, 1 - kBceClamp);
    const long double y = target[i];
    sum -= y * std::log(p) + (1 - y) * std::log1p(-p);
  }
  return static_cast<Real>(sum / static_cast<long double>(pred.size()));
}

Tensor bce_backward(const Tensor& pred, const Tensor& target) {
  require_same_shape(pred.shape(), target.shape(), "bce_backward");
  Tensor g(pred.shape());
  const Real inv_n = 1 / static_cast<Real>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const Real p = pred[i];
    if (p < kBceClamp || p > 1 - kBceClamp) continue;
    const Real y = target[i];
    g[i] = -(y / p - (1 - y) / (1 - p)) * inv_n;
  }
  return g;
}

Tensor bce_logit_backward(const Tensor& pred, const Tensor& target) {
  require_same_shape(pred.shape(), target.shape(), "bce_logit_backward");
  Tensor g(pred.shape());
  const Real inv_n = 1 / static_cast<Real>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) g[i] = (pred[i] - target[i]) * inv_n;
  return g;
}

// ---------------------------------------------------------------- dropout

DropoutResult dropout(const Tensor& x, Real p, bool training, Rng& rng) {
  if (!(p >= 0 && p < 1))
    fail(ErrorCode::invalid_argument, "dropout: probability must lie in [0,1), got " + std::to_string(p));
  if (!training || p == 0) return DropoutResult{x, {}};
  DropoutResult r{Tensor(x.shape()), std::vector<Real>(x.size())};
  const Real keep = 1 / (1 - p);
  for (std::size_t i = 0; i < x.size(); ++i) {
    r.scale[i] = uniform01(rng) < p ? Real{0} : keep;
    r.output[i] = x[i] * r.scale[i];
  }
  return r;
}

Tensor dropout_backward(const DropoutResult& fwd, const Tensor& grad_out) {
  if (fwd.scale.empty()) return grad_out;
  require_same_shape(fwd.output.shape(), grad_out.shape(), "dropout_backward");
  Tensor g(grad_out.shape());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = grad_out[i] * fwd.scale[i];
  return g;
}

// ---------------------------------------------------------------- adam

namespace {

void adam_update(Tensor& w, Tensor& m, Tensor& v, const AdamConfig& cfg, Real c1, Real c2) {
  auto g = w.grad();
  for (std::size_t i = 0; i < w.size(); ++i) {
    m[i] = cfg.beta1 * m[i] + (1 - cfg.beta1) * g[i];
    v[i] = cfg.beta2 * v[i] + (1 - cfg.beta2) * g[i] * g[i];
    const Real mhat = m[i] / c1, vhat = v[i] / c2;
    w[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

}  // namespace

void adam_step(LayerParams& params, const AdamConfig& cfg) {
  require_finite_grad(params);
  params.step_count += 1;
  const Real t = static_cast<Real>(params.step_count);
  const Real c1 = 1 - std::pow(cfg.beta1, t), c2 = 1 - std::pow(cfg.beta2, t);
  adam_update(params.weights, params.adam_m, params.adam_v, cfg, c1, c2);
  if (params.bias) adam_update(*params.bias, *params.bias_m, *params.bias_v, cfg, c1, c2);
}

}  // namespace agn
