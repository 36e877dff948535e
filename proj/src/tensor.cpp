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

#include "agn/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "agn/error.hpp"

namespace agn {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

Tensor::Tensor(Shape shape, Real fill) : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {
  for (auto d : shape_) require(d > 0, "tensor extents must be positive, got " + shape_string(shape_));
}

Tensor::Tensor(Shape shape, std::vector<Real> values) : shape_(std::move(shape)), data_(std::move(values)) {
  for (auto d : shape_) require(d > 0, "tensor extents must be positive, got " + shape_string(shape_));
  if (data_.size() != shape_numel(shape_))
    fail(ErrorCode::shape_mismatch, "tensor of shape " + shape_string(shape_) + " given " +
                                        std::to_string(data_.size()) + " values");
}

void Tensor::ensure_grad() {
  if (grad_.size() != data_.size()) grad_.assign(data_.size(), 0);
}

void Tensor::zero_grad() {
  if (!grad_.empty()) std::fill(grad_.begin(), grad_.end(), Real{0});
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != data_.size())
    fail(ErrorCode::shape_mismatch, "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  return Tensor(std::move(shape), data_);
}

void Tensor::fill(Real v) { std::fill(data_.begin(), data_.end(), v); }

void require_same_shape(const Shape& a, const Shape& b, const char* context) {
  if (a != b)
    fail(ErrorCode::shape_mismatch,
         std::string(context) + ": shape mismatch " + shape_string(a) + " vs " + shape_string(b));
}

void require_rank(const Tensor& t, std::size_t rank, const char* context) {
  if (t.rank() != rank)
    fail(ErrorCode::shape_mismatch, std::string(context) + ": expected rank " + std::to_string(rank) +
                                        ", got shape " + shape_string(t.shape()));
}

Tensor concat_channels(std::initializer_list<const Tensor*> parts) {
  require(parts.size() > 0, "concat_channels: no inputs");
  const Tensor& first = **parts.begin();
  require_rank(first, 4, "concat_channels");
  const std::size_t n = first.dim(0), h = first.dim(2), w = first.dim(3);
  std::size_t channels = 0;
  for (const Tensor* p : parts) {
    require_rank(*p, 4, "concat_channels");
    if (p->dim(0) != n || p->dim(2) != h || p->dim(3) != w)
      fail(ErrorCode::shape_mismatch, "concat_channels: shape mismatch " + shape_string(first.shape()) +
                                          " vs " + shape_string(p->shape()));
    channels += p->dim(1);
  }
  Tensor out({n, channels, h, w});
  const std::size_t plane = h * w;
  for (std::size_t b = 0; b < n; ++b) {
    Real* dst = out.data() + b * channels * plane;
    for (const Tensor* p : parts) {
      const std::size_t len = p->dim(1) * plane;
      std::copy_n(p->data() + b * len, len, dst);
      dst += len;
    }
  }
  return out;
}

std::vector<Tensor> split_channels(const Tensor& grad, std::span<const std::size_t> channels) {
  require_rank(grad, 4, "split_channels");
  const std::size_t n = grad.dim(0), h = grad.dim(2), w = grad.dim(3), plane = h * w;
  std::size_t total = 0;
  for (auto c : channels) total += c;
  if (total != grad.dim(1))
    fail(ErrorCode::shape_mismatch, "split_channels: channel counts do not sum to " + shape_string(grad.shape()));
  std::vector<Tensor> out;
  for (auto c : channels) out.emplace_back(Shape{n, c, h, w});
  for (std::size_t b = 0; b < n; ++b) {
    const Real* src = grad.data() + b * total * plane;
    for (std::size_t i = 0; i < channels.size(); ++i) {
      const std::size_t len = channels[i] * plane;
      std::copy_n(src, len, out[i].data() + b * len);
      src += len;
    }
  }
  return out;
}

}  // namespace agn
