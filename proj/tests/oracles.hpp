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

// Independent reference implementations used by the unit and acceptance tests.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "agn/gradcheck.hpp"
#include "agn/graph.hpp"
#include "agn/params.hpp"
#include "agn/rng.hpp"

namespace oracle {

using agn::Real;
using agn::Tensor;

Tensor random_tensor(const agn::Shape& shape, std::uint64_t seed, Real lo = -1, Real hi = 1);

/// Direct nested-loop convolution with zero padding.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor* bias, int stride, int padding);

/// Window enumeration max-pool.
Tensor maxpool2d(const Tensor& input, int window);

/// exp(e_ij) / sum over allowed k of exp(e_ik), without max subtraction.
Tensor masked_softmax(const Tensor& scores, const agn::Adjacency& mask);

/// Minimal cumulative |p(a)-p(b)| over every simple lattice path (tiny maps only).
std::vector<Real> simple_path_distances(const Tensor& prob, agn::Pixel source, int connectivity);

/// Spearman rank correlation.
Real rank_correlation(const std::vector<Real>& a, const std::vector<Real>& b);

struct GradCase {
  std::string name;
  /// Runs every gradient check of the case for one seed; one report per checked tensor.
  std::function<std::vector<std::pair<std::string, agn::GradCheckReport>>(std::uint64_t seed)> run;
};

/// Every differentiable operation plus the tiny CNN and joint models.
std::vector<GradCase> gradient_suite();

}  // namespace oracle
