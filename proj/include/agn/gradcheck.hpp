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
#include <functional>
#include <span>
#include <string>

#include "agn/tensor.hpp"

namespace agn {

struct GradCheckOptions {
  Real tolerance = 1e-4;
  std::size_t samples = 100;  // coordinates checked; all of them when the input is smaller
  Real step = 1e-5;
  std::uint64_t seed = 0;
  /// Optional fingerprint of the discrete forward state (argmax maps, ReLU
  /// masks). Coordinates whose perturbation changes it are skipped.
  std::function<std::uint64_t(const Tensor&)> signature;
};

struct GradCheckReport {
  bool passed = false;
  Real max_rel_error = 0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  std::size_t worst_index = 0;
  std::string message;
};

/// Compares `analytic` against central differences of the scalar function `f`
/// around `input`. Relative error uses max(|analytic|, |numeric|, 1e-8).
GradCheckReport check_gradient(const std::function<Real(const Tensor&)>& f, const Tensor& input,
                               std::span<const Real> analytic, const GradCheckOptions& options = {});

}  // namespace agn
