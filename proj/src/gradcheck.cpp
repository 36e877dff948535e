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

#include "agn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "agn/error.hpp"
#include "agn/rng.hpp"

namespace agn {

GradCheckReport check_gradient(const std::function<Real(const Tensor&)>& f, const Tensor& input,
                               std::span<const Real> analytic, const GradCheckOptions& options) {
  if (analytic.size() != input.size())
    fail(ErrorCode::shape_mismatch, "check_gradient: analytic gradient has " + std::to_string(analytic.size()) +
                                        " entries for input " + shape_string(input.shape()));
  GradCheckReport report;
  std::vector<std::size_t> coords(input.size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (coords.size() > options.samples) {
    Rng rng(options.seed);
    shuffle(coords.begin(), coords.end(), rng);
    coords.resize(options.samples);
    std::sort(coords.begin(), coords.end());
  }

  const std::uint64_t base_sig = options.signature ? options.signature(input) : 0;
  Tensor probe = input;
  Real worst_analytic = 0, worst_numeric = 0;
  for (std::size_t idx : coords) {
    const Real orig = probe[idx];
    probe[idx] = orig + options.step;
    const bool flip_plus = options.signature && options.signature(probe) != base_sig;
    const Real fp = flip_plus ? 0 : f(probe);
    probe[idx] = orig - options.step;
    const bool flip_minus = options.signature && options.signature(probe) != base_sig;
    const Real fm = (flip_plus || flip_minus) ? 0 : f(probe);
    probe[idx] = orig;
    if (flip_plus || flip_minus) {
      ++report.skipped;
      continue;
    }
    const Real numeric = (fp - fm) / (2 * options.step);
    const Real a = analytic[idx];
    if (!std::isfinite(numeric) || !std::isfinite(a)) {
      std::ostringstream os;
      os << "non-finite value at coordinate " << idx << " (analytic " << a << ", numeric " << numeric << ")";
      report.message = os.str();
      report.passed = false;
      report.worst_index = idx;
      return report;
    }
    const Real denom = std::max({std::abs(a), std::abs(numeric), Real{1e-8}});
    const Real rel = std::abs(a - numeric) / denom;
    if (report.checked == 0 || rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_index = idx;
      worst_analytic = a;
      worst_numeric = numeric;
    }
    ++report.checked;
  }
  report.passed = report.checked > 0 && report.max_rel_error < options.tolerance;
  std::ostringstream os;
  os << "max relative error " << report.max_rel_error << " at coordinate " << report.worst_index << " (analytic "
     << worst_analytic << ", numeric " << worst_numeric << ") over " << report.checked << " coordinates ("
     << report.skipped << " skipped)";
  report.message = os.str();
  return report;
}

}  // namespace agn
