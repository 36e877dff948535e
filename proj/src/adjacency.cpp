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

#include "agn/adjacency.hpp"

namespace agn {

bool Adjacency::symmetric() const {
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = i + 1; j < n_; ++j)
      if ((*this)(i, j) != (*this)(j, i)) return false;
  return true;
}

bool Adjacency::has_self_loops() const {
  for (std::size_t i = 0; i < n_; ++i)
    if (!(*this)(i, i)) return false;
  return true;
}

std::size_t Adjacency::edge_count() const {
  std::size_t e = 0;
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = i + 1; j < n_; ++j) e += (*this)(i, j) ? 1 : 0;
  return e;
}

double Adjacency::mean_degree() const {
  return n_ == 0 ? 0.0 : 2.0 * static_cast<double>(edge_count()) / static_cast<double>(n_);
}

Adjacency Adjacency::complete(std::size_t n) {
  Adjacency a(n);
  for (auto& b : a.bits_) b = 1;
  return a;
}

Adjacency Adjacency::identity(std::size_t n) {
  Adjacency a(n);
  for (std::size_t i = 0; i < n; ++i) a.set(i, i);
  return a;
}

}  // namespace agn
