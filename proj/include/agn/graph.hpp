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

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "agn/adjacency.hpp"
#include "agn/tensor.hpp"

namespace agn {

enum class GeodesicSolver { dijkstra, fast_marching };

struct GraphConfig {
  int delta = 3;                      // cell edge is 2^delta pixels
  std::optional<Real> d_threshold;    // nullopt: calibrate per map
  int connectivity = 4;               // 4 or 8
  std::uint64_t rng_seed = 0;
  GeodesicSolver solver = GeodesicSolver::dijkstra;
  Real fmm_eps = 1e-3;
  // Auto-calibration aims for a mean vertex degree inside [min_degree, max_degree].
  Real min_degree = 2;
  Real max_degree = 8;

  void validate(std::size_t height, std::size_t width) const;
};

struct Pixel {
  std::size_t row = 0;
  std::size_t col = 0;
  auto operator<=>(const Pixel&) const = default;
};

struct VertexSet {
  std::vector<Pixel> positions;  // row-major cell order
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;
  int delta = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t size() const { return positions.size(); }
};

struct Graph {
  VertexSet vertices;
  Adjacency adjacency;
  Real threshold = 0;
};

/// Probability maps are [h,w] or [1,1,h,w] tensors.
std::pair<std::size_t, std::size_t> map_dims(const Tensor& prob);

/// One vertex per 2^delta cell: the brightest pixel, a seeded random pick among
/// tied maxima, or the cell center when the cell is constant.
VertexSet sample_vertices(const Tensor& prob, const GraphConfig& cfg);

/// Single-source minimal cumulative |p(a) - p(b)| over lattice paths.
std::vector<Real> geodesic_distances(const Tensor& prob, Pixel source, int connectivity = 4);

/// First-order fast marching arrival times with slowness |grad p| + eps.
/// Approximates the geodesic metric; not exact.
std::vector<Real> fmm_travel_time(const Tensor& prob, Pixel source, Real eps = 1e-3);

/// Symmetric [V,V] vertex distance matrix under the configured solver
/// (fast marching takes the smaller of the two directions).
Tensor vertex_distances(const Tensor& prob, const VertexSet& vertices, const GraphConfig& cfg);

/// Threshold whose strict cut gives a mean degree closest to the middle of
/// [min_degree, max_degree] (geometric mean).
Real calibrate_threshold(const Tensor& distances, Real min_degree, Real max_degree);

/// Edge (i,j) iff distance < threshold; self-loops always set.
Adjacency threshold_adjacency(const Tensor& distances, Real threshold);

Adjacency build_adjacency(const Tensor& prob, const VertexSet& vertices, const GraphConfig& cfg,
                          Real* threshold_used = nullptr);

Graph build_graph(const Tensor& prob, const GraphConfig& cfg);

/// Row k = channel vector of features [1,C,h,w] at vertex k.
Tensor gather_features(const Tensor& features, const VertexSet& vertices);
Tensor gather_features_backward(const Tensor& grad_rows, const VertexSet& vertices, const Shape& feature_shape);

/// Place row k at its cell in the reduced [1,C,grid_h,grid_w] map.
Tensor scatter_features(const Tensor& rows, const VertexSet& vertices);
Tensor scatter_features_backward(const Tensor& grad_map, const VertexSet& vertices);

/// Text dump: "V E delta", V lines "row col", E lines "i j" with i<j.
std::string dump_graph(const Graph& graph);

}  // namespace agn
