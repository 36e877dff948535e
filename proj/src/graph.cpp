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

#include "agn/graph.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <limits>
#include <queue>
#include <span>
#include <sstream>

#include "agn/error.hpp"
#include "agn/rng.hpp"

namespace agn {

namespace {

constexpr Real kInf = std::numeric_limits<Real>::infinity();

using QueueItem = std::pair<Real, std::size_t>;
using MinQueue = std::priority_queue<QueueItem, std::vector<QueueItem>, std::greater<>>;

void require_pixel(Pixel p, std::size_t h, std::size_t w, const char* context) {
  if (p.row >= h || p.col >= w)
    fail(ErrorCode::invalid_argument, std::string(context) + ": pixel (" + std::to_string(p.row) + "," +
                                          std::to_string(p.col) + ") outside " + std::to_string(h) + "x" +
                                          std::to_string(w) + " map");
}

}  // namespace

void GraphConfig::validate(std::size_t height, std::size_t width) const {
  require(delta >= 1, "graph: delta must be >= 1");
  require(connectivity == 4 || connectivity == 8, "graph: connectivity must be 4 or 8");
  require(!d_threshold || *d_threshold > 0, "graph: d_threshold must be positive");
  require(fmm_eps > 0, "graph: fmm_eps must be positive");
  require(min_degree > 0 && max_degree >= min_degree, "graph: invalid target degree range");
  const std::size_t cell = std::size_t{1} << delta;
  if (cell > std::min(height, width))
    fail(ErrorCode::invalid_argument, "graph: cell size " + std::to_string(cell) + " exceeds map " +
                                          std::to_string(height) + "x" + std::to_string(width));
}

std::pair<std::size_t, std::size_t> map_dims(const Tensor& prob) {
  if (prob.rank() == 2) return {prob.dim(0), prob.dim(1)};
  if (prob.rank() == 4 && prob.dim(0) == 1 && prob.dim(1) == 1) return {prob.dim(2), prob.dim(3)};
  fail(ErrorCode::shape_mismatch, "probability map must be [h,w] or [1,1,h,w], got " + shape_string(prob.shape()));
}

VertexSet sample_vertices(const Tensor& prob, const GraphConfig& cfg) {
  const auto [h, w] = map_dims(prob);
  cfg.validate(h, w);
  const std::size_t cell = std::size_t{1} << cfg.delta;
  VertexSet vs;
  vs.delta = cfg.delta;
  vs.height = h;
  vs.width = w;
  vs.grid_h = (h + cell - 1) / cell;
  vs.grid_w = (w + cell - 1) / cell;
  Rng rng(cfg.rng_seed);
  std::vector<Pixel> ties;
  for (std::size_t gy = 0; gy < vs.grid_h; ++gy)
    for (std::size_t gx = 0; gx < vs.grid_w; ++gx) {
      const std::size_t r0 = gy * cell, c0 = gx * cell;
      const std::size_t r1 = std::min(r0 + cell, h), c1 = std::min(c0 + cell, w);
      Real best = -kInf, lowest = kInf;
      for (std::size_t r = r0; r < r1; ++r)
        for (std::size_t c = c0; c < c1; ++c) {
          best = std::max(best, prob[r * w + c]);
          lowest = std::min(lowest, prob[r * w + c]);
        }
      if (best == lowest) {
        vs.positions.push_back({r0 + (r1 - r0) / 2, c0 + (c1 - c0) / 2});
        continue;
      }
      ties.clear();
      for (std::size_t r = r0; r < r1; ++r)
        for (std::size_t c = c0; c < c1; ++c)
          if (prob[r * w + c] == best) ties.push_back({r, c});
      vs.positions.push_back(ties.size() == 1 ? ties.front() : ties[uniform_index(rng, ties.size())]);
    }
  return vs;
}

namespace {

// Monotone radix heap keyed on the bit pattern of nonnegative doubles, whose
// integer order matches numeric order. Stale entries are skipped by the caller.
class RadixHeap {
 public:
  bool empty() const { return size_ == 0; }

  void push(Real key, std::uint32_t v) {
    const auto bits = std::bit_cast<std::uint64_t>(key);
    buckets_[bucket_of(bits)].push_back({bits, v});
    ++size_;
  }

  std::pair<Real, std::uint32_t> pop() {
    if (buckets_[0].empty()) {
      std::size_t i = 1;
      while (buckets_[i].empty()) ++i;
      auto& b = buckets_[i];
      std::uint64_t lowest = b.front().first;
      for (const auto& e : b) lowest = std::min(lowest, e.first);
      last_ = lowest;
      for (const auto& e : b) buckets_[bucket_of(e.first)].push_back(e);
      b.clear();
    }
    const auto e = buckets_[0].back();
    buckets_[0].pop_back();
    --size_;
    return {std::bit_cast<Real>(e.first), e.second};
  }

 private:
  std::size_t bucket_of(std::uint64_t bits) const {
    return bits == last_ ? 0 : 64 - static_cast<std::size_t>(std::countl_zero(bits ^ last_));
  }

  std::array<std::vector<std::pair<std::uint64_t, std::uint32_t>>, 65> buckets_;
  std::uint64_t last_ = 0;
  std::size_t size_ = 0;
};

}  // namespace

namespace {

// Dijkstra from `source`; when `targets` is non-empty the search stops once
// every listed pixel is settled (other entries may then be over-estimates).
std::vector<Real> dijkstra(const Tensor& prob, Pixel source, int connectivity, std::span<const std::uint32_t> targets) {
  const auto [h, w] = map_dims(prob);
  require_pixel(source, h, w, "geodesic_distances");
  require(connectivity == 4 || connectivity == 8, "geodesic_distances: connectivity must be 4 or 8");
  static constexpr int dr[8] = {-1, 1, 0, 0, -1, -1, 1, 1};
  static constexpr int dc[8] = {0, 0, -1, 1, -1, 1, -1, 1};
  std::vector<Real> dist(h * w, kInf);
  std::vector<std::uint8_t> state(h * w, 0);  // bit 0: settled, bit 1: pending target
  std::size_t pending = 0;
  for (auto t : targets)
    if (!(state[t] & 2)) state[t] |= 2, ++pending;
  const bool early_exit = !targets.empty();
  RadixHeap heap;
  const auto s = static_cast<std::uint32_t>(source.row * w + source.col);
  dist[s] = 0;
  heap.push(0, s);
  const Real* p = prob.data();
  const long H = static_cast<long>(h), W = static_cast<long>(w);
  while (!heap.empty()) {
    const auto [d, u] = heap.pop();
    if ((state[u] & 1) || d != dist[u]) continue;
    state[u] |= 1;
    if (state[u] & 2) {
      if (--pending == 0 && early_exit) break;
    }
    const long r = static_cast<long>(u) / W, c = static_cast<long>(u) % W;
    for (int k = 0; k < connectivity; ++k) {
      const long nr = r + dr[k], nc = c + dc[k];
      if (nr < 0 || nc < 0 || nr >= H || nc >= W) continue;
      const auto v = static_cast<std::uint32_t>(nr * W + nc);
      if (state[v] & 1) continue;
      const Real nd = d + std::abs(p[u] - p[v]);
      if (nd < dist[v]) {
        dist[v] = nd;
        heap.push(nd, v);
      }
    }
  }
  return dist;
}

}  // namespace

std::vector<Real> geodesic_distances(const Tensor& prob, Pixel source, int connectivity) {
  return dijkstra(prob, source, connectivity, {});
}

std::vector<Real> fmm_travel_time(const Tensor& prob, Pixel source, Real eps) {
  const auto [h, w] = map_dims(prob);
  require_pixel(source, h, w, "fmm_travel_time");
  require(eps > 0, "fmm_travel_time: eps must be positive");
  auto p = [&](std::size_t r, std::size_t c) { return prob[r * w + c]; };

  std::vector<Real> slowness(h * w);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) {
      Real gy = 0, gx = 0;
      if (h > 1) {
        const std::size_t a = r == 0 ? 0 : r - 1, b = r + 1 == h ? r : r + 1;
        gy = (p(b, c) - p(a, c)) / static_cast<Real>(b - a);
      }
      if (w > 1) {
        const std::size_t a = c == 0 ? 0 : c - 1, b = c + 1 == w ? c : c + 1;
        gx = (p(r, b) - p(r, a)) / static_cast<Real>(b - a);
      }
      slowness[r * w + c] = std::hypot(gx, gy) + eps;
    }

  std::vector<Real> t(h * w, kInf);
  std::vector<std::uint8_t> known(h * w, 0);
  MinQueue queue;
  const std::size_t s = source.row * w + source.col;
  t[s] = 0;
  queue.push({0, s});
  auto axis_min = [&](std::size_t r, std::size_t c, bool vertical) {
    Real m = kInf;
    if (vertical) {
      if (r > 0 && known[(r - 1) * w + c]) m = std::min(m, t[(r - 1) * w + c]);
      if (r + 1 < h && known[(r + 1) * w + c]) m = std::min(m, t[(r + 1) * w + c]);
    } else {
      if (c > 0 && known[r * w + c - 1]) m = std::min(m, t[r * w + c - 1]);
      if (c + 1 < w && known[r * w + c + 1]) m = std::min(m, t[r * w + c + 1]);
    }
    return m;
  };
  while (!queue.empty()) {
    const auto [d, u] = queue.top();
    queue.pop();
    if (known[u]) continue;
    known[u] = 1;
    const std::size_t r = u / w, c = u % w;
    const std::pair<long, long> nbrs[4] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
    for (auto [dr, dc] : nbrs) {
      const long nr = static_cast<long>(r) + dr, nc = static_cast<long>(c) + dc;
      if (nr < 0 || nc < 0 || nr >= static_cast<long>(h) || nc >= static_cast<long>(w)) continue;
      const std::size_t v = static_cast<std::size_t>(nr) * w + static_cast<std::size_t>(nc);
      if (known[v]) continue;
      const Real a = axis_min(static_cast<std::size_t>(nr), static_cast<std::size_t>(nc), true);
      const Real b = axis_min(static_cast<std::size_t>(nr), static_cast<std::size_t>(nc), false);
      const Real f = slowness[v];
      Real cand;
      if (std::isinf(a) || std::isinf(b) || std::abs(a - b) >= f) {
        cand = std::min(a, b) + f;
      } else {
        cand = 0.5 * (a + b + std::sqrt(2 * f * f - (a - b) * (a - b)));
      }
      if (cand < t[v]) {
        t[v] = cand;
        queue.push({cand, v});
      }
    }
  }
  return t;
}

Tensor vertex_distances(const Tensor& prob, const VertexSet& vertices, const GraphConfig& cfg) {
  const auto [h, w] = map_dims(prob);
  const std::size_t v = vertices.size();
  require(v > 0, "vertex_distances: empty vertex set");
  for (const auto& px : vertices.positions) require_pixel(px, h, w, "vertex_distances");
  Tensor dist({v, v});
  if (cfg.solver == GeodesicSolver::dijkstra) {
    // The metric is symmetric, so source i only needs targets j > i.
    std::vector<std::uint32_t> targets;
    for (std::size_t i = 0; i + 1 < v; ++i) {
      targets.clear();
      for (std::size_t j = i + 1; j < v; ++j) {
        const auto& q = vertices.positions[j];
        targets.push_back(static_cast<std::uint32_t>(q.row * w + q.col));
      }
      const auto field = dijkstra(prob, vertices.positions[i], cfg.connectivity, targets);
      for (std::size_t j = i + 1; j < v; ++j) dist[i * v + j] = dist[j * v + i] = field[targets[j - i - 1]];
    }
    return dist;
  }
  for (std::size_t i = 0; i < v; ++i) {
    const auto field = fmm_travel_time(prob, vertices.positions[i], cfg.fmm_eps);
    for (std::size_t j = 0; j < v; ++j) {
      const auto& q = vertices.positions[j];
      dist[i * v + j] = field[q.row * w + q.col];
    }
  }
  // Fast marching is not symmetric; keep the smaller direction.
  for (std::size_t i = 0; i < v; ++i) {
    dist[i * v + i] = 0;
    for (std::size_t j = i + 1; j < v; ++j) {
      const Real m = std::min(dist[i * v + j], dist[j * v + i]);
      dist[i * v + j] = dist[j * v + i] = m;
    }
  }
  return dist;
}

Real calibrate_threshold(const Tensor& distances, Real min_degree, Real max_degree) {
  const std::size_t v = distances.dim(0);
  std::vector<Real> pairs;
  for (std::size_t i = 0; i < v; ++i)
    for (std::size_t j = i + 1; j < v; ++j) pairs.push_back(distances[i * v + j]);
  if (pairs.empty()) return 1;
  std::sort(pairs.begin(), pairs.end());
  const Real target = std::sqrt(min_degree * max_degree);
  const Real nv = static_cast<Real>(v);
  Real best_d = std::nextafter(pairs.back(), kInf);
  Real best_gap = std::abs(2 * static_cast<Real>(pairs.size()) / nv - target);
  // Cutting at a distinct value u keeps exactly the pairs strictly below u.
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    if (k > 0 && pairs[k] == pairs[k - 1]) continue;
    if (pairs[k] <= 0) continue;
    const Real gap = std::abs(2 * static_cast<Real>(k) / nv - target);
    if (gap < best_gap) {
      best_gap = gap;
      best_d = pairs[k];
    }
  }
  return best_d;
}

Adjacency threshold_adjacency(const Tensor& distances, Real threshold) {
  require_rank(distances, 2, "threshold_adjacency");
  const std::size_t v = distances.dim(0);
  Adjacency adj = Adjacency::identity(v);
  for (std::size_t i = 0; i < v; ++i)
    for (std::size_t j = i + 1; j < v; ++j)
      if (distances[i * v + j] < threshold) adj.connect(i, j);
  return adj;
}

Adjacency build_adjacency(const Tensor& prob, const VertexSet& vertices, const GraphConfig& cfg,
                          Real* threshold_used) {
  const Tensor dist = vertex_distances(prob, vertices, cfg);
  const Real d = cfg.d_threshold ? *cfg.d_threshold : calibrate_threshold(dist, cfg.min_degree, cfg.max_degree);
  if (threshold_used) *threshold_used = d;
  return threshold_adjacency(dist, d);
}

Graph build_graph(const Tensor& prob, const GraphConfig& cfg) {
  Graph g;
  g.vertices = sample_vertices(prob, cfg);
  g.adjacency = build_adjacency(prob, g.vertices, cfg, &g.threshold);
  return g;
}

Tensor gather_features(const Tensor& features, const VertexSet& vertices) {
  require_rank(features, 4, "gather_features");
  require(features.dim(0) == 1, "gather_features: batch size must be 1");
  const std::size_t c = features.dim(1), h = features.dim(2), w = features.dim(3);
  require(!vertices.positions.empty(), "gather_features: empty vertex set");
  Tensor rows({vertices.size(), c});
  for (std::size_t k = 0; k < vertices.size(); ++k) {
    const Pixel p = vertices.positions[k];
    require_pixel(p, h, w, "gather_features");
    for (std::size_t ch = 0; ch < c; ++ch) rows[k * c + ch] = features[(ch * h + p.row) * w + p.col];
  }
  return rows;
}

Tensor gather_features_backward(const Tensor& grad_rows, const VertexSet& vertices, const Shape& feature_shape) {
  require_same_shape(grad_rows.shape(), Shape{vertices.size(), feature_shape.at(1)}, "gather_features_backward");
  Tensor g(feature_shape);
  const std::size_t c = feature_shape[1], h = feature_shape[2], w = feature_shape[3];
  for (std::size_t k = 0; k < vertices.size(); ++k) {
    const Pixel p = vertices.positions[k];
    for (std::size_t ch = 0; ch < c; ++ch) g[(ch * h + p.row) * w + p.col] += grad_rows[k * c + ch];
  }
  return g;
}

namespace {

std::size_t cell_index(const VertexSet& vs, std::size_t k) {
  const Pixel p = vs.positions[k];
  return (p.row >> vs.delta) * vs.grid_w + (p.col >> vs.delta);
}

}  // namespace

Tensor scatter_features(const Tensor& rows, const VertexSet& vertices) {
  require_rank(rows, 2, "scatter_features");
  const std::size_t cells = vertices.grid_h * vertices.grid_w;
  if (rows.dim(0) != cells || vertices.size() != cells)
    fail(ErrorCode::shape_mismatch, "scatter_features: " + std::to_string(rows.dim(0)) + " rows for a " +
                                        std::to_string(vertices.grid_h) + "x" + std::to_string(vertices.grid_w) +
                                        " grid");
  const std::size_t c = rows.dim(1);
  Tensor map({1, c, vertices.grid_h, vertices.grid_w});
  for (std::size_t k = 0; k < cells; ++k) {
    const std::size_t cell = cell_index(vertices, k);
    for (std::size_t ch = 0; ch < c; ++ch) map[ch * cells + cell] = rows[k * c + ch];
  }
  return map;
}

Tensor scatter_features_backward(const Tensor& grad_map, const VertexSet& vertices) {
  const std::size_t cells = vertices.grid_h * vertices.grid_w;
  require_rank(grad_map, 4, "scatter_features_backward");
  require(grad_map.dim(2) * grad_map.dim(3) == cells, "scatter_features_backward: grid mismatch");
  const std::size_t c = grad_map.dim(1);
  Tensor rows({vertices.size(), c});
  for (std::size_t k = 0; k < vertices.size(); ++k) {
    const std::size_t cell = cell_index(vertices, k);
    for (std::size_t ch = 0; ch < c; ++ch) rows[k * c + ch] = grad_map[ch * cells + cell];
  }
  return rows;
}

std::string dump_graph(const Graph& graph) {
  std::ostringstream os;
  const auto& adj = graph.adjacency;
  os << graph.vertices.size() << ' ' << adj.edge_count() << ' ' << graph.vertices.delta << '\n';
  for (const auto& p : graph.vertices.positions) os << p.row << ' ' << p.col << '\n';
  for (std::size_t i = 0; i < adj.size(); ++i)
    for (std::size_t j = i + 1; j < adj.size(); ++j)
      if (adj(i, j)) os << i << ' ' << j << '\n';
  return os.str();
}

}  // namespace agn
