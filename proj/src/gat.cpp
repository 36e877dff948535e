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

#include "agn/gat.hpp"

#include <algorithm>
#include <cmath>

#include "agn/error.hpp"

namespace agn {

namespace {

Real sorted_sum(std::vector<Real>& terms) {
  std::sort(terms.begin(), terms.end());
  Real s = 0;
  for (Real t : terms) s += t;
  return s;
}

}  // namespace

void GatConfig::validate() const {
  require(heads >= 1, "gat: heads must be >= 1");
  require(out_features >= 1, "gat: out_features must be >= 1");
}

GatLayer::GatLayer(std::size_t in_features, const GatConfig& cfg, ParamStore& store, Rng& rng,
                   const std::string& prefix)
    : in_(in_features), cfg_(cfg) {
  cfg_.validate();
  require(in_features >= 1, "gat: in_features must be >= 1");
  const auto nout = static_cast<std::size_t>(cfg_.out_features);
  const Real wstd = std::sqrt(2.0 / static_cast<Real>(in_features));
  for (int k = 0; k < cfg_.heads; ++k) {
    const std::string head = prefix + ".h" + std::to_string(k);
    Tensor w({in_features, nout});
    for (auto& v : w.values()) v = wstd * normal(rng);
    Tensor a({2 * nout});
    for (auto& v : a.values()) v = uniform(rng, -0.1, 0.1);
    w_.push_back(&store.add(LayerParams(head + ".W", std::move(w))));
    a_.push_back(&store.add(LayerParams(head + ".a", std::move(a))));
  }
}

std::size_t GatLayer::output_width() const {
  const auto n = static_cast<std::size_t>(cfg_.out_features);
  return cfg_.mode == GatMode::concat ? n * static_cast<std::size_t>(cfg_.heads) : n;
}

Tensor GatLayer::forward(const Tensor& x, const Adjacency& adjacency, const ActivationConfig& act) {
  require_rank(x, 2, "gat_layer input");
  const std::size_t v = x.dim(0), n = x.dim(1), nout = static_cast<std::size_t>(cfg_.out_features);
  if (n != in_)
    fail(ErrorCode::shape_mismatch, "gat_layer: input " + shape_string(x.shape()) + " but layer expects " +
                                        std::to_string(in_) + " features");
  if (adjacency.size() != v)
    fail(ErrorCode::shape_mismatch, "gat_layer: adjacency of size " + std::to_string(adjacency.size()) +
                                        " for " + std::to_string(v) + " vertices");
  require(v >= 1, "gat_layer: empty graph");
  if (!adjacency.has_self_loops()) fail(ErrorCode::invalid_argument, "gat_layer: adjacency lacks self-loops");
  if (!adjacency.symmetric()) fail(ErrorCode::invalid_argument, "gat_layer: adjacency is not symmetric");
  act.validate();

  x_ = x;
  adj_ = adjacency;
  act_ = act;
  const std::size_t heads = static_cast<std::size_t>(cfg_.heads);
  z_.assign(heads, Tensor());
  pre_.assign(heads, Tensor());
  alpha_.assign(heads, Tensor());
  h_.assign(heads, Tensor());
  std::vector<Real> terms;
  for (std::size_t k = 0; k < heads; ++k) {
    const Tensor& w = w_[k]->weights;
    const Tensor& a = a_[k]->weights;
    Tensor z({v, nout});
    for (std::size_t i = 0; i < v; ++i)
      for (std::size_t o = 0; o < nout; ++o) {
        Real s = 0;
        for (std::size_t f = 0; f < n; ++f) s += x[i * n + f] * w[f * nout + o];
        z[i * nout + o] = s;
      }
    std::vector<Real> src(v), dst(v);
    for (std::size_t i = 0; i < v; ++i) {
      Real s = 0, t = 0;
      for (std::size_t o = 0; o < nout; ++o) {
        s += z[i * nout + o] * a[o];
        t += z[i * nout + o] * a[nout + o];
      }
      src[i] = s;
      dst[i] = t;
    }
    Tensor pre({v, v}), e({v, v});
    for (std::size_t i = 0; i < v; ++i)
      for (std::size_t j = 0; j < v; ++j)
        if (adjacency(i, j)) {
          pre[i * v + j] = src[i] + dst[j];
          e[i * v + j] = activate(pre[i * v + j], Activation::leaky_relu, act);
        }
    Tensor alpha = masked_row_softmax(e, adjacency);
    Tensor h({v, nout});
    for (std::size_t i = 0; i < v; ++i)
      for (std::size_t o = 0; o < nout; ++o) {
        terms.clear();
        for (std::size_t j = 0; j < v; ++j)
          if (adjacency(i, j)) terms.push_back(alpha[i * v + j] * z[j * nout + o]);
        h[i * nout + o] = sorted_sum(terms);
      }
    z_[k] = std::move(z);
    pre_[k] = std::move(pre);
    alpha_[k] = std::move(alpha);
    h_[k] = std::move(h);
  }

  Tensor out({v, output_width()});
  if (cfg_.mode == GatMode::concat) {
    const std::size_t width = output_width();
    for (std::size_t k = 0; k < heads; ++k)
      for (std::size_t i = 0; i < v; ++i)
        for (std::size_t o = 0; o < nout; ++o)
          out[i * width + k * nout + o] = activate(h_[k][i * nout + o], Activation::elu, act);
  } else {
    for (std::size_t i = 0; i < v; ++i)
      for (std::size_t o = 0; o < nout; ++o) {
        Real s = 0;
        for (std::size_t k = 0; k < heads; ++k) s += h_[k][i * nout + o];
        out[i * nout + o] = activate(s / static_cast<Real>(heads), Activation::sigmoid, act);
      }
  }
  out_ = out;
  return out;
}

Tensor GatLayer::backward(const Tensor& grad_out) {
  require_same_shape(grad_out.shape(), out_.shape(), "gat_layer backward");
  const std::size_t v = x_.dim(0), n = in_, nout = static_cast<std::size_t>(cfg_.out_features);
  const std::size_t heads = static_cast<std::size_t>(cfg_.heads);
  Tensor gx({v, n});
  for (std::size_t k = 0; k < heads; ++k) {
    LayerParams& wp = *w_[k];
    LayerParams& ap = *a_[k];
    wp.weights.ensure_grad();
    ap.weights.ensure_grad();
    const Tensor& z = z_[k];
    const Tensor& alpha = alpha_[k];
    const Tensor& a = ap.weights;

    Tensor gh({v, nout});
    if (cfg_.mode == GatMode::concat) {
      const std::size_t width = output_width();
      for (std::size_t i = 0; i < v; ++i)
        for (std::size_t o = 0; o < nout; ++o) {
          const Real hv = h_[k][i * nout + o];
          const Real y = out_[i * width + k * nout + o];
          gh[i * nout + o] =
              grad_out[i * width + k * nout + o] * activate_derivative(hv, y, Activation::elu, act_);
        }
    } else {
      for (std::size_t i = 0; i < v; ++i)
        for (std::size_t o = 0; o < nout; ++o) {
          const Real y = out_[i * nout + o];
          gh[i * nout + o] = grad_out[i * nout + o] * y * (1 - y) / static_cast<Real>(heads);
        }
    }

    Tensor gz({v, nout});
    Tensor galpha({v, v});
    for (std::size_t i = 0; i < v; ++i)
      for (std::size_t j = 0; j < v; ++j) {
        if (!adj_(i, j)) continue;
        Real s = 0;
        const Real aij = alpha[i * v + j];
        for (std::size_t o = 0; o < nout; ++o) {
          s += gh[i * nout + o] * z[j * nout + o];
          gz[j * nout + o] += aij * gh[i * nout + o];
        }
        galpha[i * v + j] = s;
      }
    const Tensor ge = masked_row_softmax_backward(alpha, adj_, galpha);
    std::vector<Real> gsrc(v, 0), gdst(v, 0);
    for (std::size_t i = 0; i < v; ++i)
      for (std::size_t j = 0; j < v; ++j) {
        if (!adj_(i, j)) continue;
        const Real p = pre_[k][i * v + j];
        const Real gp = ge[i * v + j] * (p > 0 ? Real{1} : act_.leaky_slope);
        gsrc[i] += gp;
        gdst[j] += gp;
      }
    auto ga = ap.weights.grad();
    for (std::size_t i = 0; i < v; ++i)
      for (std::size_t o = 0; o < nout; ++o) {
        ga[o] += gsrc[i] * z[i * nout + o];
        ga[nout + o] += gdst[i] * z[i * nout + o];
        gz[i * nout + o] += gsrc[i] * a[o] + gdst[i] * a[nout + o];
      }
    auto gw = wp.weights.grad();
    const Tensor& w = wp.weights;
    for (std::size_t i = 0; i < v; ++i)
      for (std::size_t f = 0; f < n; ++f) {
        const Real xv = x_[i * n + f];
        Real acc = 0;
        for (std::size_t o = 0; o < nout; ++o) {
          gw[f * nout + o] += xv * gz[i * nout + o];
          acc += gz[i * nout + o] * w[f * nout + o];
        }
        gx[i * n + f] += acc;
      }
  }
  return gx;
}

std::pair<Graph, Tensor> gnn_module_forward(const Tensor& cnn_features, const Tensor& prob, const GraphConfig& cfg,
                                            GatLayer& layer, const ActivationConfig& act) {
  const auto [h, w] = map_dims(prob);
  require_rank(cnn_features, 4, "gnn_module_forward features");
  if (cnn_features.dim(2) != h || cnn_features.dim(3) != w)
    fail(ErrorCode::shape_mismatch, "gnn_module_forward: features " + shape_string(cnn_features.shape()) +
                                        " not aligned with probability map " + shape_string(prob.shape()));
  Graph graph = build_graph(prob, cfg);
  Tensor rows = gather_features(cnn_features, graph.vertices);
  Tensor refined = layer.forward(rows, graph.adjacency, act);
  return {std::move(graph), std::move(refined)};
}

}  // namespace agn
