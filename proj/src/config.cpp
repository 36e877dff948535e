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

#include "agn/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <vector>

#include "agn/error.hpp"

namespace agn {

void TrainConfig::validate() const {
  require(cnn_lr >= 0 && std::isfinite(cnn_lr), "cnn_lr must be finite and nonnegative");
  require(joint_lr >= 0 && std::isfinite(joint_lr), "joint_lr must be finite and nonnegative");
  require(batch_size == 1, "batch_size must be 1");
  require(cnn_iters >= 0 && joint_iters >= 0, "iteration counts must be nonnegative");
  require(graph_update_period > 0, "graph_update_period must be positive");
  require(adam.beta1 >= 0 && adam.beta1 < 1 && adam.beta2 >= 0 && adam.beta2 < 1, "adam betas must lie in [0,1)");
  require(adam.eps > 0, "adam_eps must be positive");
}

void PipelineConfig::validate() const {
  train.validate();
  preprocess.validate();
  model.cnn.validate();
  model.gat.validate();
  model.activation.validate();
  require(model.cnn.batchnorm.eps > 0, "bn_eps must be positive");
  require(model.cnn.batchnorm.momentum >= 0 && model.cnn.batchnorm.momentum <= 1, "bn_momentum must lie in [0,1]");
  require(model.dropout_p >= 0 && model.dropout_p < 1, "dropout_p must lie in [0,1)");
  require(model.graph.delta >= 3, "delta must be at least 3");
  require(!model.graph.d_threshold || *model.graph.d_threshold > 0, "d_threshold must be positive or auto");
  require(model.graph.connectivity == 4 || model.graph.connectivity == 8, "connectivity must be 4 or 8");
  require(model.graph.fmm_eps > 0, "fmm_eps must be positive");
}

namespace {

struct Key {
  std::string name;
  std::function<void(PipelineConfig&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

std::string fmt(Real v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Real to_real(const std::string& key, const std::string& text) {
  Real v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v))
    fail(ErrorCode::invalid_argument, "config key '" + key + "': expected a number, got '" + text + "'");
  return v;
}

template <typename Int>
Int to_int(const std::string& key, const std::string& text) {
  Int v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    fail(ErrorCode::invalid_argument, "config key '" + key + "': expected an integer, got '" + text + "'");
  return v;
}

template <typename Ref>
Key real_key(std::string name, Ref ref) {
  return {name, [name, ref](PipelineConfig& c, const std::string& v) { ref(c) = to_real(name, v); },
          [ref](const PipelineConfig& c) { return fmt(ref(const_cast<PipelineConfig&>(c))); }};
}

template <typename Int, typename Ref>
Key int_key(std::string name, Ref ref) {
  return {name, [name, ref](PipelineConfig& c, const std::string& v) { ref(c) = to_int<Int>(name, v); },
          [ref](const PipelineConfig& c) { return std::to_string(ref(const_cast<PipelineConfig&>(c))); }};
}

const std::vector<Key>& keys() {
  using C = PipelineConfig;
  static const std::vector<Key> table = {
      real_key("cnn_lr", [](C& c) -> Real& { return c.train.cnn_lr; }),
      real_key("joint_lr", [](C& c) -> Real& { return c.train.joint_lr; }),
      int_key<int>("batch_size", [](C& c) -> int& { return c.train.batch_size; }),
      int_key<int>("cnn_iters", [](C& c) -> int& { return c.train.cnn_iters; }),
      int_key<int>("joint_iters", [](C& c) -> int& { return c.train.joint_iters; }),
      int_key<int>("graph_update_period", [](C& c) -> int& { return c.train.graph_update_period; }),
      int_key<std::uint64_t>("seed", [](C& c) -> std::uint64_t& { return c.train.seed; }),
      real_key("adam_beta1", [](C& c) -> Real& { return c.train.adam.beta1; }),
      real_key("adam_beta2", [](C& c) -> Real& { return c.train.adam.beta2; }),
      real_key("adam_eps", [](C& c) -> Real& { return c.train.adam.eps; }),
      real_key("dropout_p", [](C& c) -> Real& { return c.model.dropout_p; }),
      real_key("leaky_slope", [](C& c) -> Real& { return c.model.activation.leaky_slope; }),
      real_key("elu_alpha", [](C& c) -> Real& { return c.model.activation.elu_alpha; }),
      int_key<int>("delta", [](C& c) -> int& { return c.model.graph.delta; }),
      {"d_threshold",
       [](C& c, const std::string& v) {
         if (v == "auto")
           c.model.graph.d_threshold.reset();
         else
           c.model.graph.d_threshold = to_real("d_threshold", v);
       },
       [](const C& c) { return c.model.graph.d_threshold ? fmt(*c.model.graph.d_threshold) : std::string("auto"); }},
      int_key<int>("connectivity", [](C& c) -> int& { return c.model.graph.connectivity; }),
      {"geodesic_solver",
       [](C& c, const std::string& v) {
         if (v == "dijkstra")
           c.model.graph.solver = GeodesicSolver::dijkstra;
         else if (v == "fast_marching")
           c.model.graph.solver = GeodesicSolver::fast_marching;
         else
           fail(ErrorCode::invalid_argument,
                "config key 'geodesic_solver': expected dijkstra or fast_marching, got '" + v + "'");
       },
       [](const C& c) {
         return std::string(c.model.graph.solver == GeodesicSolver::dijkstra ? "dijkstra" : "fast_marching");
       }},
      real_key("fmm_eps", [](C& c) -> Real& { return c.model.graph.fmm_eps; }),
      int_key<int>("base_channels", [](C& c) -> int& { return c.model.cnn.base_channels; }),
      int_key<int>("side_channels", [](C& c) -> int& { return c.model.cnn.side_channels; }),
      int_key<int>("gat_heads", [](C& c) -> int& { return c.model.gat.heads; }),
      int_key<int>("gat_out_features", [](C& c) -> int& { return c.model.gat.out_features; }),
      int_key<int>("stage_channels", [](C& c) -> int& { return c.model.stage_channels; }),
      real_key("bn_eps", [](C& c) -> Real& { return c.model.cnn.batchnorm.eps; }),
      real_key("bn_momentum", [](C& c) -> Real& { return c.model.cnn.batchnorm.momentum; }),
      real_key("level", [](C& c) -> Real& { return c.preprocess.level; }),
      real_key("hu_low", [](C& c) -> Real& { return c.preprocess.hu_low; }),
      real_key("hu_high", [](C& c) -> Real& { return c.preprocess.hu_high; }),
  };
  return table;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

PipelineConfig parse_config(const std::string& text, const std::string& source) {
  PipelineConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    const std::string where = source + ":" + std::to_string(lineno);
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorCode::invalid_argument, where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    const auto& table = keys();
    const auto it = std::find_if(table.begin(), table.end(), [&](const Key& k) { return k.name == key; });
    if (it == table.end()) fail(ErrorCode::invalid_argument, where + ": unknown key '" + key + "'");
    if (!seen.insert(key).second) fail(ErrorCode::invalid_argument, where + ": duplicate key '" + key + "'");
    try {
      it->set(cfg, value);
    } catch (const Error& e) {
      fail(e.code(), where + ": " + e.what());
    }
  }
  try {
    cfg.validate();
  } catch (const Error& e) {
    fail(e.code(), source + ": " + e.what());
  }
  return cfg;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open config '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path);
}

std::string format_config(const PipelineConfig& cfg) {
  std::string out;
  for (const Key& k : keys()) out += k.name + " = " + k.get(cfg) + "\n";
  return out;
}

}  // namespace agn
