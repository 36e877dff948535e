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

#include "agn/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <optional>

#include "agn/error.hpp"
#include "agn/image_io.hpp"
#include "binary_io.hpp"

namespace agn {

namespace {

// Independent random streams derived from the run seed.
enum Stream : std::uint64_t { init_stream = 1, order_stream = 2, dropout_stream = 3 };

}  // namespace

Dataset make_dataset(const PhantomVolume& vol, const PreprocessConfig& pre, Real train_fraction) {
  require(train_fraction > 0 && train_fraction < 1, "train fraction must lie in (0,1)");
  Dataset d;
  d.height = vol.height();
  d.width = vol.width();
  const std::size_t n = vol.slices();
  for (std::size_t s = 0; s < n; ++s) {
    d.inputs.push_back(window_hu(vol.hu_slice(s), pre));
    d.masks.push_back(vol.mask_slice(s));
  }
  const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<Real>(n)));
  for (std::size_t s = 0; s < n; ++s) (s < n_train ? d.train : d.test).push_back(s);
  return d;
}

Dataset make_training_dataset(const PhantomVolume& vol, const PreprocessConfig& pre, Real train_fraction) {
  return make_dataset(filter_empty_slices(vol), pre, train_fraction);
}

std::string to_string(Split s) { return s == Split::train ? "train" : "test"; }

namespace {

struct Overlap {
  std::size_t predicted = 0, truth = 0, both = 0;
};

Overlap overlap(const Tensor& pred, const Tensor& truth, Real threshold) {
  require_same_shape(pred.shape(), truth.shape(), "dice_coefficient");
  Overlap o;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] >= threshold, g = truth[i] >= 0.5;
    o.predicted += p;
    o.truth += g;
    o.both += p && g;
  }
  return o;
}

}  // namespace

Real dice_coefficient(const Tensor& pred, const Tensor& truth, Real threshold) {
  const Overlap o = overlap(pred, truth, threshold);
  if (o.predicted + o.truth == 0) return 1;
  return 2 * static_cast<Real>(o.both) / static_cast<Real>(o.predicted + o.truth);
}

Real curve_dice(const Tensor& pred, const Tensor& truth, Real threshold) {
  const Overlap o = overlap(pred, truth, threshold);
  if (o.truth == 0) return 0;
  return 2 * static_cast<Real>(o.both) / static_cast<Real>(o.predicted + o.truth);
}

ModelConfig model_config_for(const PipelineConfig& cfg, std::size_t height, std::size_t width) {
  ModelConfig m = cfg.model;
  m.cnn.height = height;
  m.cnn.width = width;
  m.graph.rng_seed = cfg.train.seed;
  return m;
}

std::vector<SliceScore> evaluate(AgnModel& model, const Dataset& data, const std::vector<std::size_t>& indices) {
  std::vector<SliceScore> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    require(i < data.size(), "evaluate: slice index out of range");
    SliceScore s;
    s.index = i;
    s.prob = model.predict(data.inputs[i]);
    s.loss = bce_loss(s.prob, data.masks[i]);
    s.dice = dice_coefficient(s.prob, data.masks[i]);
    out.push_back(std::move(s));
  }
  return out;
}

MetricRecord mean_record(const std::vector<SliceScore>& scores, const Dataset& data, int iteration, Split split) {
  MetricRecord r{iteration, split, 0, 0};
  if (scores.empty()) return r;
  for (const auto& s : scores) {
    r.loss += s.loss;
    r.dice += curve_dice(s.prob, data.masks[s.index]);
  }
  r.loss /= static_cast<Real>(scores.size());
  r.dice /= static_cast<Real>(scores.size());
  return r;
}

namespace {

void check_dataset(const Dataset& data) {
  require(!data.train.empty(), "training needs a nonempty training split");
  for (std::size_t i : data.train) require(i < data.size(), "training split index out of range");
  for (std::size_t i : data.test) require(i < data.size(), "test split index out of range");
}

/// Shared loop: one slice per iteration, reshuffled every epoch.
class Trainer {
 public:
  Trainer(AgnModel& model, const Dataset& data, const PipelineConfig& cfg, Real lr, int iters,
          const TrainOptions& options, TrainResult& result)
      : model_(model), data_(data), cfg_(cfg), iters_(iters), options_(options), result_(result),
        order_rng_(derive_seed(cfg.train.seed, order_stream)), dropout_rng_(derive_seed(cfg.train.seed, dropout_stream)) {
    adam_ = cfg.train.adam;
    adam_.lr = lr;
    if (model_.kind() == ModelKind::joint) graphs_.resize(data.size());
  }

  void run() {
    std::vector<std::size_t> order;
    std::size_t cursor = 0;
    for (int it = 0; it < iters_; ++it) {
      if (cursor == order.size()) {
        order = data_.train;
        shuffle(order.begin(), order.end(), order_rng_);
        cursor = 0;
      }
      if (model_.kind() == ModelKind::joint && it % cfg_.train.graph_update_period == 0) refresh_graphs();
      const std::size_t idx = order[cursor++];
      step(it + 1, idx);
      const bool epoch_end = cursor == order.size();
      if (options_.log_test && (epoch_end || it + 1 == iters_)) log_test(it + 1);
    }
  }

 private:
  void refresh_graphs() {
    for (std::size_t i : data_.train) {
      graphs_[i] = model_.build_graph(data_.inputs[i]);
      ++result_.graph_builds;
    }
  }

  void step(int iteration, std::size_t idx) {
    ParamStore& store = model_.params();
    store.zero_grad();
    const Graph* g = graphs_.empty() ? nullptr : &*graphs_[idx];
    const auto out = model_.forward(data_.inputs[idx], g, /*training=*/true, dropout_rng_);
    const StepLoss loss = model_.backward(out, data_.masks[idx]);
    if (!std::isfinite(loss.total))
      fail(ErrorCode::non_finite, "non-finite loss at iteration " + std::to_string(iteration));
    for (std::size_t i = 0; i < store.size(); ++i) adam_step(store[i], adam_);
    record({iteration, Split::train, loss.output, curve_dice(out.prob, data_.masks[idx])});
  }

  void log_test(int iteration) {
    if (data_.test.empty()) return;
    record(mean_record(evaluate(model_, data_, data_.test), data_, iteration, Split::test));
  }

  void record(const MetricRecord& r) {
    result_.metrics.push_back(r);
    if (options_.on_record) options_.on_record(r);
  }

  AgnModel& model_;
  const Dataset& data_;
  const PipelineConfig& cfg_;
  int iters_;
  const TrainOptions& options_;
  TrainResult& result_;
  AdamConfig adam_;
  Rng order_rng_, dropout_rng_;
  std::vector<std::optional<Graph>> graphs_;
};

}  // namespace

TrainResult train_cnn(const Dataset& data, const PipelineConfig& cfg, const TrainOptions& options) {
  cfg.validate();
  check_dataset(data);
  TrainResult result;
  result.model = std::make_unique<AgnModel>(model_config_for(cfg, data.height, data.width), ModelKind::cnn_only,
                                            derive_seed(cfg.train.seed, init_stream));
  Trainer(*result.model, data, cfg, cfg.train.cnn_lr, cfg.train.cnn_iters, options, result).run();
  return result;
}

TrainResult train_joint(const Dataset& data, const std::vector<CheckpointEntry>& cnn_checkpoint,
                        const PipelineConfig& cfg, const TrainOptions& options) {
  cfg.validate();
  check_dataset(data);
  TrainResult result;
  result.model = std::make_unique<AgnModel>(model_config_for(cfg, data.height, data.width), ModelKind::joint,
                                            derive_seed(cfg.train.seed, init_stream));
  for (const auto& e : cnn_checkpoint)
    if (e.name.rfind("cnn.", 0) != 0)
      fail(ErrorCode::invalid_argument, "train_joint: '" + e.name + "' is not a CNN parameter");
  load_checkpoint(result.model->params(), cnn_checkpoint, LoadMode::subset);
  Trainer(*result.model, data, cfg, cfg.train.joint_lr, cfg.train.joint_iters, options, result).run();
  return result;
}

std::unique_ptr<AgnModel> model_from_checkpoint(const std::vector<CheckpointEntry>& entries, const PipelineConfig& cfg,
                                                std::size_t height, std::size_t width) {
  const bool joint = std::any_of(entries.begin(), entries.end(),
                                 [](const CheckpointEntry& e) { return e.name.rfind("gat.", 0) == 0; });
  auto model = std::make_unique<AgnModel>(model_config_for(cfg, height, width),
                                          joint ? ModelKind::joint : ModelKind::cnn_only, 0);
  load_checkpoint(model->params(), entries, LoadMode::exact);
  return model;
}

std::int64_t checkpoint_step(const std::vector<CheckpointEntry>& entries) {
  std::int64_t step = 0;
  for (const auto& e : entries) {
    if (e.name.size() > 5 && e.name.compare(e.name.size() - 5, 5, ".step") == 0 && !e.values.empty())
      step = std::max(step, static_cast<std::int64_t>(e.values.front()));
  }
  return step;
}

std::string format_metrics_csv(const std::vector<MetricRecord>& records) {
  std::string out = "iteration,split,loss,dice\n";
  char buf[96];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%d,%s,%.9g,%.9g\n", r.iteration, to_string(r.split).c_str(), r.loss, r.dice);
    out += buf;
  }
  return out;
}

void write_metrics_csv(const std::vector<MetricRecord>& records, const std::string& path) {
  const std::string text = format_metrics_csv(records);
  detail::write_file(path, std::vector<char>(text.begin(), text.end()));
}

std::size_t write_predictions(AgnModel& model, AgnModel* cnn_model, const PhantomVolume& vol,
                              const PreprocessConfig& pre, const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) fail(ErrorCode::io, "cannot create output directory '" + out_dir + "': " + ec.message());
  std::size_t files = 0;
  auto emit = [&](const Tensor& image, std::size_t s, const char* kind) {
    char name[64];
    std::snprintf(name, sizeof name, "slice_%04zu_%s.pgm", s, kind);
    write_pgm(image, (std::filesystem::path(out_dir) / name).string());
    ++files;
  };
  auto binarize = [](const Tensor& prob) {
    Tensor m(prob.shape());
    for (std::size_t i = 0; i < prob.size(); ++i) m[i] = prob[i] >= kBinarizeThreshold ? 1 : 0;
    return m;
  };
  for (std::size_t s = 0; s < vol.slices(); ++s) {
    const Tensor input = window_hu(vol.hu_slice(s), pre);
    const Tensor prob = model.predict(input);
    emit(input, s, "input");
    emit(vol.mask_slice(s), s, "truth");
    emit(prob, s, "prob");
    emit(binarize(prob), s, "mask");
    if (cnn_model) {
      const Tensor cnn_prob = cnn_model->predict(input);
      emit(cnn_prob, s, "cnn_prob");
      emit(binarize(cnn_prob), s, "cnn_mask");
    }
  }
  return files;
}

}  // namespace agn
