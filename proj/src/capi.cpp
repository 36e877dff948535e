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

#include "agn/agn.h"

#include <cstring>
#include <memory>
#include <new>
#include <string>

#include "agn/checkpoint.hpp"
#include "agn/config.hpp"
#include "agn/error.hpp"
#include "agn/phantom.hpp"
#include "agn/training.hpp"

struct agn_config {
  agn::PipelineConfig cfg;
};

struct agn_volume {
  agn::PhantomVolume vol;
};

struct agn_model {
  std::unique_ptr<agn::AgnModel> model;
  std::int64_t step = 0;
};

struct agn_metrics {
  std::vector<agn::MetricRecord> records;
};

namespace {

thread_local std::string last_error;

agn_status to_status(agn::ErrorCode code) {
  switch (code) {
    case agn::ErrorCode::invalid_argument: return AGN_ERR_INVALID_ARGUMENT;
    case agn::ErrorCode::shape_mismatch: return AGN_ERR_SHAPE;
    case agn::ErrorCode::io: return AGN_ERR_IO;
    case agn::ErrorCode::format: return AGN_ERR_FORMAT;
    case agn::ErrorCode::non_finite: return AGN_ERR_NON_FINITE;
  }
  return AGN_ERR_INTERNAL;
}

template <typename F>
agn_status guarded(F&& body) {
  try {
    body();
    last_error.clear();
    return AGN_OK;
  } catch (const agn::Error& e) {
    last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
  } catch (const std::exception& e) {
    last_error = e.what();
  } catch (...) {
    last_error = "unknown error";
  }
  return AGN_ERR_INTERNAL;
}

void need(const void* p, const char* what) {
  if (!p) agn::fail(agn::ErrorCode::invalid_argument, std::string(what) + " must not be NULL");
}

agn::PipelineConfig config_or_default(const agn_config* cfg) { return cfg ? cfg->cfg : agn::PipelineConfig{}; }

agn::TrainOptions options_for(agn_record_fn fn, void* user) {
  agn::TrainOptions opt;
  if (fn)
    opt.on_record = [fn, user](const agn::MetricRecord& r) {
      fn(r.iteration, r.split == agn::Split::train ? AGN_SPLIT_TRAIN : AGN_SPLIT_TEST, r.loss, r.dice, user);
    };
  return opt;
}

void emit_training(agn::TrainResult&& result, agn_model** model, agn_metrics** metrics) {
  auto m = std::make_unique<agn_model>();
  m->step = agn::checkpoint_step(agn::checkpoint_entries(result.model->params()));
  m->model = std::move(result.model);
  if (metrics) *metrics = new agn_metrics{std::move(result.metrics)};
  *model = m.release();
}

}  // namespace

extern "C" {

const char* agn_last_error(void) { return last_error.c_str(); }

const char* agn_version(void) { return "1.0.0"; }

agn_status agn_config_default(agn_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = new agn_config{};
  });
}

agn_status agn_config_load(const char* path, agn_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new agn_config{agn::load_config(path)};
  });
}

agn_status agn_config_parse(const char* text, agn_config** out) {
  return guarded([&] {
    need(text, "text");
    need(out, "out");
    *out = new agn_config{agn::parse_config(text)};
  });
}

agn_status agn_config_set(agn_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    need(cfg, "cfg");
    need(key, "key");
    need(value, "value");
    // Re-parse the full listing with one line replaced so validation stays in one place.
    std::string text;
    const std::string listing = agn::format_config(cfg->cfg), prefix = std::string(key) + " = ";
    bool found = false;
    for (std::size_t pos = 0; pos < listing.size();) {
      const std::size_t end = listing.find('\n', pos);
      const std::string line = listing.substr(pos, end - pos);
      if (line.rfind(prefix, 0) == 0) {
        text += prefix + value + "\n";
        found = true;
      } else {
        text += line + "\n";
      }
      pos = end + 1;
    }
    if (!found) agn::fail(agn::ErrorCode::invalid_argument, "unknown key '" + std::string(key) + "'");
    cfg->cfg = agn::parse_config(text);
  });
}

agn_status agn_config_format(const agn_config* cfg, char* buf, size_t size, size_t* needed) {
  return guarded([&] {
    need(cfg, "cfg");
    const std::string text = agn::format_config(cfg->cfg);
    if (needed) *needed = text.size() + 1;
    if (buf && size > 0) {
      const std::size_t n = std::min(size - 1, text.size());
      std::memcpy(buf, text.data(), n);
      buf[n] = '\0';
    }
  });
}

void agn_config_free(agn_config* cfg) { delete cfg; }

agn_status agn_volume_generate(size_t slices, size_t height, size_t width, uint64_t seed, const char* difficulty,
                               agn_volume** out) {
  return guarded([&] {
    need(difficulty, "difficulty");
    need(out, "out");
    *out = new agn_volume{agn::generate_phantom(slices, height, width, seed, agn::parse_difficulty(difficulty))};
  });
}

agn_status agn_volume_load(const char* path, agn_volume** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new agn_volume{agn::load_volume(path)};
  });
}

agn_status agn_volume_save(const agn_volume* vol, const char* path) {
  return guarded([&] {
    need(vol, "vol");
    need(path, "path");
    agn::save_volume(vol->vol, path);
  });
}

agn_status agn_volume_dims(const agn_volume* vol, size_t* slices, size_t* height, size_t* width) {
  return guarded([&] {
    need(vol, "vol");
    if (slices) *slices = vol->vol.slices();
    if (height) *height = vol->vol.height();
    if (width) *width = vol->vol.width();
  });
}

void agn_volume_free(agn_volume* vol) { delete vol; }

agn_status agn_train_cnn(const agn_volume* vol, const agn_config* cfg, agn_record_fn on_record, void* user,
                         agn_model** model, agn_metrics** metrics) {
  return guarded([&] {
    need(vol, "vol");
    need(model, "model");
    const auto c = config_or_default(cfg);
    const auto data = agn::make_training_dataset(vol->vol, c.preprocess);
    emit_training(agn::train_cnn(data, c, options_for(on_record, user)), model, metrics);
  });
}

agn_status agn_train_joint(const agn_volume* vol, const char* cnn_checkpoint, const agn_config* cfg,
                           agn_record_fn on_record, void* user, agn_model** model, agn_metrics** metrics) {
  return guarded([&] {
    need(vol, "vol");
    need(cnn_checkpoint, "cnn_checkpoint");
    need(model, "model");
    const auto c = config_or_default(cfg);
    const auto data = agn::make_training_dataset(vol->vol, c.preprocess);
    const auto entries = agn::read_checkpoint(cnn_checkpoint);
    emit_training(agn::train_joint(data, entries, c, options_for(on_record, user)), model, metrics);
  });
}

agn_status agn_model_load(const char* checkpoint, const agn_config* cfg, size_t height, size_t width,
                          agn_model** out) {
  return guarded([&] {
    need(checkpoint, "checkpoint");
    need(out, "out");
    const auto entries = agn::read_checkpoint(checkpoint);
    auto m = std::make_unique<agn_model>();
    m->model = agn::model_from_checkpoint(entries, config_or_default(cfg), height, width);
    m->step = agn::checkpoint_step(entries);
    *out = m.release();
  });
}

agn_status agn_model_save(const agn_model* model, const char* checkpoint) {
  return guarded([&] {
    need(model, "model");
    need(checkpoint, "checkpoint");
    agn::save_checkpoint(model->model->params(), checkpoint);
  });
}

agn_status agn_model_is_joint(const agn_model* model, int* joint) {
  return guarded([&] {
    need(model, "model");
    need(joint, "joint");
    *joint = model->model->kind() == agn::ModelKind::joint;
  });
}

agn_status agn_model_predict(agn_model* model, const double* slice, size_t height, size_t width, double* prob) {
  return guarded([&] {
    need(model, "model");
    need(slice, "slice");
    need(prob, "prob");
    const auto& c = model->model->config().cnn;
    if (height != c.height || width != c.width)
      agn::fail(agn::ErrorCode::shape_mismatch, "slice " + std::to_string(height) + "x" + std::to_string(width) +
                                                    " does not match the model input " + std::to_string(c.height) +
                                                    "x" + std::to_string(c.width));
    const agn::Tensor input({1, 1, height, width}, std::vector<double>(slice, slice + height * width));
    const agn::Tensor p = model->model->predict(input);
    std::copy(p.values().begin(), p.values().end(), prob);
  });
}

void agn_model_free(agn_model* model) { delete model; }

agn_status agn_predict_volume(agn_model* model, agn_model* cnn_model, const agn_volume* vol, const agn_config* cfg,
                              const char* out_dir, size_t* files_written) {
  return guarded([&] {
    need(model, "model");
    need(vol, "vol");
    need(out_dir, "out_dir");
    const std::size_t n = agn::write_predictions(*model->model, cnn_model ? cnn_model->model.get() : nullptr, vol->vol,
                                                 config_or_default(cfg).preprocess, out_dir);
    if (files_written) *files_written = n;
  });
}

agn_status agn_evaluate(agn_model* model, const agn_volume* vol, const agn_config* cfg, const char* split,
                        agn_metrics** out) {
  return guarded([&] {
    need(model, "model");
    need(vol, "vol");
    need(split, "split");
    need(out, "out");
    const std::string which = split;
    if (which != "train" && which != "test")
      agn::fail(agn::ErrorCode::invalid_argument, "split must be train or test, got '" + which + "'");
    const auto data = agn::make_training_dataset(vol->vol, config_or_default(cfg).preprocess);
    const bool train = which == "train";
    const auto& idx = train ? data.train : data.test;
    if (idx.empty()) agn::fail(agn::ErrorCode::invalid_argument, "the " + which + " split is empty");
    const auto scores = agn::evaluate(*model->model, data, idx);
    *out = new agn_metrics{{agn::mean_record(scores, data, static_cast<int>(model->step),
                                             train ? agn::Split::train : agn::Split::test)}};
  });
}

size_t agn_metrics_count(const agn_metrics* metrics) { return metrics ? metrics->records.size() : 0; }

agn_status agn_metrics_get(const agn_metrics* metrics, size_t index, int* iteration, agn_split* split, double* loss,
                           double* dice) {
  return guarded([&] {
    need(metrics, "metrics");
    if (index >= metrics->records.size()) agn::fail(agn::ErrorCode::invalid_argument, "metric index out of range");
    const auto& r = metrics->records[index];
    if (iteration) *iteration = r.iteration;
    if (split) *split = r.split == agn::Split::train ? AGN_SPLIT_TRAIN : AGN_SPLIT_TEST;
    if (loss) *loss = r.loss;
    if (dice) *dice = r.dice;
  });
}

agn_status agn_metrics_write_csv(const agn_metrics* metrics, const char* path) {
  return guarded([&] {
    need(metrics, "metrics");
    need(path, "path");
    agn::write_metrics_csv(metrics->records, path);
  });
}

void agn_metrics_free(agn_metrics* metrics) { delete metrics; }

}  // extern "C"
