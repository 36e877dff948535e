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

// Command-line front end: data generation, training, prediction, evaluation.

#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "agn/agn.h"

namespace {

struct Failure {
  agn_status status;
};

void check(agn_status s, const char* what) {
  if (s != AGN_OK) {
    std::fprintf(stderr, "agn: %s failed: %s\n", what, agn_last_error());
    throw Failure{s};
  }
}

// Owning wrappers around the C handles.
template <typename T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() {
    if (p) Free(p);
  }
  T** out() { return &p; }
};

using Config = Handle<agn_config, agn_config_free>;
using Volume = Handle<agn_volume, agn_volume_free>;
using Model = Handle<agn_model, agn_model_free>;
using Metrics = Handle<agn_metrics, agn_metrics_free>;

void load_config(const std::string& path, Config& cfg) {
  if (path.empty())
    check(agn_config_default(cfg.out()), "default config");
  else
    check(agn_config_load(path.c_str(), cfg.out()), "loading config");
}

void print_record(int iteration, agn_split split, double loss, double dice, void* user) {
  const int every = *static_cast<int*>(user);
  if (split == AGN_SPLIT_TEST || (every > 0 && iteration % every == 0))
    std::printf("iter %6d  %-5s  loss %.6f  dice %.4f\n", iteration, split == AGN_SPLIT_TRAIN ? "train" : "test",
                loss, dice);
}

void save_outputs(const Model& model, const Metrics& metrics, const std::string& ckpt, const std::string& csv) {
  check(agn_model_save(model.p, ckpt.c_str()), "saving checkpoint");
  if (!csv.empty()) check(agn_metrics_write_csv(metrics.p, csv.c_str()), "writing metrics");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Airway graph network: phantom data, training, prediction"};
  app.require_subcommand(1);

  // gen-data
  std::size_t slices = 200, seed = 42;
  std::vector<std::size_t> size{64, 64};
  std::string difficulty = "with_bronchi", out_path;
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic phantom volume");
  gen->add_option("--slices", slices, "Number of slices")->check(CLI::PositiveNumber);
  gen->add_option("--size", size, "Slice height and width")->expected(2);
  gen->add_option("--seed", seed, "Random seed");
  gen->add_option("--difficulty", difficulty, "tube_only or with_bronchi")
      ->check(CLI::IsMember({"tube_only", "with_bronchi"}));
  gen->add_option("--out", out_path, "Output volume file")->required();

  // train-cnn / train-joint
  std::string data, config, ckpt, metrics_csv, cnn_ckpt;
  int print_every = 100;
  auto* tcnn = app.add_subcommand("train-cnn", "Pretrain the CNN stream");
  auto* tjoint = app.add_subcommand("train-joint", "Train the full model from a CNN checkpoint");
  for (auto* sub : {tcnn, tjoint}) {
    sub->add_option("--data", data, "Volume file")->required();
    sub->add_option("--config", config, "Config file (key = value)");
    sub->add_option("--out", ckpt, "Output checkpoint")->required();
    sub->add_option("--metrics", metrics_csv, "Metrics CSV");
    sub->add_option("--print-every", print_every, "Train record print interval (0: test records only)");
  }
  tjoint->add_option("--cnn-ckpt", cnn_ckpt, "Pretrained CNN checkpoint")->required();

  // predict
  std::string out_dir, compare_cnn;
  auto* pred = app.add_subcommand("predict", "Write probability and mask images");
  pred->add_option("--data", data, "Volume file")->required();
  pred->add_option("--ckpt", ckpt, "Checkpoint")->required();
  pred->add_option("--out", out_dir, "Output directory")->required();
  pred->add_option("--compare-cnn", compare_cnn, "CNN checkpoint for side-by-side images");
  pred->add_option("--config", config, "Config file the checkpoint was trained with");

  // eval
  std::string split = "test";
  auto* ev = app.add_subcommand("eval", "Mean loss and dice of a checkpoint");
  ev->add_option("--data", data, "Volume file")->required();
  ev->add_option("--ckpt", ckpt, "Checkpoint")->required();
  ev->add_option("--metrics", metrics_csv, "Metrics CSV")->required();
  ev->add_option("--split", split, "train or test")->check(CLI::IsMember({"train", "test"}));
  ev->add_option("--config", config, "Config file the checkpoint was trained with");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      Volume vol;
      check(agn_volume_generate(slices, size[0], size[1], seed, difficulty.c_str(), vol.out()), "gen-data");
      check(agn_volume_save(vol.p, out_path.c_str()), "saving volume");
      std::printf("wrote %zu slices of %zux%zu to %s\n", slices, size[0], size[1], out_path.c_str());
    } else if (tcnn->parsed() || tjoint->parsed()) {
      Config cfg;
      load_config(config, cfg);
      Volume vol;
      check(agn_volume_load(data.c_str(), vol.out()), "loading volume");
      Model model;
      Metrics metrics;
      if (tcnn->parsed())
        check(agn_train_cnn(vol.p, cfg.p, print_record, &print_every, model.out(), metrics.out()), "train-cnn");
      else
        check(agn_train_joint(vol.p, cnn_ckpt.c_str(), cfg.p, print_record, &print_every, model.out(),
                              metrics.out()),
              "train-joint");
      save_outputs(model, metrics, ckpt, metrics_csv);
      std::printf("saved %s\n", ckpt.c_str());
    } else if (pred->parsed()) {
      Config cfg;
      load_config(config, cfg);
      Volume vol;
      check(agn_volume_load(data.c_str(), vol.out()), "loading volume");
      std::size_t h = 0, w = 0;
      check(agn_volume_dims(vol.p, nullptr, &h, &w), "volume dims");
      Model model, cnn;
      check(agn_model_load(ckpt.c_str(), cfg.p, h, w, model.out()), "loading checkpoint");
      if (!compare_cnn.empty()) check(agn_model_load(compare_cnn.c_str(), cfg.p, h, w, cnn.out()), "loading CNN");
      std::size_t files = 0;
      check(agn_predict_volume(model.p, cnn.p, vol.p, cfg.p, out_dir.c_str(), &files), "predict");
      std::printf("wrote %zu images to %s\n", files, out_dir.c_str());
    } else if (ev->parsed()) {
      Config cfg;
      load_config(config, cfg);
      Volume vol;
      check(agn_volume_load(data.c_str(), vol.out()), "loading volume");
      std::size_t h = 0, w = 0;
      check(agn_volume_dims(vol.p, nullptr, &h, &w), "volume dims");
      Model model;
      check(agn_model_load(ckpt.c_str(), cfg.p, h, w, model.out()), "loading checkpoint");
      Metrics m;
      check(agn_evaluate(model.p, vol.p, cfg.p, split.c_str(), m.out()), "eval");
      check(agn_metrics_write_csv(m.p, metrics_csv.c_str()), "writing metrics");
      double loss = 0, dice = 0;
      check(agn_metrics_get(m.p, 0, nullptr, nullptr, &loss, &dice), "reading metrics");
      std::printf("%s  loss %.6f  dice %.4f\n", split.c_str(), loss, dice);
    }
  } catch (const Failure& f) {
    return static_cast<int>(f.status);
  }
  return 0;
}
