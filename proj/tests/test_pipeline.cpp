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

#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"

#include "agn/checkpoint.hpp"
#include "agn/config.hpp"
#include "agn/error.hpp"
#include "agn/image_io.hpp"
#include "agn/training.hpp"

using namespace agn;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "agn_pipeline_tests";
  fs::create_directories(dir);
  return dir / name;
}

PipelineConfig small_config() {
  PipelineConfig cfg;
  cfg.model.cnn.base_channels = 8;
  cfg.model.gat = {2, 2, GatMode::concat};
  cfg.train.cnn_iters = 3;
  cfg.train.joint_iters = 3;
  return cfg;
}

const Dataset& small_data() {
  static const Dataset data =
      make_training_dataset(generate_phantom(6, 32, 32, 42, Difficulty::with_bronchi), PreprocessConfig{});
  return data;
}

Tensor map(std::size_t h, std::size_t w, std::initializer_list<std::size_t> on) {
  Tensor t({h, w});
  for (std::size_t i : on) t[i] = 1;
  return t;
}

std::vector<CheckpointEntry> weights_only(std::vector<CheckpointEntry> entries) {
  std::erase_if(entries, [](const CheckpointEntry& e) {
    auto ends = [&](const std::string& s) {
      return e.name.size() >= s.size() && e.name.compare(e.name.size() - s.size(), s.size(), s) == 0;
    };
    return ends(".m") || ends(".v") || ends(".step");
  });
  return entries;
}

}  // namespace

TEST_CASE("config parsing") {
  const PipelineConfig cfg = parse_config("# comment\ncnn_lr = 0.5\n\ndelta=4 # trailing\nd_threshold = auto\n");
  CHECK(cfg.train.cnn_lr == 0.5);
  CHECK(cfg.model.graph.delta == 4);
  CHECK_FALSE(cfg.model.graph.d_threshold.has_value());
  CHECK(parse_config("d_threshold = 0.25").model.graph.d_threshold == 0.25);
  CHECK_THROWS_WITH_AS(parse_config("learning_rate = 1"), doctest::Contains("learning_rate"), Error);
  CHECK_THROWS_AS(parse_config("seed = 1\nseed = 2"), Error);
  CHECK_THROWS_AS(parse_config("delta = 2"), Error);
  CHECK_THROWS_AS(parse_config("cnn_iters = many"), Error);
  CHECK_THROWS_AS(parse_config("batch_size = 4"), Error);
  CHECK_THROWS_AS(parse_config("bn_momentum = 1.5"), Error);

  const PipelineConfig round = parse_config(format_config(cfg));
  CHECK(format_config(round) == format_config(cfg));
}

TEST_CASE("dice coefficient") {
  const Tensor a = map(4, 4, {0, 1, 2, 3});
  CHECK(dice_coefficient(a, a) == 1.0);
  CHECK(dice_coefficient(a, map(4, 4, {8, 9})) == 0.0);
  CHECK(dice_coefficient(a, map(4, 4, {2, 3, 4, 5})) == 0.5);
  CHECK(dice_coefficient(Tensor({4, 4}), Tensor({4, 4})) == 1.0);
  CHECK(curve_dice(Tensor({4, 4}), Tensor({4, 4})) == 0.0);
  Tensor soft({4, 4}, 0.4);
  soft[0] = 0.6;
  CHECK(dice_coefficient(soft, map(4, 4, {0})) == 1.0);
  CHECK(dice_coefficient(map(4, 4, {1, 5}), a) == dice_coefficient(a, map(4, 4, {1, 5})));
  CHECK_THROWS_AS(dice_coefficient(a, Tensor({2, 8})), Error);
}

TEST_CASE("dataset split keeps slice order") {
  const PhantomVolume vol = generate_phantom(8, 32, 32, 3, Difficulty::tube_only);
  const Dataset data = make_dataset(vol, PreprocessConfig{});
  CHECK(data.train == std::vector<std::size_t>{0, 1, 2, 3, 4, 5});
  CHECK(data.test == std::vector<std::size_t>{6, 7});
  CHECK(data.inputs[2].same_values(window_hu(vol.hu_slice(2))));
}

TEST_CASE("checkpoint files") {
  const auto run = train_cnn(small_data(), small_config(), {false, {}});
  const fs::path a = scratch("a.agnc"), b = scratch("b.agnc");
  save_checkpoint(run.model->params(), a.string());
  save_checkpoint(run.model->params(), b.string());
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  std::stringstream sa, sb;
  sa << fa.rdbuf();
  sb << fb.rdbuf();
  CHECK(sa.str() == sb.str());

  const auto entries = read_checkpoint(a.string());
  CHECK(checkpoint_step(entries) == 3);
  auto copy = model_from_checkpoint(entries, small_config(), 32, 32);
  CHECK(serialize_checkpoint(copy->params()) == serialize_checkpoint(run.model->params()));

  PipelineConfig wide = small_config();
  wide.model.cnn.base_channels = 16;
  CHECK_THROWS_WITH_AS(model_from_checkpoint(entries, wide, 32, 32), doctest::Contains("cnn.s1.conv1.weight"),
                       Error);

  std::vector<char> bytes = serialize_checkpoint(run.model->params());
  bytes[0] = 'X';
  CHECK_THROWS_WITH_AS(parse_checkpoint(bytes, "test"), doctest::Contains("magic"), Error);
}

TEST_CASE("training is deterministic") {
  const auto r1 = train_cnn(small_data(), small_config());
  const auto r2 = train_cnn(small_data(), small_config());
  CHECK(serialize_checkpoint(r1.model->params()) == serialize_checkpoint(r2.model->params()));
  CHECK(format_metrics_csv(r1.metrics) == format_metrics_csv(r2.metrics));
}

TEST_CASE("zero learning rate leaves the cnn unchanged") {
  PipelineConfig cfg = small_config();
  cfg.train.cnn_lr = 0;
  cfg.model.cnn.batchnorm.momentum = 1;
  cfg.train.cnn_iters = 0;
  const auto before = train_cnn(small_data(), cfg, {false, {}});
  cfg.train.cnn_iters = 1;
  const auto after = train_cnn(small_data(), cfg, {false, {}});
  const auto w0 = weights_only(checkpoint_entries(before.model->params()));
  const auto w1 = weights_only(checkpoint_entries(after.model->params()));
  REQUIRE(w0.size() == w1.size());
  for (std::size_t i = 0; i < w0.size(); ++i) {
    INFO(w0[i].name);
    CHECK(w0[i].values == w1[i].values);
  }

  // the logged loss is the loss of the initial parameters on the trained slice
  REQUIRE(after.metrics.size() == 1);
  Rng rng(0);
  bool matched = false;
  for (std::size_t i : small_data().train) {
    const auto out = before.model->forward(small_data().inputs[i], nullptr, true, rng);
    matched = matched || before.model->backward(out, small_data().masks[i]).output == after.metrics[0].loss;
  }
  CHECK(matched);
}

TEST_CASE("joint training from a cnn checkpoint") {
  PipelineConfig cfg = small_config();
  const auto cnn = train_cnn(small_data(), cfg, {false, {}});
  const auto entries = checkpoint_entries(cnn.model->params());

  SUBCASE("graphs are built once when the refresh period exceeds the run") {
    cfg.train.graph_update_period = 100;
    const auto joint = train_joint(small_data(), entries, cfg, {false, {}});
    CHECK(joint.graph_builds == small_data().train.size());
  }
  SUBCASE("graphs are refreshed every period") {
    cfg.train.graph_update_period = 2;
    const auto joint = train_joint(small_data(), entries, cfg, {false, {}});
    CHECK(joint.graph_builds == 2 * small_data().train.size());
  }
  SUBCASE("one step updates every parameter group") {
    cfg.train.joint_lr = 1e-3;
    cfg.train.joint_iters = 0;
    const auto start = train_joint(small_data(), entries, cfg, {false, {}});
    cfg.train.joint_iters = 1;
    const auto stepped = train_joint(small_data(), entries, cfg, {false, {}});
    const auto w0 = weights_only(checkpoint_entries(start.model->params()));
    const auto w1 = weights_only(checkpoint_entries(stepped.model->params()));
    REQUIRE(w0.size() == w1.size());
    bool cnn = false, gat = false, dec = false;
    for (std::size_t i = 0; i < w0.size(); ++i) {
      if (w0[i].values == w1[i].values) continue;
      cnn = cnn || w0[i].name.starts_with("cnn.");
      gat = gat || w0[i].name.starts_with("gat.");
      dec = dec || w0[i].name.starts_with("dec.");
    }
    CHECK(cnn);
    CHECK(gat);
    CHECK(dec);
  }
  SUBCASE("zero learning rate keeps predictions fixed") {
    cfg.train.joint_lr = 0;
    cfg.model.cnn.batchnorm.momentum = 1;
    cfg.train.joint_iters = 0;
    const auto start = train_joint(small_data(), entries, cfg, {false, {}});
    cfg.train.joint_iters = 3;
    const auto later = train_joint(small_data(), entries, cfg, {false, {}});
    for (std::size_t i = 0; i < small_data().size(); ++i)
      CHECK(start.model->predict(small_data().inputs[i]).same_values(later.model->predict(small_data().inputs[i])));
  }
  SUBCASE("non-cnn entries are rejected") {
    auto bad = entries;
    bad.front().name = "gat.h0.W.weight";
    CHECK_THROWS_AS(train_joint(small_data(), bad, cfg), Error);
  }
}

TEST_CASE("metric csv") {
  const std::vector<MetricRecord> records{{1, Split::train, 0.5, 0.25}, {4, Split::test, 0.125, 1}};
  CHECK(format_metrics_csv(records) == "iteration,split,loss,dice\n1,train,0.5,0.25\n4,test,0.125,1\n");
  const auto run = train_cnn(small_data(), small_config());
  std::size_t train = 0, test = 0;
  for (const auto& r : run.metrics) {
    CHECK(std::isfinite(r.loss));
    CHECK(r.loss >= 0);
    CHECK(r.dice >= 0);
    CHECK(r.dice <= 1);
    (r.split == Split::train ? train : test) += 1;
  }
  CHECK(train == 3);
  CHECK(test >= 1);
}

TEST_CASE("graymap output") {
  CHECK(to_gray(0) == 0);
  CHECK(to_gray(1) == 255);
  CHECK(to_gray(0.5) == 128);
  CHECK(to_gray(-3) == 0);
  Tensor img({2, 3});
  img[1] = 1;
  img[5] = 0.2;
  const auto bytes = encode_pgm(img);
  const std::string header = "P5\n3 2\n255\n";
  REQUIRE(bytes.size() == header.size() + 6);
  CHECK(std::string(bytes.begin(), bytes.begin() + header.size()) == header);
  CHECK(static_cast<unsigned char>(bytes[header.size() + 1]) == 255);
  const fs::path p = scratch("img.pgm");
  write_pgm(img, p.string());
  const GrayImage back = read_pgm(p.string());
  CHECK(back.height == 2);
  CHECK(back.width == 3);
  CHECK(back.pixels[5] == to_gray(0.2));
}

TEST_CASE("prediction files") {
  PipelineConfig cfg = small_config();
  const auto run = train_cnn(small_data(), cfg, {false, {}});
  const PhantomVolume vol = generate_phantom(2, 32, 32, 9, Difficulty::tube_only);
  const fs::path dir = scratch("pred");
  fs::remove_all(dir);
  CHECK(write_predictions(*run.model, run.model.get(), vol, cfg.preprocess, dir.string()) == 12);
  const GrayImage prob = read_pgm((dir / "slice_0001_prob.pgm").string());
  CHECK(prob.height == 32);
  CHECK(prob.width == 32);
  std::ifstream a(dir / "slice_0000_mask.pgm", std::ios::binary);
  std::stringstream first;
  first << a.rdbuf();
  write_predictions(*run.model, nullptr, vol, cfg.preprocess, dir.string());
  std::ifstream b(dir / "slice_0000_mask.pgm", std::ios::binary);
  std::stringstream second;
  second << b.rdbuf();
  CHECK(first.str() == second.str());
}
