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

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "doctest.h"

#include "agn/agn.h"

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "agn_capi_tests";
  fs::create_directories(dir);
  return dir / name;
}

agn_config* small_config() {
  agn_config* cfg = nullptr;
  REQUIRE(agn_config_parse("base_channels = 8\ngat_heads = 2\ngat_out_features = 2\ncnn_iters = 2\njoint_iters = 2\n",
                           &cfg) == AGN_OK);
  return cfg;
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void count_record(int, agn_split, double, double, void* user) { ++*static_cast<int*>(user); }

}  // namespace

TEST_CASE("c api: configuration") {
  agn_config* cfg = nullptr;
  REQUIRE(agn_config_default(&cfg) == AGN_OK);
  CHECK(agn_config_set(cfg, "seed", "7") == AGN_OK);
  CHECK(agn_config_set(cfg, "no_such_key", "1") == AGN_ERR_INVALID_ARGUMENT);
  CHECK(std::string(agn_last_error()).find("no_such_key") != std::string::npos);
  std::size_t needed = 0;
  CHECK(agn_config_format(cfg, nullptr, 0, &needed) == AGN_OK);
  std::vector<char> buf(needed);
  CHECK(agn_config_format(cfg, buf.data(), buf.size(), &needed) == AGN_OK);
  CHECK(std::string(buf.data()).find("seed = 7") != std::string::npos);
  agn_config_free(cfg);
  CHECK(agn_config_parse("delta = 1", &cfg) == AGN_ERR_INVALID_ARGUMENT);
  CHECK(agn_config_load(scratch("missing.cfg").c_str(), &cfg) == AGN_ERR_IO);
  CHECK(std::strlen(agn_version()) > 0);
}

TEST_CASE("c api: volumes") {
  agn_volume* vol = nullptr;
  REQUIRE(agn_volume_generate(3, 32, 32, 4, "with_bronchi", &vol) == AGN_OK);
  const std::string path = scratch("v.agnv").string();
  CHECK(agn_volume_save(vol, path.c_str()) == AGN_OK);
  agn_volume* back = nullptr;
  REQUIRE(agn_volume_load(path.c_str(), &back) == AGN_OK);
  std::size_t n = 0, h = 0, w = 0;
  CHECK(agn_volume_dims(back, &n, &h, &w) == AGN_OK);
  CHECK(n == 3);
  CHECK(h == 32);
  CHECK(w == 32);
  agn_volume_free(back);
  agn_volume_free(vol);
  CHECK(agn_volume_generate(3, 32, 32, 4, "easy", &vol) == AGN_ERR_INVALID_ARGUMENT);
  CHECK(agn_volume_dims(nullptr, &n, &h, &w) == AGN_ERR_INVALID_ARGUMENT);
}

TEST_CASE("c api: train, save, load and predict") {
  agn_config* cfg = small_config();
  agn_volume* vol = nullptr;
  REQUIRE(agn_volume_generate(6, 32, 32, 42, "with_bronchi", &vol) == AGN_OK);

  int records = 0;
  agn_model* cnn = nullptr;
  agn_metrics* metrics = nullptr;
  REQUIRE(agn_train_cnn(vol, cfg, count_record, &records, &cnn, &metrics) == AGN_OK);
  CHECK(records == static_cast<int>(agn_metrics_count(metrics)));
  int iteration = 0;
  agn_split split = AGN_SPLIT_TEST;
  double loss = -1, dice = -1;
  CHECK(agn_metrics_get(metrics, 0, &iteration, &split, &loss, &dice) == AGN_OK);
  CHECK(iteration == 1);
  CHECK(split == AGN_SPLIT_TRAIN);
  CHECK(loss >= 0);
  CHECK(agn_metrics_get(metrics, 999, &iteration, &split, &loss, &dice) == AGN_ERR_INVALID_ARGUMENT);
  CHECK(agn_metrics_write_csv(metrics, scratch("m.csv").c_str()) == AGN_OK);
  agn_metrics_free(metrics);

  const std::string ckpt = scratch("cnn.agnc").string();
  REQUIRE(agn_model_save(cnn, ckpt.c_str()) == AGN_OK);
  agn_model* joint = nullptr;
  REQUIRE(agn_train_joint(vol, ckpt.c_str(), cfg, nullptr, nullptr, &joint, &metrics) == AGN_OK);
  agn_metrics_free(metrics);
  int is_joint = 0;
  CHECK(agn_model_is_joint(joint, &is_joint) == AGN_OK);
  CHECK(is_joint == 1);

  const std::string joint_ckpt = scratch("joint.agnc").string();
  REQUIRE(agn_model_save(joint, joint_ckpt.c_str()) == AGN_OK);
  agn_model* loaded = nullptr;
  agn_model* again = nullptr;
  REQUIRE(agn_model_load(joint_ckpt.c_str(), cfg, 32, 32, &loaded) == AGN_OK);
  REQUIRE(agn_model_load(joint_ckpt.c_str(), cfg, 32, 32, &again) == AGN_OK);
  const std::string resaved = scratch("joint2.agnc").string();
  REQUIRE(agn_model_save(again, resaved.c_str()) == AGN_OK);
  CHECK(read_bytes(resaved) == read_bytes(joint_ckpt));
  std::vector<double> slice(32 * 32, 0.2), p0(32 * 32), p1(32 * 32), p2(32 * 32);
  CHECK(agn_model_predict(joint, slice.data(), 32, 32, p0.data()) == AGN_OK);
  CHECK(agn_model_predict(loaded, slice.data(), 32, 32, p1.data()) == AGN_OK);
  CHECK(agn_model_predict(again, slice.data(), 32, 32, p2.data()) == AGN_OK);
  CHECK(p1 == p2);
  // checkpoints hold float32 values
  double drift = 0;
  for (std::size_t i = 0; i < p0.size(); ++i) drift = std::max(drift, std::abs(p0[i] - p1[i]));
  CHECK(drift < 1e-4);
  agn_model_free(again);
  CHECK(agn_model_predict(loaded, slice.data(), 16, 16, p2.data()) == AGN_ERR_SHAPE);

  CHECK(agn_evaluate(loaded, vol, cfg, "test", &metrics) == AGN_OK);
  CHECK(agn_metrics_count(metrics) == 1);
  agn_metrics_free(metrics);
  CHECK(agn_evaluate(loaded, vol, cfg, "validation", &metrics) == AGN_ERR_INVALID_ARGUMENT);

  std::size_t files = 0;
  CHECK(agn_predict_volume(loaded, cnn, vol, cfg, scratch("pred").c_str(), &files) == AGN_OK);
  CHECK(files == 36);

  agn_model* wrong = nullptr;
  CHECK(agn_model_load(joint_ckpt.c_str(), nullptr, 32, 32, &wrong) == AGN_ERR_SHAPE);
  CHECK(std::string(agn_last_error()).find("checkpoint mismatch") != std::string::npos);

  agn_model_free(loaded);
  agn_model_free(joint);
  agn_model_free(cnn);
  agn_volume_free(vol);
  agn_config_free(cfg);
}
