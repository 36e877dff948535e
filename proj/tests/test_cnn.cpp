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

#include "doctest.h"
#include "oracles.hpp"

#include "agn/cnn.hpp"
#include "agn/error.hpp"
#include "agn/layers.hpp"

using namespace agn;

namespace {

CnnConfig desk_config() {
  CnnConfig cfg;
  cfg.base_channels = 16;
  cfg.height = 64;
  cfg.width = 64;
  return cfg;
}

}  // namespace

TEST_CASE("cnn shapes at the desk configuration") {
  ParamStore store;
  Rng rng(1);
  CnnStream cnn(desk_config(), store, rng);
  const Tensor slice = oracle::random_tensor({1, 1, 64, 64}, 2, 0, 1);
  const CnnOutput out = cnn.forward(slice, false);
  CHECK(out.prob.shape() == Shape{1, 1, 64, 64});
  CHECK(out.features.shape() == Shape{1, 16, 64, 64});
  CHECK(out.side[0].shape() == Shape{1, 4, 64, 64});
  CHECK(out.side[3].shape() == Shape{1, 4, 8, 8});
  CHECK(cnn.conv_count() == 15);
  CHECK(cnn.maxpool_count() == 3);
  for (Real p : out.prob.values()) {
    CHECK(p > 0);
    CHECK(p < 1);
  }
}

TEST_CASE("cnn parameter census matches the closed form") {
  ParamStore store;
  Rng rng(1);
  CnnStream cnn(desk_config(), store, rng);
  // trunk convs feed batch norm and carry no bias; side, upsampling and final convs do
  std::size_t expect = 0, in = 1;
  const int convs[4] = {2, 2, 3, 3};
  const std::size_t side = 4;
  for (std::size_t s = 0; s < 4; ++s) {
    const std::size_t width = 16u << s;
    for (int i = 0; i < convs[s]; ++i) {
      expect += 9 * in * width + 2 * width;
      in = width;
    }
    expect += 9 * in * side + side;
    const std::size_t k = s == 0 ? 2 : 2u << s;
    expect += k * k * side * side + side;
  }
  expect += 4 * side + 1;
  CHECK(total_params(store) == expect);

  ParamStore again;
  Rng rng2(99);
  CnnStream twin(desk_config(), again, rng2);
  CHECK(count_params(store) == count_params(again));
  CHECK(count_params(ParamStore{}).empty());
}

TEST_CASE("cnn features do not depend on the final conv") {
  ParamStore store;
  Rng rng(3);
  CnnConfig cfg = desk_config();
  cfg.height = cfg.width = 32;
  CnnStream cnn(cfg, store, rng);
  const Tensor slice = oracle::random_tensor({1, 1, 32, 32}, 4, 0, 1);
  const CnnOutput full = cnn.forward(slice, false, true);
  const CnnOutput part = cnn.forward(slice, false, false);
  CHECK(full.features.same_values(part.features));
  CHECK(part.prob.empty());
  const CnnOutput again = cnn.forward(slice, false, true);
  CHECK(again.prob.same_values(full.prob));
}

TEST_CASE("cnn configuration validation") {
  CnnConfig cfg = desk_config();
  cfg.height = 60;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = desk_config();
  cfg.base_channels = 6;
  CHECK_THROWS_AS(cfg.validate(), Error);
  ParamStore store;
  Rng rng(1);
  CnnStream cnn(desk_config(), store, rng);
  CHECK_THROWS_AS(cnn.forward(Tensor({1, 1, 32, 32}), false), Error);
}

TEST_CASE("cnn stream passes the gradient check at the tiny configuration") {
  for (const auto& gc : oracle::gradient_suite()) {
    if (gc.name != "cnn_stream") continue;
    for (const auto& [name, rep] : gc.run(1)) {
      INFO(name << ": " << rep.message);
      CHECK(rep.passed);
    }
  }
}
