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

// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "agn/checkpoint.hpp"
#include "agn/error.hpp"
#include "agn/gat.hpp"
#include "agn/image_io.hpp"
#include "agn/phantom.hpp"
#include "agn/training.hpp"
#include "oracles.hpp"

using namespace agn;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

Real seconds_since(Clock::time_point t0) { return std::chrono::duration<Real>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::string detail;
  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

std::vector<char> file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// ---------------------------------------------------------------- 1

Outcome gradient_suite() {
  Outcome o;
  const auto t0 = Clock::now();
  std::size_t checks = 0;
  Real worst = 0;
  for (const auto& c : oracle::gradient_suite()) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      for (const auto& [name, rep] : c.run(seed)) {
        ++checks;
        worst = std::max(worst, rep.max_rel_error);
        if (!rep.passed || rep.max_rel_error >= 1e-4) {
          std::fprintf(stderr, "  %s/%s seed %llu: %s\n", c.name.c_str(), name.c_str(),
                       static_cast<unsigned long long>(seed), rep.message.c_str());
          o.fail(c.name + "/" + name + " seed " + std::to_string(seed) + ": " + rep.message);
        }
      }
    }
  }
  const Real secs = seconds_since(t0);
  if (secs >= 120) o.fail("runtime " + std::to_string(secs) + " s");
  if (o.pass) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%zu checks, worst relative error %.2e, %.1f s", checks, worst, secs);
    o.detail = buf;
  }
  return o;
}

// ---------------------------------------------------------------- 2

Outcome geodesic_oracle() {
  Outcome o;
  const auto t0 = Clock::now();
  Real worst = 0;
  for (std::size_t side : {3, 4}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Tensor prob = oracle::random_tensor({side, side}, 1000 * side + seed, 0, 1);
      const std::size_t n = side * side;
      std::vector<std::vector<Real>> d(n);
      for (std::size_t s = 0; s < n; ++s) {
        const Pixel src{s / side, s % side};
        d[s] = geodesic_distances(prob, src, 4);
        const auto ref = oracle::simple_path_distances(prob, src, 4);
        for (std::size_t t = 0; t < n; ++t) worst = std::max(worst, std::abs(d[s][t] - ref[t]));
      }
      Rng rng(seed);
      for (int k = 0; k < 100; ++k) {
        const auto a = uniform_index(rng, n), b = uniform_index(rng, n), c = uniform_index(rng, n);
        if (d[a][a] != 0) o.fail("identity violated");
        if (d[a][b] < 0) o.fail("negative distance");
        if (std::abs(d[a][b] - d[b][a]) > 1e-12) o.fail("symmetry violated");
        if (d[a][c] > d[a][b] + d[b][c] + 1e-9) o.fail("triangle inequality violated");
      }
    }
  }
  if (worst > 1e-12) o.fail("max deviation from path enumeration " + std::to_string(worst));
  const Real secs = seconds_since(t0);
  if (secs >= 60) o.fail("runtime " + std::to_string(secs) + " s");
  if (o.pass) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "40 maps, max deviation %.1e, %.2f s", worst, secs);
    o.detail = buf;
  }
  return o;
}

// ---------------------------------------------------------------- 3

Adjacency random_graph(std::size_t v, Rng& rng) {
  Adjacency a = Adjacency::identity(v);
  for (std::size_t i = 0; i < v; ++i)
    for (std::size_t j = i + 1; j < v; ++j)
      if (uniform01(rng) < 0.35) a.connect(i, j);
  return a;
}

Outcome gat_properties() {
  Outcome o;
  Real worst_row = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const std::size_t v = 4 + uniform_index(rng, 9), n = 5;
    const Adjacency adj = random_graph(v, rng);
    const Tensor x = oracle::random_tensor({v, n}, seed + 100);
    ParamStore store;
    GatLayer layer(n, {4, 3, GatMode::concat}, store, rng);
    const Tensor y = layer.forward(x, adj);
    for (const Tensor& alpha : layer.attention())
      for (std::size_t i = 0; i < v; ++i) {
        Real s = 0;
        for (std::size_t j = 0; j < v; ++j) s += alpha[i * v + j];
        worst_row = std::max(worst_row, std::abs(s - 1));
      }
    std::vector<std::size_t> perm(v);
    std::iota(perm.begin(), perm.end(), 0);
    shuffle(perm.begin(), perm.end(), rng);
    Tensor px({v, n});
    Adjacency padj(v);
    for (std::size_t i = 0; i < v; ++i) {
      for (std::size_t f = 0; f < n; ++f) px[i * n + f] = x[perm[i] * n + f];
      for (std::size_t j = 0; j < v; ++j) padj.set(i, j, adj(perm[i], perm[j]));
    }
    const Tensor py = layer.forward(px, padj);
    const std::size_t w = y.dim(1);
    for (std::size_t i = 0; i < v; ++i)
      for (std::size_t f = 0; f < w; ++f)
        if (py[i * w + f] != y[perm[i] * w + f]) o.fail("equivariance broken on graph " + std::to_string(seed));
  }
  if (worst_row > 1e-9) o.fail("attention row sum off by " + std::to_string(worst_row));
  ParamStore store;
  Rng rng(0);
  GatLayer wide(64, {4, 16, GatMode::concat}, store, rng);
  const Tensor out = wide.forward(oracle::random_tensor({3, 64}, 1), Adjacency::complete(3));
  if (wide.output_width() != 64 || out.dim(1) != 64) o.fail("concat width " + std::to_string(out.dim(1)));
  if (o.pass) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "20 graphs, row sum error %.1e, bitwise equivariant, width 64", worst_row);
    o.detail = buf;
  }
  return o;
}

// ---------------------------------------------------------------- 4

Outcome census() {
  Outcome o;
  ModelConfig cfg;
  cfg.cnn.base_channels = 64;
  cfg.cnn.height = 64;
  cfg.cnn.width = 64;
  cfg.gat = {4, 16, GatMode::concat};
  cfg.graph.delta = 4;
  cfg.stage_channels = 16;
  AgnModel model(cfg, ModelKind::joint, 1);
  const std::size_t convs = model.cnn().conv_count(), pools = model.cnn().maxpool_count();
  if (convs != 15) o.fail("conv count " + std::to_string(convs));
  if (pools != 3) o.fail("max-pool count " + std::to_string(pools));
  const Tensor slice = oracle::random_tensor({1, 1, 64, 64}, 3, 0, 1);
  const Tensor prob = model.predict(slice);
  const std::size_t concat = model.decoder()->last_concat().dim(1);
  if (concat != 32 || model.decoder()->final_concat_channels() != 32)
    o.fail("pre-final concat channels " + std::to_string(concat));
  if (model.cnn().feature_channels() != 64) o.fail("feature channels " + std::to_string(model.cnn().feature_channels()));
  if (prob.shape() != slice.shape()) o.fail("output shape " + shape_string(prob.shape()));
  if (o.pass)
    o.detail = "15 convolutions, 3 max-pools, 64 feature channels, pre-final concat 32 channels";
  return o;
}

// ---------------------------------------------------------------- 5

Outcome preprocessing() {
  Outcome o;
  const PreprocessConfig cfg;
  if (window_hu(-1100.0, cfg) != 0.0) o.fail("-1100 -> " + std::to_string(window_hu(-1100.0, cfg)));
  if (window_hu(-600.0, cfg) != 0.5) o.fail("-600 -> " + std::to_string(window_hu(-600.0, cfg)));
  if (window_hu(100.0, cfg) != 1.0) o.fail("100 -> " + std::to_string(window_hu(100.0, cfg)));
  if (o.pass) o.detail = "-1100 -> 0, -600 -> 0.5, 100 -> 1 exactly";
  return o;
}

// ---------------------------------------------------------------- 6 and 7

struct Corpus {
  PhantomVolume vol;
  Dataset data;
  PipelineConfig cfg;
};

Corpus make_corpus() {
  Corpus c;
  c.vol = generate_phantom(200, 64, 64, 42, Difficulty::with_bronchi);
  c.data = make_training_dataset(c.vol, c.cfg.preprocess);
  return c;
}

Real mean_of(const std::vector<Real>& v) { return v.empty() ? 0 : std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

Outcome training_trend(const Corpus& c, TrainResult& cnn, Real& secs) {
  Outcome o;
  const auto t0 = Clock::now();
  cnn = train_cnn(c.data, c.cfg);
  secs = seconds_since(t0);
  const std::size_t epoch = c.data.train.size();
  std::vector<std::vector<Real>> train_epochs;
  std::vector<Real> test;
  for (const auto& r : cnn.metrics) {
    if (r.split == Split::test) {
      test.push_back(r.loss);
      continue;
    }
    const std::size_t e = (static_cast<std::size_t>(r.iteration) - 1) / epoch;
    if (train_epochs.size() <= e) train_epochs.resize(e + 1);
    train_epochs[e].push_back(r.loss);
  }
  // Compare the first and the last complete epochs.
  while (!train_epochs.empty() && train_epochs.back().size() < epoch) train_epochs.pop_back();
  if (train_epochs.size() < 2 || test.size() < 2) {
    o.fail("fewer than two epochs recorded");
    return o;
  }
  const Real first = mean_of(train_epochs.front()), last = mean_of(train_epochs.back());
  if (!(last < first)) o.fail("train loss did not decrease");
  if (!(test.back() < test.front())) o.fail("test loss did not decrease");
  if (secs >= 600) o.fail("runtime " + std::to_string(secs) + " s");
  char buf[200];
  std::snprintf(buf, sizeof buf, "train %.4g -> %.4g (%zu epochs), test %.4g -> %.4g, %.0f s", first, last,
                train_epochs.size(), test.front(), test.back(), secs);
  o.detail = o.pass ? buf : o.detail + "; " + buf;
  return o;
}

Outcome segmentation_quality(const Corpus& c, const TrainResult& cnn, Real cnn_secs) {
  Outcome o;
  const auto t0 = Clock::now();
  const auto entries = checkpoint_entries(cnn.model->params());
  const auto cnn_scores = evaluate(*cnn.model, c.data, c.data.test);
  std::vector<bool> subset;
  for (const auto& s : cnn_scores) subset.push_back(count_components(c.data.masks[s.index]) >= 2);
  auto means = [&](const std::vector<SliceScore>& scores) {
    std::vector<Real> all, sub;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      all.push_back(scores[i].dice);
      if (subset[i]) sub.push_back(scores[i].dice);
    }
    return std::pair{mean_of(all), mean_of(sub)};
  };
  const auto [cnn_all, cnn_sub] = means(cnn_scores);
  const std::size_t subset_size = static_cast<std::size_t>(std::count(subset.begin(), subset.end(), true));
  if (cnn_all < 0.60) o.fail("CNN mean test dice " + std::to_string(cnn_all) + " < 0.60");
  if (subset_size == 0) o.fail("no test slice contains bronchus dots");

  int wins = 0;
  Real joint_all_42 = 0;
  std::string per_seed;
  TrainOptions quiet;
  quiet.log_test = false;
  for (std::uint64_t seed = 42; seed < 52; ++seed) {
    PipelineConfig cfg = c.cfg;
    cfg.train.seed = seed;
    const TrainResult joint = train_joint(c.data, entries, cfg, quiet);
    const auto [j_all, j_sub] = means(evaluate(*joint.model, c.data, c.data.test));
    if (seed == 42) joint_all_42 = j_all;
    wins += j_sub > cnn_sub;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s%.4f", per_seed.empty() ? "" : " ", j_sub);
    per_seed += buf;
    std::fprintf(stderr, "  joint seed %llu: test dice %.5f, bronchus subset %.5f (CNN %.5f / %.5f)\n",
                 static_cast<unsigned long long>(seed), j_all, j_sub, cnn_all, cnn_sub);
  }
  if (joint_all_42 < cnn_all - 0.01)
    o.fail("joint mean test dice " + std::to_string(joint_all_42) + " < CNN " + std::to_string(cnn_all) + " - 0.01");
  if (wins < 6) o.fail("joint beat the CNN on the bronchus subset in only " + std::to_string(wins) + " of 10 seeds");
  const Real secs = cnn_secs + seconds_since(t0);
  if (secs >= 1800) o.fail("runtime " + std::to_string(secs) + " s");
  char buf[400];
  std::snprintf(buf, sizeof buf,
                "CNN dice %.4f (subset %.4f, %zu slices), joint dice %.4f, subset wins %d/10 [%s], %.0f s", cnn_all,
                cnn_sub, subset_size, joint_all_42, wins, per_seed.c_str(), secs);
  o.detail = o.pass ? buf : o.detail + "; " + buf;
  return o;
}

// ---------------------------------------------------------------- 8

Outcome determinism(const fs::path& dir) {
  Outcome o;
  const PhantomVolume vol = generate_phantom(48, 32, 32, 7, Difficulty::with_bronchi);
  PipelineConfig cfg;
  cfg.train.cnn_iters = 60;
  cfg.train.joint_iters = 40;
  cfg.train.graph_update_period = 15;
  const Dataset data = make_training_dataset(vol, cfg.preprocess);
  std::vector<std::vector<char>> ckpt, csv;
  for (int run = 0; run < 2; ++run) {
    const TrainResult cnn = train_cnn(data, cfg);
    const std::string a = (dir / ("cnn" + std::to_string(run) + ".ckpt")).string();
    const std::string b = (dir / ("cnn" + std::to_string(run) + ".csv")).string();
    save_checkpoint(cnn.model->params(), a);
    write_metrics_csv(cnn.metrics, b);
    const TrainResult joint = train_joint(data, read_checkpoint(a), cfg);
    const std::string cj = (dir / ("joint" + std::to_string(run) + ".ckpt")).string();
    const std::string mj = (dir / ("joint" + std::to_string(run) + ".csv")).string();
    save_checkpoint(joint.model->params(), cj);
    write_metrics_csv(joint.metrics, mj);
    ckpt.push_back(file_bytes(a));
    ckpt.push_back(file_bytes(cj));
    csv.push_back(file_bytes(b));
    csv.push_back(file_bytes(mj));
  }
  if (ckpt[0] != ckpt[2]) o.fail("CNN checkpoints differ");
  if (ckpt[1] != ckpt[3]) o.fail("joint checkpoints differ");
  if (csv[0] != csv[2]) o.fail("CNN metric CSVs differ");
  if (csv[1] != csv[3]) o.fail("joint metric CSVs differ");
  if (o.pass) o.detail = "CNN and joint checkpoints and metric CSVs byte-identical across two runs";
  return o;
}

// ---------------------------------------------------------------- 9

template <typename F>
bool rejects(F&& f, ErrorCode want) {
  try {
    f();
  } catch (const Error& e) {
    return e.code() == want && std::string(e.what()).size() > 0;
  }
  return false;
}

Outcome round_trips(const fs::path& dir) {
  Outcome o;
  const PhantomVolume vol = generate_phantom(12, 32, 32, 5, Difficulty::with_bronchi);
  const std::string vpath = (dir / "rt.vol").string();
  save_volume(vol, vpath);
  const PhantomVolume back = load_volume(vpath);
  if (!back.hu.same_values(vol.hu) || !back.mask.same_values(vol.mask)) o.fail("volume round trip differs");
  save_volume(back, (dir / "rt2.vol").string());
  if (file_bytes(vpath) != file_bytes((dir / "rt2.vol").string())) o.fail("volume re-save differs");

  PipelineConfig cfg;
  cfg.train.cnn_iters = 5;
  cfg.train.joint_iters = 3;
  const Dataset data = make_training_dataset(vol, cfg.preprocess);
  const TrainResult cnn = train_cnn(data, cfg);
  const TrainResult joint = train_joint(data, checkpoint_entries(cnn.model->params()), cfg);
  const std::string cpath = (dir / "rt.ckpt").string(), cpath2 = (dir / "rt2.ckpt").string();
  save_checkpoint(joint.model->params(), cpath);
  auto loaded = model_from_checkpoint(read_checkpoint(cpath), cfg, 32, 32);
  save_checkpoint(loaded->params(), cpath2);
  if (file_bytes(cpath) != file_bytes(cpath2)) o.fail("checkpoint round trip differs");

  const fs::path p1 = dir / "pred1", p2 = dir / "pred2";
  auto cnn_loaded = model_from_checkpoint(checkpoint_entries(cnn.model->params()), cfg, 32, 32);
  write_predictions(*loaded, cnn_loaded.get(), vol, cfg.preprocess, p1.string());
  write_predictions(*loaded, cnn_loaded.get(), vol, cfg.preprocess, p2.string());
  std::size_t images = 0;
  for (const auto& e : fs::directory_iterator(p1)) {
    ++images;
    if (file_bytes(e.path().string()) != file_bytes((p2 / e.path().filename()).string()))
      o.fail("image " + e.path().filename().string() + " differs");
  }
  if (images != 12 * 6) o.fail("expected 72 images, found " + std::to_string(images));

  auto corrupt = [&](const std::string& src, const std::string& dst, std::size_t offset, std::size_t truncate_to) {
    auto bytes = file_bytes(src);
    if (truncate_to) bytes.resize(truncate_to);
    if (offset < bytes.size()) bytes[offset] ^= 0x5a;
    std::ofstream(dst, std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  };
  const std::string bad = (dir / "bad.bin").string();
  corrupt(vpath, bad, 0, 0);
  if (!rejects([&] { load_volume(bad); }, ErrorCode::format)) o.fail("corrupted volume magic accepted");
  corrupt(vpath, bad, SIZE_MAX, 100);
  if (!rejects([&] { load_volume(bad); }, ErrorCode::format)) o.fail("truncated volume accepted");
  corrupt(cpath, bad, 1, 0);
  if (!rejects([&] { read_checkpoint(bad); }, ErrorCode::format)) o.fail("corrupted checkpoint magic accepted");
  corrupt(cpath, bad, SIZE_MAX, 64);
  if (!rejects([&] { read_checkpoint(bad); }, ErrorCode::format)) o.fail("truncated checkpoint accepted");
  if (o.pass)
    o.detail = "volume, checkpoint and 72 PGM files byte-stable; corrupted magic and truncation rejected";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  // Optional arguments select criteria by number; criterion 7 reuses the training of 6.
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  auto wanted = [&](int id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };
  const fs::path dir = fs::temp_directory_path() / ("agn_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  int failures = 0;
  auto report = [&](int id, const char* title, const Outcome& o) {
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  };
  auto guarded = [&](int id, const char* title, const std::function<Outcome()>& f) {
    if (!wanted(id)) return;
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    report(id, title, o);
  };

  guarded(1, "gradient suite", gradient_suite);
  guarded(2, "geodesic oracle", geodesic_oracle);
  guarded(3, "graph attention properties", gat_properties);
  guarded(4, "architecture census", census);
  guarded(5, "preprocessing window", preprocessing);

  TrainResult cnn;
  Real cnn_secs = 0;
  const Corpus corpus = wanted(6) || wanted(7) ? make_corpus() : Corpus{};
  if (wanted(7) && !wanted(6)) only.push_back(6);
  guarded(6, "training trend", [&] { return training_trend(corpus, cnn, cnn_secs); });
  guarded(7, "segmentation quality", [&] {
    if (!cnn.model) {
      Outcome o;
      o.fail("CNN pretraining did not complete");
      return o;
    }
    return segmentation_quality(corpus, cnn, cnn_secs);
  });
  guarded(8, "determinism", [&] { return determinism(dir); });
  guarded(9, "format round trips", [&] { return round_trips(dir); });

  std::error_code ec;
  fs::remove_all(dir, ec);
  std::printf("%d of %zu criteria failed\n", failures, only.empty() ? std::size_t{9} : only.size());
  return failures == 0 ? 0 : 1;
}
