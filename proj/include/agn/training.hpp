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

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "agn/checkpoint.hpp"
#include "agn/config.hpp"
#include "agn/model.hpp"
#include "agn/phantom.hpp"

namespace agn {

/// Windowed slices with their masks and a train/test partition by index.
struct Dataset {
  std::vector<Tensor> inputs;  // [1,1,h,w] in [0,1]
  std::vector<Tensor> masks;   // [1,1,h,w] binary
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::size_t height = 0, width = 0;

  std::size_t size() const { return inputs.size(); }
};

inline constexpr Real kTrainFraction = 0.75;

/// Windows every slice; the first floor(fraction * n) slices train, the rest test.
Dataset make_dataset(const PhantomVolume& vol, const PreprocessConfig& pre, Real train_fraction = kTrainFraction);
/// Drops empty slices first.
Dataset make_training_dataset(const PhantomVolume& vol, const PreprocessConfig& pre,
                              Real train_fraction = kTrainFraction);

enum class Split { train, test };
std::string to_string(Split s);

struct MetricRecord {
  int iteration = 0;
  Split split = Split::train;
  Real loss = 0;
  Real dice = 0;
};

inline constexpr Real kBinarizeThreshold = 0.5;

/// 2|P and G| / (|P| + |G|) after thresholding pred; 1 when both sets are empty.
Real dice_coefficient(const Tensor& pred, const Tensor& truth, Real threshold = kBinarizeThreshold);
/// Dice as plotted in metric curves: 0 for slices without any airway.
Real curve_dice(const Tensor& pred, const Tensor& truth, Real threshold = kBinarizeThreshold);

/// Model config for slices of the given size.
ModelConfig model_config_for(const PipelineConfig& cfg, std::size_t height, std::size_t width);

struct TrainOptions {
  bool log_test = true;  // evaluate the test split at every epoch end
  std::function<void(const MetricRecord&)> on_record;
};

struct TrainResult {
  std::unique_ptr<AgnModel> model;
  std::vector<MetricRecord> metrics;
  std::size_t graph_builds = 0;
};

TrainResult train_cnn(const Dataset& data, const PipelineConfig& cfg, const TrainOptions& options = {});
/// Starts from a CNN checkpoint (its entries, optimizer state included).
TrainResult train_joint(const Dataset& data, const std::vector<CheckpointEntry>& cnn_checkpoint,
                        const PipelineConfig& cfg, const TrainOptions& options = {});

struct SliceScore {
  std::size_t index = 0;
  Real loss = 0;
  Real dice = 0;
  Tensor prob;
};

/// Eval-mode scores of the listed slices.
std::vector<SliceScore> evaluate(AgnModel& model, const Dataset& data, const std::vector<std::size_t>& indices);
/// Mean loss and mean curve dice.
MetricRecord mean_record(const std::vector<SliceScore>& scores, const Dataset& data, int iteration, Split split);

/// Rebuilds a model from checkpoint entries; the kind is joint when graph
/// attention entries are present.
std::unique_ptr<AgnModel> model_from_checkpoint(const std::vector<CheckpointEntry>& entries, const PipelineConfig& cfg,
                                                std::size_t height, std::size_t width);
/// Largest step count stored in the checkpoint.
std::int64_t checkpoint_step(const std::vector<CheckpointEntry>& entries);

std::string format_metrics_csv(const std::vector<MetricRecord>& records);
void write_metrics_csv(const std::vector<MetricRecord>& records, const std::string& path);

/// Writes slice_NNNN_{input,truth,prob,mask}.pgm for every slice of the volume,
/// plus cnn_prob and cnn_mask when a CNN model is given. Returns the file count.
std::size_t write_predictions(AgnModel& model, AgnModel* cnn_model, const PhantomVolume& vol,
                              const PreprocessConfig& pre, const std::string& out_dir);

}  // namespace agn
