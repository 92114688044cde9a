// Copyright 2026 The SAD Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sad/anchors.hpp"
#include "sad/loss.hpp"
#include "sad/model.hpp"
#include "sad/scene.hpp"

namespace sad {

enum class LossMode { kBaseline, kAdlDistill, kFdlBaseline, kMimicBaseline, kSelfDistill };

const char* loss_mode_name(LossMode mode);
LossMode parse_loss_mode(const std::string& name);

struct TrainerConfig {
  double learning_rate = 0.05;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::size_t iterations = 2000;
  std::size_t batch_size = 8;
  std::uint64_t seed = 1;
  std::vector<double> lr_drop_points{0.7, 0.9};
  double lr_drop_factor = 0.1;
  LossMode loss_mode = LossMode::kBaseline;
  std::size_t workers = 1;

  void validate() const;
  double learning_rate_at(std::size_t iteration) const;
};

// One image of the transfer set together with how it is supervised.
struct TrainingExample {
  const Scene* scene = nullptr;
  // Boxes behind focal and localization terms: ground truth on labeled
  // images, teacher hard targets on unlabeled ones.
  std::vector<GroundTruthBox> boxes;
  bool use_focal = true;
  bool use_loc = true;
  bool use_soft = false;
  // Teacher probabilities, anchor-major (anchors x classes). Required when
  // use_soft is set.
  const std::vector<float>* soft_targets = nullptr;
};

// Assignment-derived targets for one example.
struct PreparedExample {
  const TrainingExample* source = nullptr;
  std::vector<std::int8_t> labels;  // anchors x classes: +1, -1, or 0 for none
  std::vector<std::size_t> positive_anchors;
  std::vector<BoxDelta> loc_targets;  // parallel to positive_anchors
  std::size_t num_positive = 0;
};

PreparedExample prepare_example(const TrainingExample& example, const AnchorSet& anchors,
                                const AnchorConfig& anchor_config, int num_classes);

// Loss of one image and, when grad is non-empty, its gradient with respect
// to the student parameters accumulated into grad. `teacher` is only used by
// the mimic baseline.
ImageLossBreakdown evaluate_image(const DenseModel& student, const DenseModel* teacher,
                                  const PreparedExample& example, LossMode mode,
                                  const LossHyperparams& hp, std::span<double> grad = {});

struct LossLogEntry {
  std::size_t iteration = 0;
  double learning_rate = 0.0;
  double total = 0.0;
  double focal = 0.0;  // focal_sum / positives, batch mean
  double soft = 0.0;   // distillation term after its normalizer, batch mean
  double loc = 0.0;

  friend bool operator==(const LossLogEntry&, const LossLogEntry&) = default;
};

struct TrainResult {
  DenseModel model;
  std::vector<LossLogEntry> log;
};

// Minibatch SGD with momentum and weight decay (biases are not decayed).
// Batches are drawn from a seeded per-epoch shuffle; per-image gradients are
// summed in batch order regardless of the worker count.
//
// Throws UsageError when the loss mode and the supplied targets disagree and
// NumericalError when a loss term turns non-finite.
TrainResult train(const DenseModel& initial, const DenseModel* teacher,
                  std::span<const TrainingExample> examples, const TrainerConfig& config,
                  const LossHyperparams& hp, const AnchorConfig& anchor_config);

void write_loss_log_csv(const std::string& path, const std::vector<LossLogEntry>& log);

}  // namespace sad
