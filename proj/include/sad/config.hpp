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

#include <cstdint>
#include <string>

#include "sad/anchors.hpp"
#include "sad/loss.hpp"
#include "sad/model.hpp"
#include "sad/scene.hpp"
#include "sad/semisup.hpp"
#include "sad/teacher.hpp"
#include "sad/trainer.hpp"

namespace sad {

// Sizes and seeds of the pinned benchmark splits.
struct DataConfig {
  std::size_t labeled_count = 2000;
  std::size_t unlabeled_count = 4000;
  std::size_t test_count = 3000;
  std::uint64_t labeled_seed = 1;
  std::uint64_t unlabeled_seed = 1001;
  std::uint64_t test_seed = 9001;
  double unlabeled_background_fraction = 0.8;
};

struct NetworkConfig {
  int window = 3;
  std::uint64_t init_seed = 7;
  double prior = 0.01;
  // Zero means "use trainer.iterations".
  std::size_t iterations = 0;
};

struct PathsConfig {
  std::string work_dir = ".";
};

// One document for every pipeline stage. Worker counts are not part of it:
// they never change results.
struct RunConfig {
  static constexpr int kVersion = 1;

  LossHyperparams loss;
  TrainerConfig trainer;
  GeneratorConfig generator;
  DataConfig data;
  NetworkConfig student;
  NetworkConfig teacher{5, 8, 0.01, 0};
  AnchorConfig anchors;
  InferenceConfig inference;
  CalibrationOptions calibration;
  MixConfig mixing{1.0, 800, 1};
  PathsConfig paths;

  void validate() const;

  ModelShape shape(const NetworkConfig& net) const;
  // Trainer settings for the given network with the iteration override applied.
  TrainerConfig trainer_for(const NetworkConfig& net) const;
};

// Throws ConfigError on unknown keys, wrong types or invalid values.
RunConfig config_from_json(const std::string& text);
std::string config_to_json(const RunConfig& config);
RunConfig load_config(const std::string& path);

// FNV-1a 64 over the canonical (sorted-key, compact) serialization.
std::uint64_t config_hash(const RunConfig& config);
std::string hash_hex(std::uint64_t hash);

}  // namespace sad
