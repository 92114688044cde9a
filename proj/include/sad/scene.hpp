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
#include <iosfwd>
#include <string>
#include <vector>

#include "sad/box.hpp"

namespace sad {

struct GroundTruthBox {
  int class_id = 0;
  Box box;

  friend bool operator==(const GroundTruthBox&, const GroundTruthBox&) = default;
};

enum class Split { kLabeled, kUnlabeled };

const char* split_name(Split split);
Split parse_split(const std::string& name);

// A synthetic detection image: an H x W grid of F-dimensional feature cells
// plus the class-labeled boxes that were imprinted on it.
struct Scene {
  std::string scene_id;
  int height = 0;
  int width = 0;
  int features = 0;
  std::vector<double> grid;  // (y * width + x) * features + k
  std::vector<GroundTruthBox> boxes;
  Split split = Split::kLabeled;

  double at(int y, int x, int k) const {
    return grid[(static_cast<std::size_t>(y) * width + x) * features + k];
  }

  // Throws InputError when dimensions, features or boxes break the invariants.
  void validate(int num_classes) const;

  friend bool operator==(const Scene&, const Scene&) = default;
};

struct GeneratorConfig {
  int height = 8;
  int width = 8;
  int features = 8;
  int num_classes = 3;
  // Non-background scenes hold min_objects + Poisson(mean_objects - min_objects)
  // objects.
  double mean_objects = 1.5;
  int min_objects = 1;
  double background_fraction = 0.8;   // probability of an object-free scene
  double min_size = 2.0;
  double max_size = 4.0;
  double max_aspect = 1.5;
  double signal = 1.0;
  double class_similarity = 0.5;      // shared component across class signatures
  double noise_sigma = 0.3;
  std::uint64_t world_seed = 2024;    // fixes the class signatures

  // Throws ConfigError.
  void validate() const;
  // Expected object count per scene.
  double expected_objects() const { return (1.0 - background_fraction) * mean_objects; }
};

// num_classes x features, row-major. Deterministic in world_seed.
std::vector<double> class_signatures(const GeneratorConfig& config);

// Scene `index` of the stream selected by `seed`. Scenes are independent of
// each other, so a prefix of a larger dataset equals a smaller one.
Scene generate_scene(const GeneratorConfig& config, std::uint64_t seed, std::size_t index,
                     Split split = Split::kLabeled);

std::vector<Scene> generate_scenes(const GeneratorConfig& config, std::uint64_t seed,
                                   std::size_t count, Split split = Split::kLabeled);

// Line-delimited dataset file: one header object, then one scene per line.
struct DatasetHeader {
  std::string format = "sad-scenes";
  int version = 1;
  std::string config_hash;
  std::size_t count = 0;
};

void write_dataset(std::ostream& out, const std::vector<Scene>& scenes,
                   const std::string& config_hash);
void write_dataset(const std::string& path, const std::vector<Scene>& scenes,
                   const std::string& config_hash);
std::vector<Scene> read_dataset(std::istream& in, DatasetHeader* header = nullptr);
std::vector<Scene> read_dataset(const std::string& path, DatasetHeader* header = nullptr);

double mean_box_count(const std::vector<Scene>& scenes);

}  // namespace sad
