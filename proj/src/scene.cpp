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
#include "sad/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include <json.hpp>

#include "sad/errors.hpp"

namespace sad {

using nlohmann::json;

namespace {

constexpr double kQuantum = 1e-4;
constexpr int kPlacementAttempts = 50;

double quantize(double v) { return std::round(v / kQuantum) * kQuantum; }

double overlap_1d(double a1, double a2, double b1, double b2) {
  return std::max(0.0, std::min(a2, b2) - std::max(a1, b1));
}

std::vector<double> unit_gaussian(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(static_cast<std::size_t>(n));
  double norm = 0.0;
  for (double& x : v) {
    x = normal(rng);
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

}  // namespace

const char* split_name(Split split) {
  return split == Split::kLabeled ? "labeled" : "unlabeled";
}

Split parse_split(const std::string& name) {
  if (name == "labeled") return Split::kLabeled;
  if (name == "unlabeled") return Split::kUnlabeled;
  throw InputError("unknown split tag: " + name);
}

void Scene::validate(int num_classes) const {
  if (height < 4 || width < 4 || features < 4) {
    throw InputError("scene " + scene_id + ": grid must be at least 4x4x4");
  }
  if (grid.size() != static_cast<std::size_t>(height) * width * features) {
    throw InputError("scene " + scene_id + ": grid size mismatch");
  }
  if (!std::all_of(grid.begin(), grid.end(), [](double v) { return std::isfinite(v); })) {
    throw InputError("scene " + scene_id + ": non-finite feature");
  }
  for (const auto& b : boxes) {
    if (b.class_id < 0 || b.class_id >= num_classes) {
      throw InputError("scene " + scene_id + ": class id out of range");
    }
    if (!b.box.valid() || b.box.x1 < 0.0 || b.box.y1 < 0.0 || b.box.x2 > width ||
        b.box.y2 > height) {
      throw InputError("scene " + scene_id + ": box outside the grid");
    }
  }
}

void GeneratorConfig::validate() const {
  if (height < 4 || width < 4 || features < 4) {
    throw ConfigError("generator: grid must be at least 4x4 with 4 features");
  }
  if (num_classes < 1) {
    throw ConfigError("generator: need at least one class");
  }
  if (!(min_size > 0.0) || !(max_size >= min_size) || max_size > std::min(height, width)) {
    throw ConfigError("generator: degenerate object size range");
  }
  if (!(max_aspect >= 1.0) || !(mean_objects >= 0.0) || !(noise_sigma >= 0.0)) {
    throw ConfigError("generator: invalid aspect, count or noise setting");
  }
  if (min_objects < 0 || mean_objects < min_objects) {
    throw ConfigError("generator: min_objects must lie in [0, mean_objects]");
  }
  if (!(background_fraction >= 0.0 && background_fraction <= 1.0) ||
      !(class_similarity >= 0.0 && class_similarity <= 1.0)) {
    throw ConfigError("generator: fractions must lie in [0, 1]");
  }
  // Largest object at the largest aspect must still fit.
  const double s = std::sqrt(max_aspect);
  if (max_size * s > std::min(height, width)) {
    throw ConfigError("generator: objects at max_size and max_aspect do not fit the grid");
  }
}

std::vector<double> class_signatures(const GeneratorConfig& config) {
  std::mt19937_64 rng(config.world_seed);
  const auto shared = unit_gaussian(rng, config.features);
  std::vector<double> sig;
  const double a = std::sqrt(config.class_similarity);
  const double b = std::sqrt(1.0 - config.class_similarity);
  for (int c = 0; c < config.num_classes; ++c) {
    const auto own = unit_gaussian(rng, config.features);
    for (int k = 0; k < config.features; ++k) {
      sig.push_back(a * shared[k] + b * own[k]);
    }
  }
  return sig;
}

Scene generate_scene(const GeneratorConfig& config, std::uint64_t seed, std::size_t index,
                     Split split) {
  config.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 rng(seq);

  Scene scene;
  char id[64];
  std::snprintf(id, sizeof(id), "%c%llu-%06zu", split == Split::kLabeled ? 'L' : 'U',
                static_cast<unsigned long long>(seed), index);
  scene.scene_id = id;
  scene.height = config.height;
  scene.width = config.width;
  scene.features = config.features;
  scene.split = split;
  scene.grid.assign(static_cast<std::size_t>(config.height) * config.width * config.features, 0.0);

  std::bernoulli_distribution background(config.background_fraction);
  const double extra = config.mean_objects - config.min_objects;
  std::poisson_distribution<int> count_dist(extra > 0.0 ? extra : 1.0);
  const bool is_background = background(rng);
  const int count = config.min_objects + (extra > 0.0 ? count_dist(rng) : 0);
  const int objects = is_background ? 0 : count;

  std::uniform_real_distribution<double> size_dist(config.min_size, config.max_size);
  std::uniform_real_distribution<double> log_aspect(-std::log(config.max_aspect),
                                                    std::log(config.max_aspect));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> class_dist(0, config.num_classes - 1);

  for (int o = 0; o < objects; ++o) {
    const int cls = class_dist(rng);
    const double size = size_dist(rng);
    const double r = std::exp(log_aspect(rng));
    const double w = size * std::sqrt(r);
    const double h = size / std::sqrt(r);
    Box box;
    // Prefer placements that do not heavily overlap earlier objects.
    for (int attempt = 0; attempt < kPlacementAttempts; ++attempt) {
      const double x1 = unit(rng) * (config.width - w);
      const double y1 = unit(rng) * (config.height - h);
      box = {x1, y1, x1 + w, y1 + h};
      const bool clear = std::none_of(scene.boxes.begin(), scene.boxes.end(),
                                      [&](const GroundTruthBox& g) { return iou(g.box, box) > 0.1; });
      if (clear) break;
    }
    box = {std::max(0.0, quantize(box.x1)), std::max(0.0, quantize(box.y1)),
           std::min<double>(config.width, quantize(box.x2)),
           std::min<double>(config.height, quantize(box.y2))};
    scene.boxes.push_back({cls, box});
  }

  const auto sig = class_signatures(config);
  const int f = config.features;
  for (const auto& g : scene.boxes) {
    const int x0 = static_cast<int>(std::floor(g.box.x1));
    const int x1 = std::min(config.width - 1, static_cast<int>(std::floor(g.box.x2)));
    const int y0 = static_cast<int>(std::floor(g.box.y1));
    const int y1 = std::min(config.height - 1, static_cast<int>(std::floor(g.box.y2)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double cover = overlap_1d(x, x + 1, g.box.x1, g.box.x2) *
                             overlap_1d(y, y + 1, g.box.y1, g.box.y2);
        if (cover <= 0.0) continue;
        double* cell = &scene.grid[(static_cast<std::size_t>(y) * config.width + x) * f];
        for (int k = 0; k < f; ++k) {
          cell[k] += config.signal * cover * sig[static_cast<std::size_t>(g.class_id) * f + k];
        }
      }
    }
  }
  std::normal_distribution<double> noise(0.0, 1.0);
  for (double& v : scene.grid) {
    v = quantize(v + config.noise_sigma * noise(rng));
  }
  return scene;
}

std::vector<Scene> generate_scenes(const GeneratorConfig& config, std::uint64_t seed,
                                   std::size_t count, Split split) {
  std::vector<Scene> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(generate_scene(config, seed, i, split));
  }
  return out;
}

namespace {

json scene_to_json(const Scene& s) {
  json boxes = json::array();
  for (const auto& b : s.boxes) {
    boxes.push_back({{"class_id", b.class_id},
                     {"x1", b.box.x1},
                     {"y1", b.box.y1},
                     {"x2", b.box.x2},
                     {"y2", b.box.y2}});
  }
  return {{"scene_id", s.scene_id}, {"h", s.height},      {"w", s.width},
          {"f", s.features},        {"split", split_name(s.split)},
          {"grid", s.grid},         {"boxes", std::move(boxes)}};
}

Scene scene_from_json(const json& j) {
  Scene s;
  s.scene_id = j.at("scene_id").get<std::string>();
  s.height = j.at("h").get<int>();
  s.width = j.at("w").get<int>();
  s.features = j.at("f").get<int>();
  if (j.contains("split")) {
    s.split = parse_split(j.at("split").get<std::string>());
  }
  s.grid = j.at("grid").get<std::vector<double>>();
  for (const auto& b : j.at("boxes")) {
    s.boxes.push_back({b.at("class_id").get<int>(),
                       {b.at("x1").get<double>(), b.at("y1").get<double>(),
                        b.at("x2").get<double>(), b.at("y2").get<double>()}});
  }
  return s;
}

}  // namespace

void write_dataset(std::ostream& out, const std::vector<Scene>& scenes,
                   const std::string& config_hash) {
  const json header = {{"format", "sad-scenes"},
                       {"version", 1},
                       {"config_hash", config_hash},
                       {"count", scenes.size()}};
  out << header.dump() << '\n';
  for (const auto& s : scenes) {
    out << scene_to_json(s).dump() << '\n';
  }
}

void write_dataset(const std::string& path, const std::vector<Scene>& scenes,
                   const std::string& config_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw InputError("cannot open " + path + " for writing");
  }
  write_dataset(out, scenes, config_hash);
  if (!out) {
    throw InputError("failed writing " + path);
  }
}

std::vector<Scene> read_dataset(std::istream& in, DatasetHeader* header) {
  std::string line;
  if (!std::getline(in, line)) {
    throw InputError("dataset: missing header line");
  }
  DatasetHeader h;
  try {
    const json j = json::parse(line);
    h.format = j.at("format").get<std::string>();
    h.version = j.at("version").get<int>();
    h.config_hash = j.value("config_hash", "");
    h.count = j.at("count").get<std::size_t>();
  } catch (const json::exception& e) {
    throw InputError(std::string("dataset: bad header: ") + e.what());
  }
  if (h.format != "sad-scenes" || h.version != 1) {
    throw InputError("dataset: unsupported format or version");
  }
  std::vector<Scene> scenes;
  scenes.reserve(h.count);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      scenes.push_back(scene_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw InputError(std::string("dataset: bad record: ") + e.what());
    }
  }
  if (scenes.size() != h.count) {
    throw InputError("dataset: header count does not match record count");
  }
  if (header) *header = h;
  return scenes;
}

std::vector<Scene> read_dataset(const std::string& path, DatasetHeader* header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InputError("cannot open dataset " + path);
  }
  return read_dataset(in, header);
}

double mean_box_count(const std::vector<Scene>& scenes) {
  if (scenes.empty()) return 0.0;
  std::size_t total = 0;
  for (const auto& s : scenes) total += s.boxes.size();
  return static_cast<double>(total) / static_cast<double>(scenes.size());
}

}  // namespace sad
