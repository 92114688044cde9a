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
#include "sad/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

#include <json.hpp>

#include "sad/errors.hpp"

namespace sad {

using nlohmann::json;

namespace {

// Reads the keys of one JSON object, remembering which were consumed so that
// anything left over can be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError(name_ + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    const json& v = *it;
    bool ok;
    if constexpr (std::is_same_v<T, bool>) {
      ok = v.is_boolean();
    } else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
      ok = v.is_number_unsigned();
    } else if constexpr (std::is_integral_v<T>) {
      ok = v.is_number_integer();
    } else if constexpr (std::is_floating_point_v<T>) {
      ok = v.is_number();
    } else if constexpr (std::is_same_v<T, std::string>) {
      ok = v.is_string();
    } else {
      ok = v.is_array() && std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_number(); });
    }
    if (!ok) throw ConfigError("config: " + path(key) + " has the wrong type");
    out = v.get<T>();
  }

  template <typename Fn>
  void section(const char* key, Fn&& fn) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    Section s(*it, path(key));
    fn(s);
    s.finish();
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ConfigError("config: unknown key " + path(item.key()));
    }
  }

 private:
  std::string path(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

void read_network(Section& s, NetworkConfig& n) {
  s.get("window", n.window);
  s.get("init_seed", n.init_seed);
  s.get("prior", n.prior);
  s.get("iterations", n.iterations);
}

json network_json(const NetworkConfig& n) {
  return {{"window", n.window},
          {"init_seed", n.init_seed},
          {"prior", n.prior},
          {"iterations", n.iterations}};
}

json to_json_doc(const RunConfig& c) {
  return {
      {"version", RunConfig::kVersion},
      {"loss",
       {{"gamma", c.loss.gamma},
        {"beta", c.loss.beta},
        {"theta", c.loss.theta},
        {"alpha", c.loss.alpha},
        {"eps", c.loss.eps},
        {"detach_weight", c.loss.detach_weight}}},
      {"trainer",
       {{"learning_rate", c.trainer.learning_rate},
        {"momentum", c.trainer.momentum},
        {"weight_decay", c.trainer.weight_decay},
        {"iterations", c.trainer.iterations},
        {"batch_size", c.trainer.batch_size},
        {"seed", c.trainer.seed},
        {"lr_drop_points", c.trainer.lr_drop_points},
        {"lr_drop_factor", c.trainer.lr_drop_factor},
        {"loss_mode", loss_mode_name(c.trainer.loss_mode)}}},
      {"generator",
       {{"height", c.generator.height},
        {"width", c.generator.width},
        {"features", c.generator.features},
        {"num_classes", c.generator.num_classes},
        {"mean_objects", c.generator.mean_objects},
        {"min_objects", c.generator.min_objects},
        {"background_fraction", c.generator.background_fraction},
        {"min_size", c.generator.min_size},
        {"max_size", c.generator.max_size},
        {"max_aspect", c.generator.max_aspect},
        {"signal", c.generator.signal},
        {"class_similarity", c.generator.class_similarity},
        {"noise_sigma", c.generator.noise_sigma},
        {"world_seed", c.generator.world_seed}}},
      {"data",
       {{"labeled_count", c.data.labeled_count},
        {"unlabeled_count", c.data.unlabeled_count},
        {"test_count", c.data.test_count},
        {"labeled_seed", c.data.labeled_seed},
        {"unlabeled_seed", c.data.unlabeled_seed},
        {"test_seed", c.data.test_seed},
        {"unlabeled_background_fraction", c.data.unlabeled_background_fraction}}},
      {"student", network_json(c.student)},
      {"teacher", network_json(c.teacher)},
      {"anchors",
       {{"scales", c.anchors.scales},
        {"positive_iou", c.anchors.positive_iou},
        {"negative_iou", c.anchors.negative_iou}}},
      {"inference",
       {{"score_floor", c.inference.score_floor},
        {"pre_nms_top_k", c.inference.pre_nms_top_k},
        {"nms_iou", c.inference.nms_iou},
        {"max_detections", c.inference.max_detections}}},
      {"calibration",
       {{"tolerance", c.calibration.tolerance},
        {"max_iterations", c.calibration.max_iterations}}},
      {"mixing", {{"rho", c.mixing.rho}, {"total", c.mixing.total}, {"seed", c.mixing.seed}}},
      {"paths", {{"work_dir", c.paths.work_dir}}},
  };
}

}  // namespace

void RunConfig::validate() const {
  loss.validate();
  trainer.validate();
  generator.validate();
  anchors.validate();
  inference.validate();
  mixing.validate();
  shape(student).validate();
  shape(teacher).validate();
  if (!(data.unlabeled_background_fraction >= 0.0 && data.unlabeled_background_fraction < 1.0)) {
    throw ConfigError("config: data.unlabeled_background_fraction must lie in [0, 1)");
  }
  if (!(calibration.tolerance > 0.0) || calibration.max_iterations == 0) {
    throw ConfigError("config: calibration needs a positive tolerance and iteration budget");
  }
  for (const NetworkConfig* n : {&student, &teacher}) {
    if (!(n->prior > 0.0 && n->prior < 1.0)) throw ConfigError("config: prior must lie in (0, 1)");
  }
}

ModelShape RunConfig::shape(const NetworkConfig& net) const {
  ModelShape s;
  s.num_classes = generator.num_classes;
  s.anchors_per_cell = static_cast<int>(anchors.per_cell());
  s.window = net.window;
  s.features = generator.features;
  return s;
}

TrainerConfig RunConfig::trainer_for(const NetworkConfig& net) const {
  TrainerConfig t = trainer;
  if (net.iterations > 0) t.iterations = net.iterations;
  return t;
}

RunConfig config_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  RunConfig c;
  Section root(doc, "");
  int version = RunConfig::kVersion;
  root.get("version", version);
  if (version != RunConfig::kVersion) {
    throw ConfigError("config: unsupported version " + std::to_string(version));
  }
  root.section("loss", [&](Section& s) {
    s.get("gamma", c.loss.gamma);
    s.get("beta", c.loss.beta);
    s.get("theta", c.loss.theta);
    s.get("alpha", c.loss.alpha);
    s.get("eps", c.loss.eps);
    s.get("detach_weight", c.loss.detach_weight);
  });
  root.section("trainer", [&](Section& s) {
    s.get("learning_rate", c.trainer.learning_rate);
    s.get("momentum", c.trainer.momentum);
    s.get("weight_decay", c.trainer.weight_decay);
    s.get("iterations", c.trainer.iterations);
    s.get("batch_size", c.trainer.batch_size);
    s.get("seed", c.trainer.seed);
    s.get("lr_drop_points", c.trainer.lr_drop_points);
    s.get("lr_drop_factor", c.trainer.lr_drop_factor);
    std::string mode = loss_mode_name(c.trainer.loss_mode);
    s.get("loss_mode", mode);
    c.trainer.loss_mode = parse_loss_mode(mode);
  });
  root.section("generator", [&](Section& s) {
    auto& g = c.generator;
    s.get("height", g.height);
    s.get("width", g.width);
    s.get("features", g.features);
    s.get("num_classes", g.num_classes);
    s.get("mean_objects", g.mean_objects);
    s.get("min_objects", g.min_objects);
    s.get("background_fraction", g.background_fraction);
    s.get("min_size", g.min_size);
    s.get("max_size", g.max_size);
    s.get("max_aspect", g.max_aspect);
    s.get("signal", g.signal);
    s.get("class_similarity", g.class_similarity);
    s.get("noise_sigma", g.noise_sigma);
    s.get("world_seed", g.world_seed);
  });
  root.section("data", [&](Section& s) {
    s.get("labeled_count", c.data.labeled_count);
    s.get("unlabeled_count", c.data.unlabeled_count);
    s.get("test_count", c.data.test_count);
    s.get("labeled_seed", c.data.labeled_seed);
    s.get("unlabeled_seed", c.data.unlabeled_seed);
    s.get("test_seed", c.data.test_seed);
    s.get("unlabeled_background_fraction", c.data.unlabeled_background_fraction);
  });
  root.section("student", [&](Section& s) { read_network(s, c.student); });
  root.section("teacher", [&](Section& s) { read_network(s, c.teacher); });
  root.section("anchors", [&](Section& s) {
    s.get("scales", c.anchors.scales);
    s.get("positive_iou", c.anchors.positive_iou);
    s.get("negative_iou", c.anchors.negative_iou);
  });
  root.section("inference", [&](Section& s) {
    s.get("score_floor", c.inference.score_floor);
    s.get("pre_nms_top_k", c.inference.pre_nms_top_k);
    s.get("nms_iou", c.inference.nms_iou);
    s.get("max_detections", c.inference.max_detections);
  });
  root.section("calibration", [&](Section& s) {
    s.get("tolerance", c.calibration.tolerance);
    s.get("max_iterations", c.calibration.max_iterations);
  });
  root.section("mixing", [&](Section& s) {
    s.get("rho", c.mixing.rho);
    s.get("total", c.mixing.total);
    s.get("seed", c.mixing.seed);
  });
  root.section("paths", [&](Section& s) { s.get("work_dir", c.paths.work_dir); });
  root.finish();
  c.validate();
  return c;
}

std::string config_to_json(const RunConfig& config) { return to_json_doc(config).dump(2) + "\n"; }

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return config_from_json(buf.str());
}

std::uint64_t config_hash(const RunConfig& config) {
  // nlohmann::json keeps object keys sorted, so dump() is canonical.
  const std::string canon = to_json_doc(config).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canon) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

}  // namespace sad
