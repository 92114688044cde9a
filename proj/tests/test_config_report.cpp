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
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sad/config.hpp"
#include "sad/errors.hpp"
#include "sad/metrics.hpp"
#include "sad/report.hpp"

using namespace sad;

TEST_CASE("config defaults") {
  const RunConfig c = config_from_json("{}");
  CHECK(c.loss.gamma == 2.0);
  CHECK(c.loss.beta == 1.5);
  CHECK(c.loss.theta == 1.8);
  CHECK(c.trainer.momentum == 0.9);
  CHECK(c.trainer.weight_decay == 1e-4);
  CHECK(c.trainer.iterations == 2000);
  CHECK(c.trainer.batch_size == 8);
  CHECK(c.trainer.learning_rate == 0.05);
  CHECK(c.trainer.lr_drop_points == std::vector<double>{0.7, 0.9});
  CHECK(c.anchors.scales.size() == 3);
  CHECK(c.student.window == 3);
  CHECK(c.calibration.tolerance == 0.02);
  CHECK(c.data.labeled_count == 2000);
}

TEST_CASE("config round trip and hash") {
  RunConfig c;
  c.loss.beta = 0.5;
  c.trainer.loss_mode = LossMode::kAdlDistill;
  c.mixing.rho = 0.25;
  const RunConfig back = config_from_json(config_to_json(c));
  CHECK(config_to_json(back) == config_to_json(c));
  CHECK(config_hash(back) == config_hash(c));
  CHECK(config_hash(c) != config_hash(RunConfig{}));
  CHECK(hash_hex(config_hash(c)).size() == 16);

  // Key order in the source document does not matter.
  const RunConfig a = config_from_json(R"({"loss": {"beta": 0.5, "gamma": 1.0}, "version": 1})");
  const RunConfig b = config_from_json(R"({"version": 1, "loss": {"gamma": 1.0, "beta": 0.5}})");
  CHECK(config_hash(a) == config_hash(b));
}

TEST_CASE("FNV-1a reference value") {
  // FNV-1a 64 of the empty string is the offset basis; checked via hash_hex.
  CHECK(hash_hex(0xcbf29ce484222325ULL) == "cbf29ce484222325");
}

TEST_CASE("config rejects bad documents") {
  CHECK_THROWS_AS(config_from_json(R"({"lose": {}})"), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"loss": {"gama": 2}})"), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"loss": {"gamma": "2"}})"), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"trainer": {"iterations": -5}})"), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"trainer": {"iterations": 0}})"), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"loss": {"gamma": -1}})"), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"trainer": {"loss_mode": "magic"}})"), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"version": 2})"), ConfigError);
  CHECK_THROWS_AS(config_from_json("not json"), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"mixing": {"rho": 1.5}})"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("config shapes") {
  RunConfig c;
  c.generator.num_classes = 2;
  c.generator.features = 5;
  const ModelShape s = c.shape(c.teacher);
  CHECK(s.num_classes == 2);
  CHECK(s.features == 5);
  CHECK(s.window == c.teacher.window);
  c.teacher.iterations = 123;
  CHECK(c.trainer_for(c.teacher).iterations == 123);
  CHECK(c.trainer_for(c.student).iterations == c.trainer.iterations);
}

namespace {

std::vector<ImageDetections> sample_images() {
  std::vector<ImageDetections> images(3);
  for (int i = 0; i < 3; ++i) {
    auto& img = images[i];
    img.scene_id = "s" + std::to_string(i);
    img.ground_truth = {{i % 2, Box{1.0 + i, 1.0, 3.3 + i, 4.1}}};
    img.detections = {{i % 2, Box{1.1 + i, 0.9, 3.2 + i, 4.0}, 0.9 - 0.1 * i},
                      {1, Box{5, 5, 7, 7.5}, 0.31234567891234},
                      {0, Box{1.0 + i, 1.0, 3.3 + i, 4.1}, 1.0 / 3.0}};
  }
  return images;
}

std::string temp_dir() {
  const auto d = std::filesystem::temp_directory_path() / "sad_test_report";
  std::filesystem::remove_all(d);
  return d.string();
}

}  // namespace

TEST_CASE("report round trip") {
  EvalReport r = evaluate(sample_images(), 2);
  r.seed = 3;
  r.config_hash = "00112233aabbccdd";
  std::stringstream buf;
  write_report(buf, r);
  const EvalReport back = read_report(buf);
  CHECK(back == r);
  std::stringstream again;
  write_report(again, back);
  std::stringstream first;
  write_report(first, r);
  CHECK(again.str() == first.str());

  EvalReport empty = evaluate({}, 2);
  std::stringstream e;
  write_report(e, empty);
  CHECK_FALSE(read_report(e).ap.has_value());
}

TEST_CASE("AP recomputed from persisted detections is bit-exact") {
  const auto images = sample_images();
  const EvalReport r = evaluate(images, 2);
  std::stringstream buf;
  write_detections(buf, images);
  const auto back = read_detections(buf);
  const EvalReport again = evaluate(back, 2);
  REQUIRE(r.ap.has_value());
  CHECK(*again.ap == *r.ap);
  CHECK(*again.ap50 == *r.ap50);
  CHECK(*again.ap75 == *r.ap75);
}

TEST_CASE("emit_report and rho sweep CSV") {
  const std::string dir = temp_dir();
  const auto images = sample_images();
  const EvalReport r = evaluate(images, 2);
  std::vector<LossLogEntry> log{{0, 0.05, 1.0, 0.5, 0.25, 0.25}, {1, 0.05, 0.9, 0.5, 0.2, 0.2}};
  emit_report(dir, r, log, images);
  CHECK(read_report(dir + "/report.json") == r);
  CHECK(evaluate(read_detections(dir + "/detections.jsonl"), 2).ap == r.ap);
  std::ifstream loss(dir + "/loss.csv");
  std::string line;
  int lines = 0;
  while (std::getline(loss, line)) ++lines;
  CHECK(lines == 3);

  const std::vector<RhoSweepRow> rows{{0.0, {0.1, 0.2}}, {0.5, {0.3}}, {1.0, {0.4, 0.5, 0.6}}};
  CHECK(rows[2].mean_ap() == doctest::Approx(0.5));
  write_rho_sweep_csv(dir + "/rho.csv", rows);
  std::ifstream csv(dir + "/rho.csv");
  std::getline(csv, line);
  CHECK(line == "rho,mean_ap,runs,ap_per_run");
  lines = 0;
  while (std::getline(csv, line)) ++lines;
  CHECK(lines == 3);

  CHECK_THROWS_AS(write_report("/nonexistent/dir/report.json", r), InputError);
  std::filesystem::remove_all(dir);
}
