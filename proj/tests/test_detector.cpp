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

#include <cmath>
#include <random>
#include <sstream>

#include "sad/anchors.hpp"
#include "sad/box.hpp"
#include "sad/errors.hpp"
#include "sad/gradcheck.hpp"
#include "sad/model.hpp"
#include "sad/scene.hpp"
#include "sad/metrics.hpp"
#include "sad/teacher.hpp"
#include "sad/trainer.hpp"

using namespace sad;

namespace {

GeneratorConfig small_world() {
  GeneratorConfig g;
  g.height = 8;
  g.width = 8;
  g.features = 4;
  g.num_classes = 2;
  g.background_fraction = 0.0;
  g.max_size = 4.0;
  g.max_aspect = 1.2;
  return g;
}

}  // namespace

TEST_CASE("iou") {
  const Box a{0, 0, 2, 2};
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, Box{3, 3, 4, 4}) == 0.0);
  CHECK(iou(a, Box{2, 0, 4, 2}) == 0.0);  // touching edges
  CHECK(iou(a, Box{1, 0, 3, 2}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK_THROWS_AS(iou(a, Box{1, 1, 1, 2}), InputError);
}

TEST_CASE("box coding") {
  const Box anchor = Box::from_center(5, 5, 2, 2);
  const BoxDelta same = encode_box(anchor, anchor);
  CHECK(same.dx == 0.0);
  CHECK(same.dy == 0.0);
  CHECK(same.dw == 0.0);
  CHECK(same.dh == 0.0);
  const BoxDelta shifted = encode_box(anchor, Box::from_center(6, 5, 2, 2));
  CHECK(shifted.dx == 0.5);
  CHECK(shifted.dy == 0.0);
  CHECK(shifted.dw == 0.0);
  CHECK(shifted.dh == 0.0);
  CHECK_THROWS_AS(encode_box(anchor, Box{1, 1, 1, 3}), InputError);
  CHECK_THROWS_AS(decode_box(Box{1, 1, 0, 3}, {}), InputError);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> c(0.0, 20.0);
  std::uniform_real_distribution<double> s(0.2, 8.0);
  for (int i = 0; i < 1000; ++i) {
    const Box a = Box::from_center(c(rng), c(rng), s(rng), s(rng));
    const Box g = Box::from_center(c(rng), c(rng), s(rng), s(rng));
    const Box back = decode_box(a, encode_box(a, g));
    CHECK(std::abs(back.x1 - g.x1) < 1e-9);
    CHECK(std::abs(back.y1 - g.y1) < 1e-9);
    CHECK(std::abs(back.x2 - g.x2) < 1e-9);
    CHECK(std::abs(back.y2 - g.y2) < 1e-9);
  }
}

TEST_CASE("smooth_l1") {
  CHECK(smooth_l1(0.3, 0.3).value == 0.0);
  CHECK(smooth_l1(0.5, 0.0).value == 0.125);
  CHECK(smooth_l1(-2.0, 0.0).value == 1.5);
  CHECK(smooth_l1(-2.0, 0.0).grad_logit == -1.0);
  CHECK(smooth_l1(0.5, 0.0).grad_logit == 0.5);
}

TEST_CASE("scene generation") {
  GeneratorConfig g;
  SUBCASE("deterministic per seed and index") {
    CHECK(generate_scene(g, 5, 3) == generate_scene(g, 5, 3));
    CHECK_FALSE(generate_scene(g, 5, 3) == generate_scene(g, 6, 3));
    const auto batch = generate_scenes(g, 5, 4);
    CHECK(batch[3] == generate_scene(g, 5, 3));
  }
  SUBCASE("zero objects leaves pure noise") {
    g.mean_objects = 0.0;
    g.min_objects = 0;
    const Scene s = generate_scene(g, 1, 0);
    CHECK(s.boxes.empty());
    double mean = 0.0;
    for (double v : s.grid) mean += v;
    mean /= static_cast<double>(s.grid.size());
    CHECK(std::abs(mean) < 0.1);
  }
  SUBCASE("boxes stay inside the grid and validate") {
    for (const auto& s : generate_scenes(g, 2, 200)) {
      CHECK_NOTHROW(s.validate(g.num_classes));
    }
  }
  SUBCASE("mean object count over 10^4 scenes") {
    g.height = 8;
    g.width = 8;
    g.features = 4;
    g.max_size = 4.0;
    g.max_aspect = 1.2;
    const auto scenes = generate_scenes(g, 3, 10000);
    const double mean = mean_box_count(scenes);
    CHECK(std::abs(mean - g.expected_objects()) <= 0.05 * g.expected_objects());
    g.background_fraction = 0.5;
    const double bg_mean = mean_box_count(generate_scenes(g, 3, 10000));
    CHECK(std::abs(bg_mean - g.expected_objects()) <= 0.05 * g.expected_objects());
  }
  SUBCASE("degenerate configuration") {
    g.min_size = 3.0;
    g.max_size = 2.0;
    CHECK_THROWS_AS(generate_scene(g, 1, 0), ConfigError);
    g = {};
    g.min_objects = 2;
    CHECK_THROWS_AS(g.validate(), ConfigError);
    g = {};
    g.max_size = 40.0;
    CHECK_THROWS_AS(g.validate(), ConfigError);
  }
  SUBCASE("dataset file round trip") {
    const auto scenes = generate_scenes(small_world(), 4, 5);
    std::stringstream buf;
    write_dataset(buf, scenes, "abc");
    DatasetHeader h;
    const auto back = read_dataset(buf, &h);
    CHECK(back == scenes);
    CHECK(h.count == 5);
    CHECK(h.config_hash == "abc");
    std::stringstream empty;
    write_dataset(empty, {}, "abc");
    CHECK(read_dataset(empty).empty());
  }
}

TEST_CASE("anchors and assignment") {
  AnchorConfig cfg;
  const AnchorSet anchors = make_anchors(6, 7, cfg);
  CHECK(anchors.size() == 6u * 7u * 3u);
  CHECK(anchors.boxes[anchors.index(2, 3, 1)] == Box::from_center(3.5, 2.5, 3.2, 3.2));

  SUBCASE("no boxes means all negative") {
    const auto map = assign_anchors(anchors, {});
    CHECK(map.num_positive == 0);
    for (const auto& a : map.anchors) CHECK(a.status == AnchorStatus::kNegative);
  }
  SUBCASE("coincident box") {
    const Box b = anchors.boxes[anchors.index(3, 3, 2)];
    const std::vector<GroundTruthBox> gts{{1, b}};
    const auto map = assign_anchors(anchors, gts);
    const auto& a = map.anchors[anchors.index(3, 3, 2)];
    CHECK(a.status == AnchorStatus::kPositive);
    CHECK(a.class_id == 1);
    CHECK(a.gt_index == 0);
  }
  SUBCASE("forcing when the best IoU is below the positive threshold") {
    // 2 x 4.6 on a cell centre: best is the 3.2 anchor at 6.4 / 13.04.
    const std::vector<GroundTruthBox> gts{{0, Box{2.5, 1.2, 4.5, 5.8}}};
    double best = 0.0;
    std::size_t best_i = 0;
    for (std::size_t i = 0; i < anchors.size(); ++i) {
      const double o = iou(anchors.boxes[i], gts[0].box);
      if (o > best) {
        best = o;
        best_i = i;
      }
    }
    REQUIRE(best > 0.4);
    REQUIRE(best < 0.5);
    const auto map = assign_anchors(anchors, gts);
    CHECK(map.num_positive == 1);
    CHECK(map.anchors[best_i].status == AnchorStatus::kPositive);
  }
  SUBCASE("positives cover every box with overlap") {
    GeneratorConfig g;
    g.height = 6;
    g.width = 7;
    g.max_size = 4.0;
    g.mean_objects = 4.0;
    g.background_fraction = 0.0;
    for (const auto& s : generate_scenes(g, 9, 300)) {
      const auto map = assign_anchors(anchors, s.boxes);
      CHECK(map.num_positive >= s.boxes.size());
      for (std::size_t gi = 0; gi < s.boxes.size(); ++gi) {
        bool covered = false;
        for (const auto& a : map.anchors) {
          covered = covered || (a.status == AnchorStatus::kPositive && a.gt_index == static_cast<int>(gi));
        }
        CHECK(covered);
      }
    }
  }
  SUBCASE("ignore band") {
    const Box anchor = anchors.boxes[anchors.index(3, 3, 1)];
    // Same centre, 0.45 area ratio.
    const double side = std::sqrt(0.45) * anchor.width();
    const std::vector<GroundTruthBox> gts{
        {0, Box::from_center(anchor.center_x(), anchor.center_y(), side, side)}};
    const auto map = assign_anchors(anchors, gts, 0.5, 0.4);
    std::size_t ignored = 0;
    for (const auto& a : map.anchors) ignored += a.status == AnchorStatus::kIgnore;
    CHECK(ignored >= 1);
  }
}

TEST_CASE("dense model") {
  const GeneratorConfig g = small_world();
  ModelShape shape;
  shape.num_classes = 2;
  shape.features = 4;
  const Scene scene = generate_scene(g, 1, 0);

  SUBCASE("zero parameters give zero logits") {
    const DenseModel zero(shape);
    const ModelOutput out = forward(zero, scene);
    CHECK(out.num_anchors == 8u * 8u * 3u);
    CHECK(out.logits.size() == out.num_anchors * 2);
    for (double z : out.logits) CHECK(z == 0.0);
  }
  SUBCASE("deterministic forward") {
    const DenseModel m = init_model(shape, 3);
    CHECK(forward(m, scene).logits == forward(m, scene).logits);
    CHECK(init_model(shape, 3) == m);
  }
  SUBCASE("dimension mismatch") {
    ModelShape other = shape;
    other.features = 5;
    CHECK_THROWS_AS(forward(DenseModel(other), scene), InputError);
    other = shape;
    other.window = 4;
    CHECK_THROWS_AS(DenseModel{other}, ConfigError);
  }
  SUBCASE("checkpoint round trip") {
    const DenseModel m = init_model(shape, 5);
    std::stringstream buf;
    save_checkpoint(buf, m, 0xfeedULL);
    std::uint64_t hash = 0;
    const DenseModel back = load_checkpoint(buf, &hash);
    CHECK(back == m);
    CHECK(hash == 0xfeedULL);
    std::stringstream bad("not a checkpoint");
    CHECK_THROWS_AS(load_checkpoint(bad), InputError);
  }
}

TEST_CASE("end-to-end gradient matches finite differences in every loss mode") {
  const GeneratorConfig g = small_world();
  ModelShape shape;
  shape.num_classes = 2;
  shape.features = 4;
  AnchorConfig ac;
  const AnchorSet anchors = make_anchors(g.height, g.width, ac);
  Scene scene = generate_scene(g, 11, 0);
  for (std::size_t i = 1; scene.boxes.empty(); ++i) scene = generate_scene(g, 11, i);

  DenseModel student = init_model(shape, 21, 0.2);
  {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n(0.0, 0.3);
    for (double& p : student.parameters()) p += n(rng);
  }
  const DenseModel teacher = init_model(shape, 22, 0.1);
  std::vector<float> soft(anchors.size() * 2);
  {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (float& q : soft) q = static_cast<float>(u(rng));
  }
  TrainingExample ex{&scene, scene.boxes, true, true, true, &soft};
  const PreparedExample prepared = prepare_example(ex, anchors, ac, 2);
  REQUIRE(prepared.num_positive > 0);
  LossHyperparams hp;

  std::mt19937_64 pick(6);
  std::uniform_int_distribution<std::size_t> idx(0, shape.parameter_count() - 1);
  for (LossMode mode : {LossMode::kBaseline, LossMode::kAdlDistill, LossMode::kFdlBaseline,
                        LossMode::kMimicBaseline, LossMode::kSelfDistill}) {
    TrainingExample local = ex;
    local.use_soft = mode != LossMode::kBaseline;
    PreparedExample p = prepared;
    p.source = &local;
    std::vector<double> grad(shape.parameter_count(), 0.0);
    evaluate_image(student, &teacher, p, mode, hp, grad);
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t j = idx(pick);
      const double fd = fd_gradient(
          [&](double v) {
            DenseModel m = student;
            m.parameters()[j] = v;
            return evaluate_image(m, &teacher, p, mode, hp).total;
          },
          student.parameters()[j]);
      INFO(loss_mode_name(mode) << " param " << j << " analytic " << grad[j] << " fd " << fd);
      CHECK(relative_gradient_error(grad[j], fd) <= 1e-5);
    }
  }
}

TEST_CASE("training") {
  GeneratorConfig g = small_world();
  const auto scenes = generate_scenes(g, 3, 40);
  ModelShape shape;
  shape.num_classes = 2;
  shape.features = 4;
  AnchorConfig ac;
  LossHyperparams hp;
  TrainerConfig tc;
  tc.iterations = 60;
  tc.batch_size = 4;
  std::vector<TrainingExample> ex;
  for (const auto& s : scenes) ex.push_back({&s, s.boxes, true, true, false, nullptr});
  const DenseModel init = init_model(shape, 1);

  SUBCASE("same seed gives identical logs and parameters") {
    const auto a = train(init, nullptr, ex, tc, hp, ac);
    const auto b = train(init, nullptr, ex, tc, hp, ac);
    CHECK(a.log == b.log);
    CHECK(a.model == b.model);
    TrainerConfig par = tc;
    par.workers = 3;
    const auto c = train(init, nullptr, ex, par, hp, ac);
    CHECK(c.log == a.log);
    CHECK(c.model == a.model);
  }
  SUBCASE("learning rate schedule") {
    TrainerConfig s;
    s.iterations = 100;
    CHECK(s.learning_rate_at(0) == 0.05);
    CHECK(s.learning_rate_at(69) == 0.05);
    CHECK(s.learning_rate_at(70) == doctest::Approx(0.005));
    CHECK(s.learning_rate_at(95) == doctest::Approx(0.0005));
  }
  SUBCASE("mode and target consistency") {
    TrainerConfig adl = tc;
    adl.loss_mode = LossMode::kAdlDistill;
    CHECK_THROWS_AS(train(init, nullptr, ex, adl, hp, ac), UsageError);
    std::vector<float> soft(8 * 8 * 3 * 2, 0.5f);
    auto with_soft = ex;
    for (auto& e : with_soft) {
      e.use_soft = true;
      e.soft_targets = &soft;
    }
    CHECK_THROWS_AS(train(init, nullptr, with_soft, tc, hp, ac), UsageError);
    TrainerConfig self = tc;
    self.loss_mode = LossMode::kSelfDistill;
    ModelShape wide = shape;
    wide.window = 5;
    const DenseModel other(wide);
    CHECK_THROWS_AS(train(init, &other, with_soft, self, hp, ac), UsageError);
  }
  SUBCASE("teacher copied into the student has zero first-iteration ADL") {
    const auto teacher = train(init, nullptr, ex, tc, hp, ac).model;
    const AnchorSet anchors = make_anchors(g.height, g.width, ac);
    std::vector<std::vector<float>> soft(scenes.size());
    auto with_soft = ex;
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      const ModelOutput out = forward(teacher, scenes[i]);
      for (double z : out.logits) soft[i].push_back(static_cast<float>(sigmoid(z)));
      with_soft[i].use_soft = true;
      with_soft[i].soft_targets = &soft[i];
    }
    (void)anchors;
    TrainerConfig self = tc;
    self.loss_mode = LossMode::kSelfDistill;
    self.iterations = 2;
    const auto r = train(teacher, &teacher, with_soft, self, hp, ac);
    CHECK(r.log[0].soft < 1e-9);
  }
  SUBCASE("non-finite loss aborts with the scene id") {
    Scene bad = scenes[0];
    bad.grid[0] = std::numeric_limits<double>::infinity();
    std::vector<TrainingExample> one{{&bad, bad.boxes, true, true, false, nullptr}};
    TrainerConfig t1 = tc;
    t1.iterations = 1;
    t1.batch_size = 1;
    try {
      train(init, nullptr, one, t1, hp, ac);
      FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
      CHECK(e.scene_id() == bad.scene_id);
    }
  }
}

TEST_CASE("sanity world: separable one-class scenes are learned") {
  GeneratorConfig g;
  g.num_classes = 1;
  g.features = 4;
  g.min_size = 2.0;
  g.max_size = 2.0;
  g.max_aspect = 1.0;
  g.noise_sigma = 0.05;
  g.signal = 2.0;
  g.mean_objects = 1.0;
  g.min_objects = 1;
  g.background_fraction = 0.0;
  const auto train_scenes = generate_scenes(g, 1, 500);
  const auto test_scenes = generate_scenes(g, 99, 300);
  AnchorConfig ac;
  ModelShape shape;
  shape.num_classes = 1;
  shape.features = 4;
  std::vector<TrainingExample> ex;
  for (const auto& s : train_scenes) ex.push_back({&s, s.boxes, true, true, false, nullptr});
  const TrainResult r = train(init_model(shape, 1), nullptr, ex, TrainerConfig{}, LossHyperparams{}, ac);

  // Smoke property: trailing-100 mean at the end is below the first 100.
  double head = 0.0, tail = 0.0;
  for (std::size_t i = 0; i < 100; ++i) {
    head += r.log[i].total;
    tail += r.log[r.log.size() - 1 - i].total;
  }
  CHECK(tail < head);

  const AnchorSet anchors = make_anchors(g.height, g.width, ac);
  std::vector<ImageDetections> images;
  for (const auto& s : test_scenes) {
    images.push_back({s.scene_id, detect(r.model, s, anchors, InferenceConfig{}), s.boxes});
  }
  const EvalReport rep = evaluate(images, 1);
  REQUIRE(rep.ap.has_value());
  CHECK(*rep.ap >= 0.9);
}
