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
#include "sad/teacher.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <tuple>

#include <json.hpp>

#include "sad/errors.hpp"
#include "sad/loss.hpp"
#include "sad/parallel.hpp"

namespace sad {

using nlohmann::json;

void InferenceConfig::validate() const {
  if (!(score_floor >= 0.0 && score_floor <= 1.0) || !(nms_iou >= 0.0 && nms_iou <= 1.0)) {
    throw ConfigError("inference: score floor and NMS IoU must lie in [0, 1]");
  }
  if (pre_nms_top_k == 0 || max_detections == 0) {
    throw ConfigError("inference: top-k and max detections must be positive");
  }
}

Prediction predict(const DenseModel& model, const Scene& scene, const AnchorSet& anchors,
                   const InferenceConfig& config) {
  for (double v : model.parameters()) {
    if (!std::isfinite(v)) throw InputError("predict: model has non-finite parameters");
  }
  const ModelOutput out = forward(model, scene);
  if (out.num_anchors != anchors.size()) {
    throw InputError("predict: anchor set does not match scene " + scene.scene_id);
  }
  const int classes = out.num_classes;
  Prediction pred;
  pred.soft_targets.resize(out.logits.size());
  std::vector<std::size_t> candidates;
  for (std::size_t t = 0; t < out.logits.size(); ++t) {
    const double p = sigmoid(out.logits[t]);
    pred.soft_targets[t] = static_cast<float>(p);
    if (p >= config.score_floor) candidates.push_back(t);
  }
  std::stable_sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
    return out.logits[a] > out.logits[b];
  });
  if (candidates.size() > config.pre_nms_top_k) candidates.resize(config.pre_nms_top_k);

  const Box frame{0.0, 0.0, static_cast<double>(scene.width), static_cast<double>(scene.height)};
  for (std::size_t t : candidates) {
    const std::size_t a = t / classes;
    const BoxDelta d{out.deltas[a * 4], out.deltas[a * 4 + 1], out.deltas[a * 4 + 2],
                     out.deltas[a * 4 + 3]};
    Box b = decode_box(anchors.boxes[a], d);
    b = {std::clamp(b.x1, frame.x1, frame.x2), std::clamp(b.y1, frame.y1, frame.y2),
         std::clamp(b.x2, frame.x1, frame.x2), std::clamp(b.y2, frame.y1, frame.y2)};
    if (!b.valid()) continue;
    pred.detections.push_back({static_cast<int>(t % classes), b, sigmoid(out.logits[t])});
  }
  return pred;
}

std::vector<Detection> nms(std::vector<Detection> dets, double iou_thresh) {
  for (const auto& d : dets) {
    if (!std::isfinite(d.score)) throw InputError("nms: non-finite score");
  }
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    const auto& a = dets[i];
    const auto& b = dets[j];
    return std::make_tuple(-a.score, a.class_id, a.box.x1, a.box.y1, a.box.x2, a.box.y2, i) <
           std::make_tuple(-b.score, b.class_id, b.box.x1, b.box.y1, b.box.x2, b.box.y2, j);
  });
  std::vector<Detection> kept;
  for (std::size_t i : order) {
    const auto& d = dets[i];
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
      return k.class_id == d.class_id && iou(k.box, d.box) > iou_thresh;
    });
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

std::vector<Detection> detect(const DenseModel& model, const Scene& scene,
                              const AnchorSet& anchors, const InferenceConfig& config) {
  auto kept = nms(predict(model, scene, anchors, config).detections, config.nms_iou);
  if (kept.size() > config.max_detections) kept.resize(config.max_detections);
  return kept;
}

namespace {

double mean_count_at(const std::vector<std::vector<double>>& scores, double t) {
  std::size_t n = 0;
  for (const auto& s : scores) {
    n += static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [t](double v) { return v >= t; }));
  }
  return static_cast<double>(n) / static_cast<double>(scores.size());
}

}  // namespace

CalibrationResult calibrate_threshold(const std::vector<std::vector<double>>& scene_scores,
                                      double labeled_avg_instances,
                                      const CalibrationOptions& options) {
  if (scene_scores.empty()) {
    throw InputError("calibrate_threshold: no unlabeled scenes");
  }
  if (!(labeled_avg_instances > 0.0)) {
    throw InputError("calibrate_threshold: labeled average must be positive");
  }
  const double target = labeled_avg_instances;
  const double tol = options.tolerance * target;
  CalibrationResult r;
  r.avg_instances_labeled = target;

  // count(t) is non-increasing in t; count at the open lower end is every score.
  double lo = 0.0;
  double hi = 1.0;
  const double at_lo = mean_count_at(scene_scores, std::nextafter(0.0, 1.0));
  if (at_lo < target - tol) {
    r.threshold = std::nextafter(0.0, 1.0);
    r.avg_instances_unlabeled = at_lo;
    r.boundary = true;
    return r;
  }
  for (std::size_t i = 0; i < options.max_iterations; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mean_count_at(scene_scores, mid) <= target) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  const double above = mean_count_at(scene_scores, hi);
  const double below = lo > 0.0 ? mean_count_at(scene_scores, lo) : at_lo;
  if (std::abs(below - target) < std::abs(above - target)) {
    r.threshold = lo > 0.0 ? lo : std::nextafter(0.0, 1.0);
    r.avg_instances_unlabeled = below;
  } else {
    r.threshold = hi;
    r.avg_instances_unlabeled = above;
  }
  r.within_tolerance = std::abs(r.avg_instances_unlabeled - target) <= tol;
  return r;
}

CalibrationResult calibrate_threshold(const DenseModel& teacher,
                                      const std::vector<Scene>& unlabeled,
                                      double labeled_avg_instances, const AnchorSet& anchors,
                                      const InferenceConfig& inference,
                                      const CalibrationOptions& options, std::size_t workers) {
  std::vector<std::vector<double>> scores(unlabeled.size());
  parallel_for(unlabeled.size(), workers, [&](std::size_t i) {
    for (const auto& d : detect(teacher, unlabeled[i], anchors, inference)) {
      scores[i].push_back(d.score);
    }
  });
  return calibrate_threshold(scores, labeled_avg_instances, options);
}

std::vector<TargetRecord> generate_targets(const DenseModel& teacher,
                                           const std::vector<Scene>& scenes, double threshold,
                                           const AnchorSet& anchors,
                                           const InferenceConfig& inference,
                                           std::size_t workers) {
  std::vector<TargetRecord> records(scenes.size());
  parallel_for(scenes.size(), workers, [&](std::size_t i) {
    Prediction pred = predict(teacher, scenes[i], anchors, inference);
    auto kept = nms(std::move(pred.detections), inference.nms_iou);
    if (kept.size() > inference.max_detections) kept.resize(inference.max_detections);
    TargetRecord& r = records[i];
    r.scene_id = scenes[i].scene_id;
    r.split = scenes[i].split;
    for (auto& d : kept) {
      if (d.score >= threshold) r.hard_targets.push_back(d);
    }
    r.soft_targets = std::move(pred.soft_targets);
  });
  return records;
}

namespace {

json calibration_to_json(const CalibrationResult& c) {
  return {{"threshold", c.threshold},
          {"avg_instances_labeled", c.avg_instances_labeled},
          {"avg_instances_unlabeled", c.avg_instances_unlabeled},
          {"within_tolerance", c.within_tolerance},
          {"boundary", c.boundary}};
}

CalibrationResult calibration_from_json(const json& j) {
  CalibrationResult c;
  c.threshold = j.at("threshold").get<double>();
  c.avg_instances_labeled = j.at("avg_instances_labeled").get<double>();
  c.avg_instances_unlabeled = j.at("avg_instances_unlabeled").get<double>();
  c.within_tolerance = j.at("within_tolerance").get<bool>();
  c.boundary = j.at("boundary").get<bool>();
  return c;
}

}  // namespace

void write_target_records(const std::string& path, const std::vector<TargetRecord>& records,
                          const TargetFileHeader& header) {
  const std::string blob_path = path + ".soft.bin";
  const std::string blob_name = std::filesystem::path(blob_path).filename().string();
  std::ofstream out(path, std::ios::binary);
  std::ofstream blob(blob_path, std::ios::binary);
  if (!out || !blob) throw InputError("cannot open " + path + " for writing");

  const json head = {{"format", "sad-targets"},
                     {"version", 1},
                     {"config_hash", header.config_hash},
                     {"count", records.size()},
                     {"num_classes", header.num_classes},
                     {"calibration", calibration_to_json(header.calibration)}};
  out << head.dump() << '\n';
  std::uint64_t offset = 0;
  for (const auto& r : records) {
    json hard = json::array();
    for (const auto& d : r.hard_targets) {
      hard.push_back({{"class_id", d.class_id},
                      {"x1", d.box.x1},
                      {"y1", d.box.y1},
                      {"x2", d.box.x2},
                      {"y2", d.box.y2},
                      {"score", d.score}});
    }
    const json line = {{"scene_id", r.scene_id},
                       {"split", split_name(r.split)},
                       {"hard_targets", std::move(hard)},
                       {"soft_targets",
                        {{"path", blob_name}, {"offset", offset}, {"count", r.soft_targets.size()}}}};
    out << line.dump() << '\n';
    blob.write(reinterpret_cast<const char*>(r.soft_targets.data()),
               static_cast<std::streamsize>(r.soft_targets.size() * sizeof(float)));
    offset += r.soft_targets.size() * sizeof(float);
  }
  if (!out || !blob) throw InputError("failed writing " + path);
}

std::vector<TargetRecord> read_target_records(const std::string& path, TargetFileHeader* header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open target records " + path);
  std::string line;
  if (!std::getline(in, line)) throw InputError("target records: missing header");
  TargetFileHeader h;
  std::vector<TargetRecord> records;
  try {
    const json head = json::parse(line);
    if (head.at("format").get<std::string>() != "sad-targets" || head.at("version").get<int>() != 1) {
      throw InputError("target records: unsupported format or version");
    }
    h.config_hash = head.at("config_hash").get<std::string>();
    h.count = head.at("count").get<std::size_t>();
    h.num_classes = head.at("num_classes").get<std::size_t>();
    h.calibration = calibration_from_json(head.at("calibration"));

    const auto dir = std::filesystem::path(path).parent_path();
    std::ifstream blob;
    std::string open_blob;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      TargetRecord r;
      r.scene_id = j.at("scene_id").get<std::string>();
      r.split = parse_split(j.at("split").get<std::string>());
      for (const auto& d : j.at("hard_targets")) {
        r.hard_targets.push_back({d.at("class_id").get<int>(),
                                  {d.at("x1").get<double>(), d.at("y1").get<double>(),
                                   d.at("x2").get<double>(), d.at("y2").get<double>()},
                                  d.at("score").get<double>()});
      }
      const auto& soft = j.at("soft_targets");
      const auto blob_file = (dir / soft.at("path").get<std::string>()).string();
      if (blob_file != open_blob) {
        blob = std::ifstream(blob_file, std::ios::binary);
        if (!blob) throw InputError("cannot open soft-target block " + blob_file);
        open_blob = blob_file;
      }
      r.soft_targets.resize(soft.at("count").get<std::size_t>());
      blob.seekg(static_cast<std::streamoff>(soft.at("offset").get<std::uint64_t>()));
      blob.read(reinterpret_cast<char*>(r.soft_targets.data()),
                static_cast<std::streamsize>(r.soft_targets.size() * sizeof(float)));
      if (!blob) throw InputError("soft-target block truncated for " + r.scene_id);
      records.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("target records: ") + e.what());
  }
  if (records.size() != h.count) {
    throw InputError("target records: header count does not match record count");
  }
  if (header) *header = h;
  return records;
}

}  // namespace sad
