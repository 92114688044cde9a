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
#include <string>
#include <vector>

#include "sad/anchors.hpp"
#include "sad/model.hpp"
#include "sad/scene.hpp"

namespace sad {

struct Detection {
  int class_id = 0;
  Box box;
  double score = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct InferenceConfig {
  double score_floor = 0.05;
  std::size_t pre_nms_top_k = 1000;
  double nms_iou = 0.5;
  std::size_t max_detections = 100;  // per image, after NMS

  void validate() const;
};

struct Prediction {
  // Decoded, floor-filtered, top-k detections before suppression, by
  // descending score.
  std::vector<Detection> detections;
  // sigmoid of every class logit, anchor-major. Taken before any filtering
  // so suppressed and low-scoring anchors keep their soft targets.
  std::vector<float> soft_targets;
};

// Throws InputError when the model has non-finite parameters.
Prediction predict(const DenseModel& model, const Scene& scene, const AnchorSet& anchors,
                   const InferenceConfig& config);

// Greedy class-wise suppression. Input is sorted canonically first (score
// descending, then class, then coordinates, then input position), so the
// result does not depend on input order. A box is dropped when its IoU with
// a kept box of the same class exceeds iou_thresh.
std::vector<Detection> nms(std::vector<Detection> dets, double iou_thresh = 0.5);

// predict + nms + max_detections cap.
std::vector<Detection> detect(const DenseModel& model, const Scene& scene,
                              const AnchorSet& anchors, const InferenceConfig& config);

struct CalibrationOptions {
  double tolerance = 0.02;  // relative to the labeled average
  std::size_t max_iterations = 50;
};

struct CalibrationResult {
  double threshold = 0.5;
  double avg_instances_labeled = 0.0;
  double avg_instances_unlabeled = 0.0;
  bool within_tolerance = false;
  // Set when even the lowest threshold yields too few instances.
  bool boundary = false;
};

// Bisects for the smallest threshold whose mean per-scene count of
// post-suppression scores at or above it does not exceed the labeled
// average, then keeps whichever side of that step lands closer to the
// target. Scores are per scene.
CalibrationResult calibrate_threshold(const std::vector<std::vector<double>>& scene_scores,
                                      double labeled_avg_instances,
                                      const CalibrationOptions& options = {});

CalibrationResult calibrate_threshold(const DenseModel& teacher,
                                      const std::vector<Scene>& unlabeled,
                                      double labeled_avg_instances, const AnchorSet& anchors,
                                      const InferenceConfig& inference,
                                      const CalibrationOptions& options = {},
                                      std::size_t workers = 1);

struct TargetRecord {
  std::string scene_id;
  Split split = Split::kUnlabeled;
  std::vector<Detection> hard_targets;
  std::vector<float> soft_targets;

  friend bool operator==(const TargetRecord&, const TargetRecord&) = default;
};

std::vector<TargetRecord> generate_targets(const DenseModel& teacher,
                                           const std::vector<Scene>& scenes, double threshold,
                                           const AnchorSet& anchors,
                                           const InferenceConfig& inference,
                                           std::size_t workers = 1);

struct TargetFileHeader {
  std::string config_hash;
  std::size_t count = 0;
  std::size_t num_classes = 0;
  CalibrationResult calibration;
};

// Writes `path` (one JSON line per scene after a header line) and a sibling
// `path + ".soft.bin"` holding every soft-target block as little-endian
// float32, referenced from the records by file name and byte offset.
void write_target_records(const std::string& path, const std::vector<TargetRecord>& records,
                          const TargetFileHeader& header);
std::vector<TargetRecord> read_target_records(const std::string& path,
                                              TargetFileHeader* header = nullptr);

}  // namespace sad
