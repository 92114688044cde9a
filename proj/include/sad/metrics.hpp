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

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sad/scene.hpp"
#include "sad/teacher.hpp"

namespace sad {

// IoU thresholds 0.50, 0.55, ..., 0.95.
inline constexpr std::size_t kNumIouThresholds = 10;
std::array<double, kNumIouThresholds> coco_iou_thresholds();

struct MatchResult {
  std::vector<std::size_t> order;  // detection indices by descending score
  std::vector<bool> det_tp;        // indexed like the input detections
  std::vector<bool> gt_matched;    // indexed like the input ground truth
};

// Greedy matching of one image: detections in descending score (ties by
// lower index) each take the unmatched same-class box of highest IoU at or
// above iou_thresh.
MatchResult match_detections(const std::vector<Detection>& dets,
                             const std::vector<GroundTruthBox>& gts, double iou_thresh);

struct ImageDetections {
  std::string scene_id;
  std::vector<Detection> detections;
  std::vector<GroundTruthBox> ground_truth;
};

struct PrCurve {
  int class_id = 0;
  double iou = 0.5;
  std::vector<double> recall;     // 101 points, 0 to 1
  std::vector<double> precision;  // interpolated precision at each recall point

  friend bool operator==(const PrCurve&, const PrCurve&) = default;
};

struct EvalReport {
  std::optional<double> ap;    // mean over IoU 0.50:0.95 and classes
  std::optional<double> ap50;
  std::optional<double> ap75;
  std::vector<std::optional<double>> per_class_ap;
  std::vector<PrCurve> pr_curves;
  std::size_t num_images = 0;
  std::size_t num_ground_truth = 0;
  std::uint64_t seed = 0;
  std::string config_hash;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

// 101-point interpolated AP for one class at one IoU threshold, pooled over
// images. Empty when the class has no ground truth.
std::optional<double> average_precision(const std::vector<ImageDetections>& images,
                                        int class_id, double iou_thresh,
                                        PrCurve* curve = nullptr);

// Classes without ground truth are left out of every mean; a dataset
// without ground truth yields empty ap/ap50/ap75.
EvalReport evaluate(const std::vector<ImageDetections>& images, int num_classes);

}  // namespace sad
