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
#include <vector>

#include "sad/box.hpp"
#include "sad/scene.hpp"

namespace sad {

struct AnchorConfig {
  std::vector<double> scales{2.0, 3.2, 5.0};  // square anchors, side in cells
  double positive_iou = 0.5;
  double negative_iou = 0.4;

  std::size_t per_cell() const { return scales.size(); }
  void validate() const;
};

// Anchors centred on every cell, indexed row-major then by scale slot.
struct AnchorSet {
  int height = 0;
  int width = 0;
  std::size_t per_cell = 0;
  std::vector<Box> boxes;

  std::size_t size() const { return boxes.size(); }
  std::size_t index(int y, int x, std::size_t slot) const {
    return (static_cast<std::size_t>(y) * width + x) * per_cell + slot;
  }
};

AnchorSet make_anchors(int height, int width, const AnchorConfig& config);

enum class AnchorStatus : std::int8_t { kNegative, kIgnore, kPositive };

struct AnchorAssignment {
  AnchorStatus status = AnchorStatus::kNegative;
  int gt_index = -1;
  int class_id = -1;
};

struct AssignmentMap {
  std::vector<AnchorAssignment> anchors;
  std::size_t num_positive = 0;
};

// Positive when the best IoU reaches positive_iou, ignored in
// [negative_iou, positive_iou), negative below. Every box with some anchor of
// non-zero IoU gets at least one positive: if none qualifies, its best
// non-positive anchor (lowest index on ties) is forced positive.
AssignmentMap assign_anchors(const AnchorSet& anchors, std::span<const GroundTruthBox> gts,
                             double positive_iou = 0.5, double negative_iou = 0.4);

}  // namespace sad
