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
#include "sad/anchors.hpp"

#include "sad/errors.hpp"

namespace sad {

void AnchorConfig::validate() const {
  if (scales.empty()) {
    throw ConfigError("anchors: need at least one scale");
  }
  for (double s : scales) {
    if (!(s > 0.0)) throw ConfigError("anchors: scales must be positive");
  }
  if (!(negative_iou >= 0.0 && negative_iou <= positive_iou && positive_iou <= 1.0)) {
    throw ConfigError("anchors: need 0 <= negative_iou <= positive_iou <= 1");
  }
}

AnchorSet make_anchors(int height, int width, const AnchorConfig& config) {
  config.validate();
  AnchorSet set;
  set.height = height;
  set.width = width;
  set.per_cell = config.per_cell();
  set.boxes.reserve(static_cast<std::size_t>(height) * width * set.per_cell);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (double s : config.scales) {
        set.boxes.push_back(Box::from_center(x + 0.5, y + 0.5, s, s));
      }
    }
  }
  return set;
}

AssignmentMap assign_anchors(const AnchorSet& anchors, std::span<const GroundTruthBox> gts,
                             double positive_iou, double negative_iou) {
  if (!(negative_iou >= 0.0 && negative_iou <= positive_iou && positive_iou <= 1.0)) {
    throw InputError("assign_anchors: need 0 <= t_neg <= t_pos <= 1");
  }
  const std::size_t n = anchors.size();
  AssignmentMap map;
  map.anchors.resize(n);
  if (gts.empty()) {
    return map;
  }

  std::vector<double> overlaps(n * gts.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t g = 0; g < gts.size(); ++g) {
      overlaps[i * gts.size() + g] = iou(anchors.boxes[i], gts[g].box);
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    double best = 0.0;
    int best_g = -1;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (overlaps[i * gts.size() + g] > best) {
        best = overlaps[i * gts.size() + g];
        best_g = static_cast<int>(g);
      }
    }
    auto& a = map.anchors[i];
    if (best >= positive_iou && best_g >= 0) {
      a = {AnchorStatus::kPositive, best_g, gts[best_g].class_id};
    } else if (best >= negative_iou && best_g >= 0) {
      a.status = AnchorStatus::kIgnore;
    }
  }

  for (std::size_t g = 0; g < gts.size(); ++g) {
    bool covered = false;
    for (const auto& a : map.anchors) {
      if (a.status == AnchorStatus::kPositive && a.gt_index == static_cast<int>(g)) {
        covered = true;
        break;
      }
    }
    if (covered) continue;
    double best = 0.0;
    std::size_t best_i = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (map.anchors[i].status == AnchorStatus::kPositive) continue;
      if (overlaps[i * gts.size() + g] > best) {
        best = overlaps[i * gts.size() + g];
        best_i = i;
      }
    }
    if (best_i < n) {
      map.anchors[best_i] = {AnchorStatus::kPositive, static_cast<int>(g), gts[g].class_id};
    }
  }

  for (const auto& a : map.anchors) {
    if (a.status == AnchorStatus::kPositive) ++map.num_positive;
  }
  return map;
}

}  // namespace sad
