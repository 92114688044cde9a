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
#include "sad/metrics.hpp"

#include <algorithm>
#include <numeric>

namespace sad {

std::array<double, kNumIouThresholds> coco_iou_thresholds() {
  std::array<double, kNumIouThresholds> t{};
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = 0.5 + 0.05 * static_cast<double>(i);
  return t;
}

MatchResult match_detections(const std::vector<Detection>& dets,
                             const std::vector<GroundTruthBox>& gts, double iou_thresh) {
  MatchResult r;
  r.order.resize(dets.size());
  std::iota(r.order.begin(), r.order.end(), 0);
  std::stable_sort(r.order.begin(), r.order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  r.det_tp.assign(dets.size(), false);
  r.gt_matched.assign(gts.size(), false);
  for (std::size_t d : r.order) {
    double best = iou_thresh;
    std::size_t best_g = gts.size();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (r.gt_matched[g] || gts[g].class_id != dets[d].class_id) continue;
      const double o = iou(dets[d].box, gts[g].box);
      if (o >= best) {
        if (best_g == gts.size() || o > best) {
          best = o;
          best_g = g;
        }
      }
    }
    if (best_g < gts.size()) {
      r.det_tp[d] = true;
      r.gt_matched[best_g] = true;
    }
  }
  return r;
}

std::optional<double> average_precision(const std::vector<ImageDetections>& images,
                                        int class_id, double iou_thresh, PrCurve* curve) {
  struct Scored {
    double score;
    bool tp;
  };
  std::vector<Scored> pooled;
  std::size_t num_gt = 0;
  for (const auto& img : images) {
    std::vector<Detection> dets;
    for (const auto& d : img.detections) {
      if (d.class_id == class_id) dets.push_back(d);
    }
    std::vector<GroundTruthBox> gts;
    for (const auto& g : img.ground_truth) {
      if (g.class_id == class_id) gts.push_back(g);
    }
    num_gt += gts.size();
    const MatchResult m = match_detections(dets, gts, iou_thresh);
    for (std::size_t d : m.order) pooled.push_back({dets[d].score, m.det_tp[d]});
  }
  if (num_gt == 0) return std::nullopt;

  // Stable: equal scores keep image order, then per-image rank.
  std::stable_sort(pooled.begin(), pooled.end(),
                   [](const Scored& a, const Scored& b) { return a.score > b.score; });
  std::vector<double> precision(pooled.size());
  std::vector<double> recall(pooled.size());
  std::size_t tp = 0;
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    if (pooled[i].tp) ++tp;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / static_cast<double>(num_gt);
  }
  for (std::size_t i = pooled.size(); i-- > 1;) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }

  constexpr std::size_t kPoints = 101;
  double sum = 0.0;
  if (curve) {
    curve->class_id = class_id;
    curve->iou = iou_thresh;
    curve->recall.assign(kPoints, 0.0);
    curve->precision.assign(kPoints, 0.0);
  }
  for (std::size_t k = 0; k < kPoints; ++k) {
    const double r = static_cast<double>(k) / static_cast<double>(kPoints - 1);
    const auto it = std::lower_bound(recall.begin(), recall.end(), r);
    const double p = it == recall.end() ? 0.0 : precision[static_cast<std::size_t>(it - recall.begin())];
    sum += p;
    if (curve) {
      curve->recall[k] = r;
      curve->precision[k] = p;
    }
  }
  return sum / static_cast<double>(kPoints);
}

EvalReport evaluate(const std::vector<ImageDetections>& images, int num_classes) {
  EvalReport report;
  report.num_images = images.size();
  for (const auto& img : images) report.num_ground_truth += img.ground_truth.size();
  const auto thresholds = coco_iou_thresholds();

  double sum_all = 0.0;
  double sum50 = 0.0;
  double sum75 = 0.0;
  std::size_t classes_with_gt = 0;
  for (int c = 0; c < num_classes; ++c) {
    PrCurve curve;
    double class_sum = 0.0;
    bool has_gt = true;
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
      const auto ap = average_precision(images, c, thresholds[t], t == 0 ? &curve : nullptr);
      if (!ap) {
        has_gt = false;
        break;
      }
      class_sum += *ap;
      if (t == 0) sum50 += *ap;
      if (t == 5) sum75 += *ap;
    }
    if (!has_gt) {
      report.per_class_ap.push_back(std::nullopt);
      continue;
    }
    ++classes_with_gt;
    report.per_class_ap.push_back(class_sum / static_cast<double>(thresholds.size()));
    report.pr_curves.push_back(std::move(curve));
    sum_all += class_sum;
  }
  if (classes_with_gt > 0) {
    const double k = static_cast<double>(classes_with_gt);
    report.ap = sum_all / (k * static_cast<double>(thresholds.size()));
    report.ap50 = sum50 / k;
    report.ap75 = sum75 / k;
  }
  return report;
}

}  // namespace sad
