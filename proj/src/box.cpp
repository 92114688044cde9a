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
#include "sad/box.hpp"

#include <algorithm>
#include <cmath>

#include "sad/errors.hpp"

namespace sad {

double iou(const Box& a, const Box& b) {
  if (!a.valid() || !b.valid()) {
    throw InputError("iou: degenerate box");
  }
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) {
    return 0.0;
  }
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

BoxDelta encode_box(const Box& anchor, const Box& gt) {
  if (!anchor.valid() || !gt.valid()) {
    throw InputError("encode_box: box sizes must be positive");
  }
  return {(gt.center_x() - anchor.center_x()) / anchor.width(),
          (gt.center_y() - anchor.center_y()) / anchor.height(),
          std::log(gt.width() / anchor.width()), std::log(gt.height() / anchor.height())};
}

Box decode_box(const Box& anchor, const BoxDelta& delta) {
  if (!anchor.valid()) {
    throw InputError("decode_box: anchor sizes must be positive");
  }
  const double cx = anchor.center_x() + delta.dx * anchor.width();
  const double cy = anchor.center_y() + delta.dy * anchor.height();
  const double w = anchor.width() * std::exp(std::min(delta.dw, kMaxLogRatio));
  const double h = anchor.height() * std::exp(std::min(delta.dh, kMaxLogRatio));
  return Box::from_center(cx, cy, w, h);
}

LossResult smooth_l1(double pred, double target) {
  const double d = pred - target;
  const double ad = std::abs(d);
  if (ad < 1.0) {
    return {0.5 * d * d, d};
  }
  return {ad - 0.5, d > 0.0 ? 1.0 : -1.0};
}

}  // namespace sad
