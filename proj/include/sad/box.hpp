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

#include "sad/loss.hpp"

namespace sad {

// Axis-aligned box in grid cell units.
struct Box {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  double center_x() const { return 0.5 * (x1 + x2); }
  double center_y() const { return 0.5 * (y1 + y2); }
  bool valid() const { return x1 < x2 && y1 < y2; }

  static Box from_center(double cx, double cy, double w, double h) {
    return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
  }

  friend bool operator==(const Box&, const Box&) = default;
};

// Throws InputError for degenerate boxes.
double iou(const Box& a, const Box& b);

// Center offsets scaled by anchor size, log size ratios.
struct BoxDelta {
  double dx = 0.0;
  double dy = 0.0;
  double dw = 0.0;
  double dh = 0.0;
};

// Largest log size ratio accepted by decode_box, as in common detector code.
inline constexpr double kMaxLogRatio = 4.135166556742356;  // log(1000 / 16)

BoxDelta encode_box(const Box& anchor, const Box& gt);
Box decode_box(const Box& anchor, const BoxDelta& delta);

// Smooth L1 on one coordinate with the L1/L2 transition at |d| = 1.
LossResult smooth_l1(double pred, double target);

}  // namespace sad
