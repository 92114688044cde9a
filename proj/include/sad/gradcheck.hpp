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
#include <functional>
#include <string>
#include <vector>

namespace sad {

// Central difference (f(x+h) - f(x-h)) / 2h. The step actually taken is
// (x+h) - (x-h) as represented in floating point. Throws OracleError when f is
// not finite at either point and InputError when h is outside [1e-7, 1e-4].
double fd_gradient(const std::function<double(double)>& f, double x, double h = 1e-5);

// |analytic - fd| / max(|fd|, 1e-8)
double relative_gradient_error(double analytic, double fd);

struct GradcheckRow {
  std::string kernel;
  std::size_t trials = 0;
  std::size_t failures = 0;
  double max_rel_error = 0.0;

  bool passed() const { return failures == 0; }
};

struct GradcheckOptions {
  std::size_t trials = 1000;
  std::uint64_t seed = 1;
  double tolerance = 1e-6;
  // Added to every analytic gradient; a non-zero value is a negative control.
  double perturb = 0.0;
};

// Checks every loss kernel's analytic gradient against fd_gradient over
// randomized (q, z, y, gamma, beta) draws.
std::vector<GradcheckRow> run_gradcheck(const GradcheckOptions& options);

}  // namespace sad
