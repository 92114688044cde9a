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
#include "sad/gradcheck.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "sad/errors.hpp"
#include "sad/loss.hpp"

namespace sad {

double fd_gradient(const std::function<double(double)>& f, double x, double h) {
  if (!(h >= 1e-7 && h <= 1e-4)) {
    throw InputError("fd_gradient: step must lie in [1e-7, 1e-4]");
  }
  const double xp = x + h;
  const double xm = x - h;
  const double fp = f(xp);
  const double fm = f(xm);
  if (!std::isfinite(fp) || !std::isfinite(fm)) {
    throw OracleError("fd_gradient: non-finite function value");
  }
  return (fp - fm) / (xp - xm);
}

double relative_gradient_error(double analytic, double fd) {
  return std::abs(analytic - fd) / std::max(std::abs(fd), 1e-8);
}

namespace {

using Kernel = LossResult (*)(const SampleTerm&, const LossHyperparams&);

struct NamedKernel {
  const char* name;
  Kernel fn;
};

void record(GradcheckRow& row, double analytic, double fd, double tol) {
  const double err = relative_gradient_error(analytic, fd);
  ++row.trials;
  row.max_rel_error = std::max(row.max_rel_error, err);
  if (!(err <= tol)) {
    ++row.failures;
  }
}

}  // namespace

std::vector<GradcheckRow> run_gradcheck(const GradcheckOptions& options) {
  if (options.trials == 0) {
    throw UsageError("gradcheck needs at least one trial");
  }
  const std::array<NamedKernel, 5> kernels{{
      {"focal_loss", &focal_loss},
      {"kl_binary", &kl_binary},
      {"focal_shared_joint", &focal_shared_joint},
      {"fdl", &fdl},
      {"adl", &adl},
  }};
  constexpr std::array<double, 4> kGammas{0.0, 1.0, 2.0, 5.0};
  constexpr std::array<double, 4> kBetas{0.0, 0.5, 1.0, 1.5};

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> logit_dist(-8.0, 8.0);
  std::uniform_real_distribution<double> prob_dist(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, 3);
  std::bernoulli_distribution coin(0.5);

  std::vector<GradcheckRow> rows;
  for (const auto& k : kernels) {
    rows.push_back({k.name});
  }
  rows.push_back({"l2_mimic"});

  for (std::size_t trial = 0; trial < options.trials; ++trial) {
    LossHyperparams hp;
    hp.gamma = kGammas[pick(rng)];
    hp.beta = kBetas[pick(rng)];
    SampleTerm term;
    term.logit = logit_dist(rng);
    term.teacher_prob = prob_dist(rng);
    term.hard_label = coin(rng) ? Label::kPositive : Label::kNegative;

    for (std::size_t i = 0; i < kernels.size(); ++i) {
      const Kernel fn = kernels[i].fn;
      const double analytic = fn(term, hp).grad_logit + options.perturb;
      const double fd = fd_gradient(
          [&](double z) {
            SampleTerm t = term;
            t.logit = z;
            return fn(t, hp).value;
          },
          term.logit);
      record(rows[i], analytic, fd, options.tolerance);
    }

    // L2 mimic over a short vector, one coordinate checked per trial.
    std::array<double, 4> teacher{};
    std::array<double, 4> student{};
    for (std::size_t j = 0; j < teacher.size(); ++j) {
      teacher[j] = logit_dist(rng);
      student[j] = logit_dist(rng);
    }
    const std::size_t j = trial % student.size();
    const double analytic = l2_mimic(teacher, student).grad[j] + options.perturb;
    const double fd = fd_gradient(
        [&](double z) {
          auto s = student;
          s[j] = z;
          return l2_mimic(teacher, s).value;
        },
        student[j]);
    record(rows.back(), analytic, fd, options.tolerance);
  }
  return rows;
}

}  // namespace sad
