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

// Classification and distillation loss kernels over binary (one-vs-all)
// anchor-class logits. Every kernel takes the student logit z rather than
// p = sigmoid(z) and evaluates logs through softplus, so saturated logits do
// not lose precision.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace sad {

struct LossHyperparams {
  double gamma = 2.0;   // focusing exponent
  double beta = 1.5;    // weight on teacher entropy (hard-to-learn samples)
  double theta = 1.8;   // exponent in the soft-target normalizer
  double alpha = 1.0;   // class balance for y = +1; 1 disables it
  double eps = 1e-6;    // clamp for teacher probabilities
  // Treat the adaptive weight as a constant when differentiating.
  bool detach_weight = false;

  // Throws InputError when a field is out of range.
  void validate() const;
};

enum class Label : std::int8_t { kNegative = -1, kPositive = 1 };

struct SampleTerm {
  double logit = 0.0;
  double teacher_prob = 0.5;
  std::optional<Label> hard_label;
};

struct LossResult {
  double value = 0.0;
  double grad_logit = 0.0;
};

struct ImageLossBreakdown {
  double focal_sum = 0.0;
  double adl_sum = 0.0;
  double loc_sum = 0.0;
  std::size_t normalizer_focal = 0;
  double normalizer_adl = 1.0;
  double total = 0.0;

  // Recomputes total from the sums and normalizers.
  void finalize();
};

double sigmoid(double z);
double softplus(double z);

// Clamps q into [eps, 1 - eps]. Throws InputError if q is not in [0, 1].
double clamp_probability(double q, double eps);

LossResult focal_loss(const SampleTerm& term, const LossHyperparams& hp);
LossResult kl_binary(const SampleTerm& term, const LossHyperparams& hp);

// Binary entropy of the (clamped) teacher probability, in nats.
double teacher_entropy(double q, double eps = 1e-6);

// (1 - e^{-kl})^gamma
double distill_weight(double kl, double gamma);
// (1 - e^{-(kl + beta * t_q)})^gamma
double adaptive_distill_weight(double kl, double t_q, const LossHyperparams& hp);

LossResult adl(const SampleTerm& term, const LossHyperparams& hp);
LossResult fdl(const SampleTerm& term, const LossHyperparams& hp);
// Focal term shared between the hard-label cross entropy and KL:
// (1 - p_t)^gamma * (-log p_t + KL).
LossResult focal_shared_joint(const SampleTerm& term, const LossHyperparams& hp);

// Sum of q_i^theta over all anchors of one image. q_i is floored at eps so
// the result is always positive.
double adl_normalizer(std::span<const double> q_per_anchor, double theta,
                      double eps = 1e-6);

struct MimicResult {
  double value = 0.0;
  std::vector<double> grad;  // d value / d student logit
};

// 0.5 * sum (z_s - z_t)^2
MimicResult l2_mimic(std::span<const double> teacher_logits,
                     std::span<const double> student_logits);

enum class SoftTargetLoss { kNone, kAdl, kFdl };

// Per-image loss over anchor-major terms (n anchors x num_classes).
//
// Terms carrying a hard label contribute focal loss, normalized by
// max(num_positive, 1). With kAdl every term contributes ADL normalized by
// adl_normalizer over the per-anchor maximum teacher probability. With kFdl
// labeled terms contribute FDL under the focal normalizer.
//
// When grad_out is non-empty it receives d total / d logit per term.
ImageLossBreakdown image_loss(std::span<const SampleTerm> terms,
                              std::size_t num_classes, std::size_t num_positive,
                              SoftTargetLoss soft, const LossHyperparams& hp,
                              std::span<double> grad_out = {});

inline ImageLossBreakdown image_distill_loss(std::span<const SampleTerm> terms,
                                             std::size_t num_classes,
                                             std::size_t num_positive,
                                             const LossHyperparams& hp,
                                             std::span<double> grad_out = {}) {
  return image_loss(terms, num_classes, num_positive, SoftTargetLoss::kAdl, hp,
                    grad_out);
}

// Per-anchor soft-target normalizer input: max over classes of the teacher
// probability, anchor-major layout.
std::vector<double> anchor_foreground_probs(std::span<const double> q,
                                            std::size_t num_classes);

}  // namespace sad
