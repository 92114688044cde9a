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
#include "sad/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sad/errors.hpp"

namespace sad {

namespace {

void require_finite_logit(double z) {
  if (!std::isfinite(z)) {
    throw InputError("non-finite logit");
  }
}

Label require_label(const SampleTerm& term, const char* op) {
  if (!term.hard_label) {
    throw UsageError(std::string(op) + " requires a hard label");
  }
  return *term.hard_label;
}

double sign_of(Label y) { return y == Label::kPositive ? 1.0 : -1.0; }

struct KlParts {
  double value;
  double p;
  double q;
};

// KL(q || p) = softplus(z) - q z - T(q), which follows from
// log p = -softplus(-z) and log(1 - p) = -softplus(z).
KlParts kl_parts(double z, double q_raw, double eps) {
  require_finite_logit(z);
  const double q = clamp_probability(q_raw, eps);
  const double entropy = -(q * std::log(q) + (1.0 - q) * std::log1p(-q));
  const double value = softplus(z) - q * z - entropy;
  return {std::max(value, 0.0), sigmoid(z), q};
}

}  // namespace

void LossHyperparams::validate() const {
  if (!std::isfinite(gamma) || gamma < 0.0) {
    throw ConfigError("gamma must be finite and non-negative");
  }
  if (!std::isfinite(beta) || beta < 0.0) {
    throw ConfigError("beta must be finite and non-negative");
  }
  if (!std::isfinite(theta) || theta <= 0.0) {
    throw ConfigError("theta must be strictly positive");
  }
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw ConfigError("alpha must lie in (0, 1]");
  }
  if (!(eps > 0.0 && eps <= 1e-3)) {
    throw ConfigError("eps must lie in (0, 1e-3]");
  }
}

void ImageLossBreakdown::finalize() {
  const double pos = static_cast<double>(std::max<std::size_t>(normalizer_focal, 1));
  total = focal_sum / pos + adl_sum / normalizer_adl + loc_sum / pos;
}

double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

double clamp_probability(double q, double eps) {
  if (!(q >= 0.0 && q <= 1.0)) {
    throw InputError("probability outside [0, 1]");
  }
  return std::clamp(q, eps, 1.0 - eps);
}

LossResult focal_loss(const SampleTerm& term, const LossHyperparams& hp) {
  const double s = sign_of(require_label(term, "focal_loss"));
  require_finite_logit(term.logit);
  const double sz = s * term.logit;
  const double p_t = sigmoid(sz);
  const double u = sigmoid(-sz);  // 1 - p_t
  const double neg_log_pt = softplus(-sz);
  // alpha = 1 disables balancing, so negatives keep full weight.
  const double a = hp.alpha == 1.0 ? 1.0 : (s > 0.0 ? hp.alpha : 1.0 - hp.alpha);
  const double focal = std::pow(u, hp.gamma);
  LossResult r;
  r.value = a * focal * neg_log_pt;
  r.grad_logit = -a * s * focal * (hp.gamma * p_t * neg_log_pt + u);
  return r;
}

LossResult kl_binary(const SampleTerm& term, const LossHyperparams& hp) {
  const KlParts kl = kl_parts(term.logit, term.teacher_prob, hp.eps);
  return {kl.value, kl.p - kl.q};
}

double teacher_entropy(double q, double eps) {
  const double c = clamp_probability(q, eps);
  return -(c * std::log(c) + (1.0 - c) * std::log1p(-c));
}

double distill_weight(double kl, double gamma) {
  if (!(kl >= 0.0)) {
    throw InputError("distill_weight: kl must be non-negative");
  }
  return std::pow(-std::expm1(-kl), gamma);
}

double adaptive_distill_weight(double kl, double t_q, const LossHyperparams& hp) {
  if (!(kl >= 0.0) || !(t_q >= 0.0)) {
    throw InputError("adaptive_distill_weight: inputs must be non-negative");
  }
  return std::pow(-std::expm1(-(kl + hp.beta * t_q)), hp.gamma);
}

LossResult adl(const SampleTerm& term, const LossHyperparams& hp) {
  const KlParts kl = kl_parts(term.logit, term.teacher_prob, hp.eps);
  const double s = kl.value + hp.beta * teacher_entropy(kl.q, hp.eps);
  const double u = -std::expm1(-s);
  const double weight = std::pow(u, hp.gamma);
  // d value / d kl = weight + kl * d weight / d kl
  double dvalue_dkl = weight;
  if (!hp.detach_weight && hp.gamma != 0.0 && kl.value > 0.0) {
    dvalue_dkl += kl.value * hp.gamma * std::pow(u, hp.gamma - 1.0) * std::exp(-s);
  }
  return {weight * kl.value, dvalue_dkl * (kl.p - kl.q)};
}

LossResult fdl(const SampleTerm& term, const LossHyperparams& hp) {
  const double s = sign_of(require_label(term, "fdl"));
  const KlParts kl = kl_parts(term.logit, term.teacher_prob, hp.eps);
  const double sz = s * term.logit;
  const double p_t = sigmoid(sz);
  const double focal = std::pow(sigmoid(-sz), hp.gamma);
  LossResult r;
  r.value = focal * kl.value;
  r.grad_logit = -s * hp.gamma * p_t * focal * kl.value + focal * (kl.p - kl.q);
  return r;
}

LossResult focal_shared_joint(const SampleTerm& term, const LossHyperparams& hp) {
  const double s = sign_of(require_label(term, "focal_shared_joint"));
  const KlParts kl = kl_parts(term.logit, term.teacher_prob, hp.eps);
  const double sz = s * term.logit;
  const double p_t = sigmoid(sz);
  const double u = sigmoid(-sz);
  const double focal = std::pow(u, hp.gamma);
  const double inner = softplus(-sz) + kl.value;
  LossResult r;
  r.value = focal * inner;
  r.grad_logit = -s * hp.gamma * p_t * focal * inner + focal * (-s * u + kl.p - kl.q);
  return r;
}

double adl_normalizer(std::span<const double> q_per_anchor, double theta, double eps) {
  if (q_per_anchor.empty()) {
    throw InputError("adl_normalizer: empty anchor list");
  }
  if (!(theta > 0.0)) {
    throw InputError("adl_normalizer: theta must be positive");
  }
  double n = 0.0;
  for (double q : q_per_anchor) {
    if (!(q >= 0.0 && q <= 1.0)) {
      throw InputError("adl_normalizer: probability outside [0, 1]");
    }
    n += std::pow(std::max(q, eps), theta);
  }
  return n;
}

MimicResult l2_mimic(std::span<const double> teacher_logits,
                     std::span<const double> student_logits) {
  if (teacher_logits.size() != student_logits.size()) {
    throw InputError("l2_mimic: length mismatch");
  }
  MimicResult r;
  r.grad.resize(student_logits.size());
  for (std::size_t i = 0; i < student_logits.size(); ++i) {
    const double d = student_logits[i] - teacher_logits[i];
    r.value += 0.5 * d * d;
    r.grad[i] = d;
  }
  return r;
}

std::vector<double> anchor_foreground_probs(std::span<const double> q,
                                            std::size_t num_classes) {
  if (num_classes == 0 || q.size() % num_classes != 0) {
    throw InputError("anchor_foreground_probs: size is not a multiple of class count");
  }
  std::vector<double> out(q.size() / num_classes);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto row = q.subspan(i * num_classes, num_classes);
    out[i] = *std::max_element(row.begin(), row.end());
  }
  return out;
}

ImageLossBreakdown image_loss(std::span<const SampleTerm> terms,
                              std::size_t num_classes, std::size_t num_positive,
                              SoftTargetLoss soft, const LossHyperparams& hp,
                              std::span<double> grad_out) {
  if (num_classes == 0 || terms.empty() || terms.size() % num_classes != 0) {
    throw InputError("image_loss: terms must be a non-empty anchor x class grid");
  }
  const bool want_grad = !grad_out.empty();
  if (want_grad && grad_out.size() != terms.size()) {
    throw InputError("image_loss: gradient buffer size mismatch");
  }

  ImageLossBreakdown out;
  out.normalizer_focal = num_positive;
  const double focal_norm = static_cast<double>(std::max<std::size_t>(num_positive, 1));

  if (soft == SoftTargetLoss::kAdl) {
    std::vector<double> fg(terms.size() / num_classes);
    for (std::size_t i = 0; i < fg.size(); ++i) {
      double m = 0.0;
      for (std::size_t c = 0; c < num_classes; ++c) {
        m = std::max(m, clamp_probability(terms[i * num_classes + c].teacher_prob, hp.eps));
      }
      fg[i] = m;
    }
    out.normalizer_adl = adl_normalizer(fg, hp.theta, hp.eps);
  } else {
    out.normalizer_adl = focal_norm;
  }

  for (std::size_t t = 0; t < terms.size(); ++t) {
    const SampleTerm& term = terms[t];
    double g = 0.0;
    if (term.hard_label) {
      const LossResult fl = focal_loss(term, hp);
      out.focal_sum += fl.value;
      g += fl.grad_logit / focal_norm;
    }
    if (soft == SoftTargetLoss::kAdl) {
      const LossResult d = adl(term, hp);
      out.adl_sum += d.value;
      g += d.grad_logit / out.normalizer_adl;
    } else if (soft == SoftTargetLoss::kFdl && term.hard_label) {
      const LossResult d = fdl(term, hp);
      out.adl_sum += d.value;
      g += d.grad_logit / out.normalizer_adl;
    }
    if (want_grad) {
      grad_out[t] = g;
    }
  }
  out.finalize();
  return out;
}

}  // namespace sad
