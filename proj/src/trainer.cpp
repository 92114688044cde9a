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
#include "sad/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <thread>

#include "sad/errors.hpp"

namespace sad {

const char* loss_mode_name(LossMode mode) {
  switch (mode) {
    case LossMode::kBaseline: return "baseline";
    case LossMode::kAdlDistill: return "adl_distill";
    case LossMode::kFdlBaseline: return "fdl_baseline";
    case LossMode::kMimicBaseline: return "mimic_baseline";
    case LossMode::kSelfDistill: return "self_distill";
  }
  return "unknown";
}

LossMode parse_loss_mode(const std::string& name) {
  for (auto m : {LossMode::kBaseline, LossMode::kAdlDistill, LossMode::kFdlBaseline,
                 LossMode::kMimicBaseline, LossMode::kSelfDistill}) {
    if (name == loss_mode_name(m)) return m;
  }
  throw ConfigError("unknown loss mode: " + name);
}

void TrainerConfig::validate() const {
  if (!(learning_rate > 0.0) || !(momentum >= 0.0 && momentum < 1.0) || !(weight_decay >= 0.0)) {
    throw ConfigError("trainer: learning rate, momentum or weight decay out of range");
  }
  if (iterations == 0 || batch_size == 0 || workers == 0) {
    throw ConfigError("trainer: iterations, batch size and workers must be positive");
  }
  for (double d : lr_drop_points) {
    if (!(d > 0.0 && d < 1.0)) throw ConfigError("trainer: lr drop points must lie in (0, 1)");
  }
  if (!(lr_drop_factor > 0.0 && lr_drop_factor <= 1.0)) {
    throw ConfigError("trainer: lr drop factor must lie in (0, 1]");
  }
}

double TrainerConfig::learning_rate_at(std::size_t iteration) const {
  double lr = learning_rate;
  for (double d : lr_drop_points) {
    if (static_cast<double>(iteration) >= std::round(d * static_cast<double>(iterations))) {
      lr *= lr_drop_factor;
    }
  }
  return lr;
}

PreparedExample prepare_example(const TrainingExample& example, const AnchorSet& anchors,
                                const AnchorConfig& anchor_config, int num_classes) {
  if (!example.scene) {
    throw InputError("training example without a scene");
  }
  const std::size_t n = anchors.size();
  PreparedExample out;
  out.source = &example;
  out.labels.assign(n * num_classes, 0);
  if (example.use_soft) {
    if (!example.soft_targets || example.soft_targets->size() != n * num_classes) {
      throw UsageError("scene " + example.scene->scene_id +
                       ": soft targets missing or of the wrong size");
    }
  }
  if (!example.use_focal && !example.use_loc) {
    return out;
  }
  const auto map = assign_anchors(anchors, example.boxes, anchor_config.positive_iou,
                                  anchor_config.negative_iou);
  out.num_positive = map.num_positive;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = map.anchors[i];
    if (example.use_focal && a.status != AnchorStatus::kIgnore) {
      for (int c = 0; c < num_classes; ++c) {
        const bool pos = a.status == AnchorStatus::kPositive && a.class_id == c;
        out.labels[i * num_classes + c] = pos ? 1 : -1;
      }
    }
    if (a.status == AnchorStatus::kPositive) {
      out.positive_anchors.push_back(i);
      out.loc_targets.push_back(encode_box(anchors.boxes[i], example.boxes[a.gt_index].box));
    }
  }
  return out;
}

namespace {

void check_finite(double v, const PreparedExample& ex, const char* term) {
  if (!std::isfinite(v)) {
    throw NumericalError(std::string("non-finite ") + term + " loss on scene " +
                             ex.source->scene->scene_id,
                         ex.source->scene->scene_id, term);
  }
}

}  // namespace

ImageLossBreakdown evaluate_image(const DenseModel& student, const DenseModel* teacher,
                                  const PreparedExample& ex, LossMode mode,
                                  const LossHyperparams& hp, std::span<double> grad) {
  const TrainingExample& src = *ex.source;
  const Scene& scene = *src.scene;
  const int classes = student.shape().num_classes;
  ForwardCache cache;
  const ModelOutput out = forward(student, scene, &cache);
  const std::size_t n = out.num_anchors;
  for (double z : out.logits) check_finite(z, ex, "logit");
  if (ex.labels.size() != n * classes) {
    throw InputError("scene " + scene.scene_id + ": prepared targets do not match model output");
  }

  std::vector<SampleTerm> terms(n * classes);
  for (std::size_t t = 0; t < terms.size(); ++t) {
    terms[t].logit = out.logits[t];
    terms[t].teacher_prob = src.use_soft ? static_cast<double>((*src.soft_targets)[t]) : 0.5;
    if (ex.labels[t] != 0) {
      terms[t].hard_label = ex.labels[t] > 0 ? Label::kPositive : Label::kNegative;
    }
  }

  SoftTargetLoss soft = SoftTargetLoss::kNone;
  if (src.use_soft) {
    if (mode == LossMode::kAdlDistill || mode == LossMode::kSelfDistill) {
      soft = SoftTargetLoss::kAdl;
    } else if (mode == LossMode::kFdlBaseline) {
      soft = SoftTargetLoss::kFdl;
    }
  }

  const bool want_grad = !grad.empty();
  std::vector<double> grad_logits(want_grad ? terms.size() : 0);
  ImageLossBreakdown b = image_loss(terms, classes, ex.num_positive, soft, hp, grad_logits);
  check_finite(b.focal_sum, ex, "focal");
  check_finite(b.adl_sum, ex, "distill");

  if (src.use_soft && mode == LossMode::kMimicBaseline) {
    if (!teacher) {
      throw UsageError("mimic baseline needs a teacher model");
    }
    std::vector<double> q(terms.size());
    for (std::size_t t = 0; t < q.size(); ++t) q[t] = terms[t].teacher_prob;
    const ModelOutput t_out = forward(*teacher, scene);
    const MimicResult mimic = l2_mimic(t_out.logits, out.logits);
    b.adl_sum = mimic.value;
    b.normalizer_adl = adl_normalizer(anchor_foreground_probs(q, classes), hp.theta, hp.eps);
    check_finite(b.adl_sum, ex, "mimic");
    if (want_grad) {
      for (std::size_t t = 0; t < terms.size(); ++t) {
        grad_logits[t] += mimic.grad[t] / b.normalizer_adl;
      }
    }
  }

  std::vector<double> grad_deltas(want_grad ? n * 4 : 0, 0.0);
  if (src.use_loc) {
    const double norm = static_cast<double>(std::max<std::size_t>(ex.num_positive, 1));
    for (std::size_t j = 0; j < ex.positive_anchors.size(); ++j) {
      const std::size_t a = ex.positive_anchors[j];
      const BoxDelta& target = ex.loc_targets[j];
      const double tgt[4] = {target.dx, target.dy, target.dw, target.dh};
      for (int k = 0; k < 4; ++k) {
        const LossResult r = smooth_l1(out.deltas[a * 4 + k], tgt[k]);
        b.loc_sum += r.value;
        if (want_grad) grad_deltas[a * 4 + k] = r.grad_logit / norm;
      }
    }
    check_finite(b.loc_sum, ex, "loc");
  }
  b.finalize();
  check_finite(b.total, ex, "total");

  if (want_grad) {
    backward(student, cache, grad_logits, grad_deltas, grad);
  }
  return b;
}

namespace {

struct ImageStep {
  ImageLossBreakdown loss;
  std::vector<double> grad;
};

void validate_inputs(const DenseModel& initial, const DenseModel* teacher,
                     std::span<const TrainingExample> examples, LossMode mode) {
  if (examples.empty()) {
    throw UsageError("train: no training examples");
  }
  const bool any_soft = std::any_of(examples.begin(), examples.end(),
                                    [](const TrainingExample& e) { return e.use_soft; });
  if (mode == LossMode::kBaseline && any_soft) {
    throw UsageError("train: baseline mode does not take soft targets");
  }
  if (mode != LossMode::kBaseline && !any_soft) {
    throw UsageError(std::string("train: ") + loss_mode_name(mode) + " requires soft targets");
  }
  if (mode == LossMode::kMimicBaseline || mode == LossMode::kSelfDistill) {
    if (!teacher) {
      throw UsageError(std::string("train: ") + loss_mode_name(mode) + " requires a teacher");
    }
  }
  if (teacher) {
    const auto& s = initial.shape();
    const auto& t = teacher->shape();
    if (s.num_classes != t.num_classes || s.anchors_per_cell != t.anchors_per_cell ||
        s.features != t.features) {
      throw UsageError("train: teacher and student disagree on classes, anchors or features");
    }
    if (mode == LossMode::kSelfDistill && !(s == t)) {
      throw UsageError("train: self distillation needs identically shaped teacher and student");
    }
  }
}

}  // namespace

TrainResult train(const DenseModel& initial, const DenseModel* teacher,
                  std::span<const TrainingExample> examples, const TrainerConfig& config,
                  const LossHyperparams& hp, const AnchorConfig& anchor_config) {
  config.validate();
  hp.validate();
  anchor_config.validate();
  const LossMode mode = config.loss_mode;
  validate_inputs(initial, teacher, examples, mode);
  const ModelShape& shape = initial.shape();
  if (static_cast<std::size_t>(shape.anchors_per_cell) != anchor_config.per_cell()) {
    throw ConfigError("train: model anchors per cell differ from the anchor config");
  }

  std::map<std::pair<int, int>, AnchorSet> anchor_sets;
  std::vector<PreparedExample> prepared;
  prepared.reserve(examples.size());
  for (const auto& e : examples) {
    if (!e.scene) throw InputError("training example without a scene");
    const auto key = std::make_pair(e.scene->height, e.scene->width);
    auto it = anchor_sets.find(key);
    if (it == anchor_sets.end()) {
      it = anchor_sets.emplace(key, make_anchors(key.first, key.second, anchor_config)).first;
    }
    prepared.push_back(prepare_example(e, it->second, anchor_config, shape.num_classes));
  }

  TrainResult result{initial, {}};
  DenseModel& model = result.model;
  const std::size_t p_count = shape.parameter_count();
  std::vector<double> velocity(p_count, 0.0);
  std::vector<double> grad(p_count);

  std::seed_seq data_seq{static_cast<std::uint32_t>(config.seed),
                         static_cast<std::uint32_t>(config.seed >> 32), 0xDA7Au};
  std::mt19937_64 data_rng(data_seq);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();

  const std::size_t batch = config.batch_size;
  std::vector<ImageStep> steps(batch);
  std::vector<std::size_t> batch_ids(batch);
  result.log.reserve(config.iterations);

  for (std::size_t it = 0; it < config.iterations; ++it) {
    for (std::size_t b = 0; b < batch; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), data_rng);
        cursor = 0;
      }
      batch_ids[b] = order[cursor++];
    }

    auto run_image = [&](std::size_t b) {
      ImageStep& step = steps[b];
      step.grad.assign(p_count, 0.0);
      step.loss = evaluate_image(model, teacher, prepared[batch_ids[b]], mode, hp, step.grad);
    };
    const std::size_t workers = std::min(config.workers, batch);
    if (workers <= 1) {
      for (std::size_t b = 0; b < batch; ++b) run_image(b);
    } else {
      std::vector<std::thread> pool;
      std::vector<std::exception_ptr> errors(workers);
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          try {
            for (std::size_t b = w; b < batch; b += workers) run_image(b);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
      for (auto& t : pool) t.join();
      for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
      }
    }

    // Reduce in batch order so the result does not depend on the worker count.
    std::fill(grad.begin(), grad.end(), 0.0);
    LossLogEntry entry;
    entry.iteration = it;
    entry.learning_rate = config.learning_rate_at(it);
    const double inv = 1.0 / static_cast<double>(batch);
    for (std::size_t b = 0; b < batch; ++b) {
      const auto& l = steps[b].loss;
      const double pos = static_cast<double>(std::max<std::size_t>(l.normalizer_focal, 1));
      entry.total += l.total * inv;
      entry.focal += l.focal_sum / pos * inv;
      entry.soft += l.adl_sum / l.normalizer_adl * inv;
      entry.loc += l.loc_sum / pos * inv;
      for (std::size_t j = 0; j < p_count; ++j) grad[j] += steps[b].grad[j];
    }
    result.log.push_back(entry);

    auto params = model.parameters();
    for (std::size_t j = 0; j < p_count; ++j) {
      double g = grad[j] * inv;
      if (!model.is_bias(j)) g += config.weight_decay * params[j];
      velocity[j] = config.momentum * velocity[j] + entry.learning_rate * g;
      params[j] -= velocity[j];
    }
  }
  return result;
}

void write_loss_log_csv(const std::string& path, const std::vector<LossLogEntry>& log) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open " + path + " for writing");
  out << "iteration,learning_rate,total,focal,soft,loc\n";
  out << std::setprecision(17);
  for (const auto& e : log) {
    out << e.iteration << ',' << e.learning_rate << ',' << e.total << ',' << e.focal << ','
        << e.soft << ',' << e.loc << '\n';
  }
  if (!out) throw InputError("failed writing " + path);
}

}  // namespace sad
