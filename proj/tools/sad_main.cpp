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
// Command-line driver for the semi-supervised adaptive distillation pipeline.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sad/config.hpp"
#include "sad/errors.hpp"
#include "sad/gradcheck.hpp"
#include "sad/pipeline.hpp"
#include "sad/report.hpp"
#include "sad/semisup.hpp"

namespace {

using namespace sad;
using nlohmann::json;

constexpr int kExitFailure = 1;
constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

struct Common {
  std::string config_path;
  std::size_t workers = 1;

  RunConfig config() const { return config_path.empty() ? RunConfig{} : load_config(config_path); }
};

void add_common(CLI::App* cmd, Common& c, bool workers = true) {
  cmd->add_option("--config", c.config_path, "Run configuration (JSON); defaults if omitted")
      ->check(CLI::ExistingFile);
  if (workers) {
    cmd->add_option("--workers", c.workers, "Worker threads")->check(CLI::Range(1, 256));
  }
}

void require_workers(std::size_t workers) {
  if (workers == 0) throw UsageError("--workers must be at least 1");
}

// --- gen-data ---------------------------------------------------------------

struct GenData {
  Common common;
  std::string out;
  std::optional<std::size_t> count;
  std::optional<std::uint64_t> seed;
  std::string split = "labeled";
  std::optional<double> background;
};

int run_gen_data(const GenData& o) {
  const RunConfig cfg = o.common.config();
  const Split split = parse_split(o.split);
  const bool labeled = split == Split::kLabeled;
  GeneratorConfig g = cfg.generator;
  if (!labeled) g.background_fraction = cfg.data.unlabeled_background_fraction;
  if (o.background) g.background_fraction = *o.background;
  const std::size_t count =
      o.count.value_or(labeled ? cfg.data.labeled_count : cfg.data.unlabeled_count);
  const std::uint64_t seed = o.seed.value_or(labeled ? cfg.data.labeled_seed : cfg.data.unlabeled_seed);
  const auto scenes = generate_scenes(g, seed, count, split);
  write_dataset(o.out, scenes, hash_hex(config_hash(cfg)));
  std::printf("wrote %zu %s scenes (seed %llu, mean boxes %.4f) to %s\n", scenes.size(),
              split_name(split), static_cast<unsigned long long>(seed),
              mean_box_count(scenes), o.out.c_str());
  return 0;
}

// --- train ------------------------------------------------------------------

struct Train {
  Common common;
  std::vector<std::string> data;
  std::string mode;
  std::string out;
  std::string role = "student";
  std::string targets;
  std::string teacher;
  std::string log;
};

const NetworkConfig& network_for(const RunConfig& cfg, const std::string& role) {
  if (role == "student") return cfg.student;
  if (role == "teacher") return cfg.teacher;
  throw UsageError("--role must be student or teacher");
}

std::string default_log(const std::string& out, const std::string& log) {
  return log.empty() ? out + ".loss.csv" : log;
}

void print_loss_summary(const std::vector<LossLogEntry>& log) {
  if (log.empty()) return;
  std::printf("loss: first %.6f last %.6f (%zu iterations)\n", log.front().total,
              log.back().total, log.size());
}

int run_train(const Train& o) {
  require_workers(o.common.workers);
  const RunConfig cfg = o.common.config();
  const NetworkConfig& net = network_for(cfg, o.role);
  TrainerConfig tc = cfg.trainer_for(net);
  tc.workers = o.common.workers;
  if (!o.mode.empty()) tc.loss_mode = parse_loss_mode(o.mode);

  const auto scenes = load_scenes(o.data);
  auto examples = supervised_examples(scenes);
  std::vector<TargetRecord> records;
  if (tc.loss_mode != LossMode::kBaseline) {
    if (o.targets.empty()) {
      throw UsageError(std::string("--mode ") + loss_mode_name(tc.loss_mode) + " needs --targets");
    }
    records = read_target_records(o.targets);
    const auto index = index_records(records);
    for (auto& ex : examples) {
      const auto it = index.find(ex.scene->scene_id);
      if (it == index.end()) throw InputError("no teacher record for scene " + ex.scene->scene_id);
      ex.use_soft = true;
      ex.soft_targets = &it->second->soft_targets;
    }
  }
  std::optional<DenseModel> teacher;
  if (!o.teacher.empty()) teacher = load_checkpoint(o.teacher);

  const std::uint64_t hash = config_hash(cfg);
  const DenseModel init = init_model(cfg.shape(net), net.init_seed, net.prior);
  const TrainResult r = train(init, teacher ? &*teacher : nullptr, examples, tc, cfg.loss, cfg.anchors);
  save_checkpoint(o.out, r.model, hash);
  write_loss_log_csv(default_log(o.out, o.log), r.log);
  print_loss_summary(r.log);
  std::printf("wrote %s (%s, %s)\n", o.out.c_str(), o.role.c_str(), loss_mode_name(tc.loss_mode));
  return 0;
}

// --- annotate ---------------------------------------------------------------

struct Annotate {
  Common common;
  std::string teacher;
  std::vector<std::string> data;
  std::string labeled_stats;
  std::optional<double> threshold;
  std::string out;
};

double labeled_average(const std::string& stats) {
  // Either a number or a labeled dataset file.
  try {
    std::size_t used = 0;
    const double v = std::stod(stats, &used);
    if (used == stats.size()) return v;
  } catch (const std::exception&) {
  }
  return mean_box_count(read_dataset(stats));
}

int run_annotate(const Annotate& o) {
  require_workers(o.common.workers);
  const RunConfig cfg = o.common.config();
  const DenseModel teacher = load_checkpoint(o.teacher);
  const auto scenes = load_scenes(o.data);
  const AnchorSet anchors = make_anchors(cfg.generator.height, cfg.generator.width, cfg.anchors);

  std::vector<Scene> pool;
  for (const auto& s : scenes) {
    if (s.split == Split::kUnlabeled) pool.push_back(s);
  }
  if (pool.empty()) pool = scenes;

  CalibrationResult cal;
  if (o.threshold) {
    if (!(*o.threshold > 0.0 && *o.threshold < 1.0)) throw UsageError("--threshold must lie in (0, 1)");
    cal.threshold = *o.threshold;
  } else {
    if (o.labeled_stats.empty()) throw UsageError("annotate needs --labeled-stats or --threshold");
    cal = calibrate_threshold(teacher, pool, labeled_average(o.labeled_stats), anchors,
                              cfg.inference, cfg.calibration, o.common.workers);
  }
  const auto records =
      generate_targets(teacher, scenes, cal.threshold, anchors, cfg.inference, o.common.workers);
  if (o.threshold) {
    // Report the reused threshold against this pool.
    std::set<std::string> in_pool;
    for (const auto& s : pool) in_pool.insert(s.scene_id);
    std::size_t total = 0;
    for (const auto& r : records) {
      if (in_pool.count(r.scene_id)) total += r.hard_targets.size();
    }
    cal.avg_instances_unlabeled = static_cast<double>(total) / static_cast<double>(pool.size());
    if (!o.labeled_stats.empty()) {
      cal.avg_instances_labeled = labeled_average(o.labeled_stats);
      cal.within_tolerance = std::abs(cal.avg_instances_unlabeled - cal.avg_instances_labeled) <=
                             cfg.calibration.tolerance * cal.avg_instances_labeled;
    }
  }
  TargetFileHeader header{hash_hex(config_hash(cfg)), records.size(),
                          static_cast<std::size_t>(cfg.generator.num_classes), cal};
  write_target_records(o.out, records, header);
  std::printf("threshold %.17g avg_labeled %.17g avg_unlabeled %.17g within_tolerance %s\n",
              cal.threshold, cal.avg_instances_labeled, cal.avg_instances_unlabeled,
              cal.within_tolerance ? "yes" : "no");
  if (cal.boundary) {
    std::fprintf(stderr, "warning: calibration hit the threshold boundary; target unreachable\n");
  }
  std::printf("wrote %zu records to %s\n", records.size(), o.out.c_str());
  return 0;
}

// --- filter -----------------------------------------------------------------

struct Filter {
  Common common;
  std::string records;
  std::optional<double> rho;
  std::optional<std::size_t> total;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int run_filter(const Filter& o) {
  const RunConfig cfg = o.common.config();
  TargetFileHeader header;
  auto records = read_target_records(o.records, &header);
  std::erase_if(records, [](const TargetRecord& r) { return r.split != Split::kUnlabeled; });
  const UnlabeledPools pools = filter_unlabeled(records);
  MixConfig mix = cfg.mixing;
  if (o.rho) mix.rho = *o.rho;
  if (o.total) mix.total = *o.total;
  if (o.seed) mix.seed = *o.seed;
  const auto ids = mix_pools(pools, mix);
  const json doc = {{"format", "sad-selection"},
                    {"version", 1},
                    {"config_hash", hash_hex(config_hash(cfg))},
                    {"records", o.records},
                    {"rho", mix.rho},
                    {"total", mix.total},
                    {"seed", mix.seed},
                    {"positive_pool", pools.positive.size()},
                    {"negative_pool", pools.negative.size()},
                    {"scene_ids", ids}};
  std::ofstream out(o.out);
  if (!out) throw InputError("cannot open " + o.out + " for writing");
  out << doc.dump(1) << '\n';
  std::printf("positive_pool %zu negative_pool %zu selected %zu (%zu positive, %zu negative)\n",
              pools.positive.size(), pools.negative.size(), ids.size(), mix.positives(),
              mix.negatives());
  return 0;
}

std::vector<std::string> read_selection(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  try {
    const json doc = json::parse(in);
    if (doc.at("format") != "sad-selection") throw InputError(path + ": not a selection file");
    return doc.at("scene_ids").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
}

// --- assemble ---------------------------------------------------------------

struct Assemble {
  Common common;
  std::vector<std::string> labeled;
  std::vector<std::string> unlabeled;
  std::string records;
  std::string selection;
  std::string mode;
  std::string out;
};

int run_assemble(const Assemble& o) {
  const RunConfig cfg = o.common.config();
  const ManifestMode mode = parse_manifest_mode(o.mode);
  std::vector<std::string> labeled_ids;
  for (const auto& s : load_scenes(o.labeled)) {
    if (s.split != Split::kLabeled) throw InputError("scene " + s.scene_id + " is not labeled");
    labeled_ids.push_back(s.scene_id);
  }
  std::vector<TargetRecord> records;
  if (!o.records.empty()) records = read_target_records(o.records);
  std::vector<std::string> unlabeled_ids;
  if (!o.selection.empty()) {
    unlabeled_ids = read_selection(o.selection);
  } else {
    for (const auto& r : records) {
      if (r.split == Split::kUnlabeled) unlabeled_ids.push_back(r.scene_id);
    }
  }
  TransferSetManifest m = assemble_manifest(labeled_ids, unlabeled_ids, mode, records);
  m.dataset_paths = o.labeled;
  if (!m.unlabeled.empty()) {
    if (o.unlabeled.empty()) throw UsageError("mode " + o.mode + " needs --unlabeled data");
    m.dataset_paths.insert(m.dataset_paths.end(), o.unlabeled.begin(), o.unlabeled.end());
  }
  m.targets_path = o.records;
  m.config_hash = hash_hex(config_hash(cfg));
  m.validate();
  write_manifest(o.out, m);
  std::printf("manifest %s: %zu labeled, %zu unlabeled -> %s\n", o.mode.c_str(), m.labeled.size(),
              m.unlabeled.size(), o.out.c_str());
  return 0;
}

// --- distill ----------------------------------------------------------------

struct Distill {
  Common common;
  std::string manifest;
  std::string teacher;
  std::string out;
  std::string loss_mode;
  std::string log;
};

int run_distill(const Distill& o) {
  require_workers(o.common.workers);
  const RunConfig cfg = o.common.config();
  const TransferSetManifest m = read_manifest(o.manifest);
  const auto scenes = load_scenes(m.dataset_paths);
  std::vector<TargetRecord> records;
  if (!m.targets_path.empty()) records = read_target_records(m.targets_path);
  const auto examples = build_examples(m, index_scenes(scenes), index_records(records));

  bool any_soft = false;
  for (const auto& ex : examples) any_soft = any_soft || ex.use_soft;
  TrainerConfig tc = cfg.trainer_for(cfg.student);
  tc.workers = o.common.workers;
  tc.loss_mode = any_soft ? LossMode::kAdlDistill : LossMode::kBaseline;
  if (!o.loss_mode.empty()) tc.loss_mode = parse_loss_mode(o.loss_mode);

  std::optional<DenseModel> teacher;
  if (!o.teacher.empty()) teacher = load_checkpoint(o.teacher);
  const DenseModel init = init_model(cfg.shape(cfg.student), cfg.student.init_seed, cfg.student.prior);
  const TrainResult r = train(init, teacher ? &*teacher : nullptr, examples, tc, cfg.loss, cfg.anchors);
  save_checkpoint(o.out, r.model, config_hash(cfg));
  write_loss_log_csv(default_log(o.out, o.log), r.log);
  print_loss_summary(r.log);
  if (!r.log.empty()) std::printf("soft loss at iteration 0: %.17g\n", r.log.front().soft);
  std::printf("wrote %s (%s, manifest %s)\n", o.out.c_str(), loss_mode_name(tc.loss_mode),
              manifest_mode_name(m.mode).c_str());
  return 0;
}

// --- eval -------------------------------------------------------------------

struct Eval {
  Common common;
  std::string model;
  std::vector<std::string> data;
  std::string out;
  std::optional<std::uint64_t> seed;
};

int run_eval(const Eval& o) {
  require_workers(o.common.workers);
  const RunConfig cfg = o.common.config();
  const DenseModel model = load_checkpoint(o.model);
  const auto scenes = load_scenes(o.data);
  const AnchorSet anchors = make_anchors(cfg.generator.height, cfg.generator.width, cfg.anchors);
  Evaluation ev = evaluate_model(model, scenes, anchors, cfg.inference, o.common.workers);
  ev.report.seed = o.seed.value_or(cfg.trainer.seed);
  ev.report.config_hash = hash_hex(config_hash(cfg));
  emit_report(o.out, ev.report, {}, ev.images);
  auto show = [](const std::optional<double>& v) {
    return v ? std::to_string(*v) : std::string("absent");
  };
  std::printf("ap %s ap50 %s ap75 %s (%zu images, %zu boxes)\n", show(ev.report.ap).c_str(),
              show(ev.report.ap50).c_str(), show(ev.report.ap75).c_str(), ev.report.num_images,
              ev.report.num_ground_truth);
  return 0;
}

// --- gradcheck --------------------------------------------------------------

struct Gradcheck {
  GradcheckOptions options;
};

int run_gradcheck_cmd(const Gradcheck& o) {
  if (o.options.trials == 0) throw UsageError("--trials must be positive");
  const auto rows = run_gradcheck(o.options);
  std::printf("%-20s %8s %8s %14s  %s\n", "kernel", "trials", "failed", "max_rel_err", "status");
  bool ok = true;
  for (const auto& r : rows) {
    std::printf("%-20s %8zu %8zu %14.3e  %s\n", r.kernel.c_str(), r.trials, r.failures,
                r.max_rel_error, r.passed() ? "PASS" : "FAIL");
    ok = ok && r.passed();
  }
  return ok ? 0 : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-supervised adaptive distillation on a toy dense detector", "sad"};
  app.require_subcommand(1);

  GenData gen;
  auto* c_gen = app.add_subcommand("gen-data", "Generate a synthetic scene dataset");
  add_common(c_gen, gen.common, false);
  c_gen->add_option("--out", gen.out, "Output dataset file")->required();
  c_gen->add_option("--count", gen.count, "Number of scenes");
  c_gen->add_option("--seed", gen.seed, "Data seed");
  c_gen->add_option("--split", gen.split, "labeled or unlabeled")
      ->check(CLI::IsMember({"labeled", "unlabeled"}));
  c_gen->add_option("--background-fraction", gen.background, "Share of object-free scenes")
      ->check(CLI::Range(0.0, 1.0));

  Train tr;
  auto* c_train = app.add_subcommand("train", "Train a detector on labeled data");
  add_common(c_train, tr.common);
  c_train->add_option("--data", tr.data, "Dataset file(s)")->required();
  c_train->add_option("--mode", tr.mode, "Loss mode (default from config)");
  c_train->add_option("--out", tr.out, "Output checkpoint")->required();
  c_train->add_option("--role", tr.role, "Network settings to use: student or teacher")
      ->check(CLI::IsMember({"student", "teacher"}));
  c_train->add_option("--targets", tr.targets, "Teacher records for soft-target modes");
  c_train->add_option("--teacher", tr.teacher, "Teacher checkpoint (mimic, self-distill)");
  c_train->add_option("--log", tr.log, "Loss CSV (default <out>.loss.csv)");

  Annotate an;
  auto* c_ann = app.add_subcommand("annotate", "Teacher hard and soft targets with calibration");
  add_common(c_ann, an.common);
  c_ann->add_option("--teacher", an.teacher, "Teacher checkpoint")->required();
  c_ann->add_option("--data", an.data, "Dataset file(s) to annotate")->required();
  c_ann->add_option("--labeled-stats", an.labeled_stats,
                    "Labeled dataset file, or average instances per labeled scene");
  c_ann->add_option("--threshold", an.threshold, "Reuse this score threshold");
  c_ann->add_option("--out", an.out, "Output record file")->required();

  Filter fi;
  auto* c_fil = app.add_subcommand("filter", "Split unlabeled records into pools and sample");
  add_common(c_fil, fi.common, false);
  c_fil->add_option("--records", fi.records, "Teacher record file")->required();
  c_fil->add_option("--rho", fi.rho, "Fraction drawn from the positive pool")
      ->check(CLI::Range(0.0, 1.0));
  c_fil->add_option("--total", fi.total, "Number of scenes to select");
  c_fil->add_option("--seed", fi.seed, "Sampling seed");
  c_fil->add_option("--out", fi.out, "Output selection file")->required();

  Assemble as;
  auto* c_asm = app.add_subcommand("assemble", "Build a transfer-set manifest");
  add_common(c_asm, as.common, false);
  c_asm->add_option("--labeled", as.labeled, "Labeled dataset file(s)")->required();
  c_asm->add_option("--unlabeled", as.unlabeled, "Unlabeled dataset file(s)");
  c_asm->add_option("--records", as.records, "Teacher record file");
  c_asm->add_option("--selection", as.selection, "Selection from `filter` (default: all)");
  c_asm->add_option("--mode", as.mode, "Manifest mode")
      ->required()
      ->check(CLI::IsMember({"supervised", "distill", "semisup-hard-only", "semisup-soft-only",
                             "semisup-full"}));
  c_asm->add_option("--out", as.out, "Output manifest")->required();

  Distill di;
  auto* c_dis = app.add_subcommand("distill", "Train a student from a manifest");
  add_common(c_dis, di.common);
  c_dis->add_option("--manifest", di.manifest, "Transfer-set manifest")->required();
  c_dis->add_option("--teacher", di.teacher, "Teacher checkpoint (mimic, self-distill)");
  c_dis->add_option("--out", di.out, "Output checkpoint")->required();
  c_dis->add_option("--loss-mode", di.loss_mode, "Override the loss mode");
  c_dis->add_option("--log", di.log, "Loss CSV (default <out>.loss.csv)");

  Eval ev;
  auto* c_eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(c_eval, ev.common);
  c_eval->add_option("--model", ev.model, "Checkpoint")->required();
  c_eval->add_option("--data", ev.data, "Dataset file(s)")->required();
  c_eval->add_option("--out", ev.out, "Report directory")->required();
  c_eval->add_option("--seed", ev.seed, "Seed recorded in the report");

  Gradcheck gc;
  auto* c_gc = app.add_subcommand("gradcheck", "Finite-difference check of every loss kernel");
  c_gc->add_option("--trials", gc.options.trials, "Random configurations per kernel");
  c_gc->add_option("--seed", gc.options.seed, "Sampling seed");
  c_gc->add_option("--perturb", gc.options.perturb)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (*c_gen) return run_gen_data(gen);
    if (*c_train) return run_train(tr);
    if (*c_ann) return run_annotate(an);
    if (*c_fil) return run_filter(fi);
    if (*c_asm) return run_assemble(as);
    if (*c_dis) return run_distill(di);
    if (*c_eval) return run_eval(ev);
    if (*c_gc) return run_gradcheck_cmd(gc);
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical abort: %s (scene %s, term %s)\n", e.what(),
                 e.scene_id().c_str(), e.term().c_str());
    return kExitNumerical;
  } catch (const OracleError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFailure;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInput;
  }
  return kExitFailure;
}
