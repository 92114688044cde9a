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
#include "sad/semisup.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include <json.hpp>

#include "sad/errors.hpp"

namespace sad {

using nlohmann::json;

UnlabeledPools filter_unlabeled(const std::vector<TargetRecord>& records) {
  UnlabeledPools pools;
  for (const auto& r : records) {
    (r.hard_targets.empty() ? pools.negative : pools.positive).push_back(r.scene_id);
  }
  std::sort(pools.positive.begin(), pools.positive.end());
  std::sort(pools.negative.begin(), pools.negative.end());
  return pools;
}

void MixConfig::validate() const {
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("mix: rho must lie in [0, 1]");
}

std::size_t MixConfig::positives() const {
  return static_cast<std::size_t>(std::llround(rho * static_cast<double>(total)));
}

namespace {

void sample_into(const std::vector<std::string>& pool, std::size_t count, std::mt19937_64& rng,
                 std::vector<std::string>& out) {
  std::vector<std::string> picked;
  picked.reserve(count);
  std::sample(pool.begin(), pool.end(), std::back_inserter(picked), count, rng);
  out.insert(out.end(), picked.begin(), picked.end());
}

}  // namespace

std::vector<std::string> mix_pools(const UnlabeledPools& pools, const MixConfig& mix) {
  mix.validate();
  const std::size_t npos = mix.positives();
  const std::size_t nneg = mix.negatives();
  if (npos > pools.positive.size()) {
    throw InputError("mix: positive pool has " + std::to_string(pools.positive.size()) +
                     " scenes, " + std::to_string(npos) + " requested");
  }
  if (nneg > pools.negative.size()) {
    throw InputError("mix: negative pool has " + std::to_string(pools.negative.size()) +
                     " scenes, " + std::to_string(nneg) + " requested");
  }
  std::mt19937_64 rng(mix.seed);
  std::vector<std::string> out;
  sample_into(pools.positive, npos, rng, out);
  sample_into(pools.negative, nneg, rng, out);
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

constexpr std::pair<ManifestMode, const char*> kModeNames[] = {
    {ManifestMode::kSupervised, "supervised"},
    {ManifestMode::kDistill, "distill"},
    {ManifestMode::kSemisupHardOnly, "semisup-hard-only"},
    {ManifestMode::kSemisupSoftOnly, "semisup-soft-only"},
    {ManifestMode::kSemisupFull, "semisup-full"},
};

struct ModeFlags {
  ImageFlags labeled;
  ImageFlags unlabeled;
  bool has_unlabeled;
};

ModeFlags flags_for(ManifestMode mode) {
  const ImageFlags gt{true, true, false, false, false};
  const ImageFlags gt_soft{true, true, true, false, false};
  switch (mode) {
    case ManifestMode::kSupervised:
      return {gt, {}, false};
    case ManifestMode::kDistill:
      return {gt_soft, {}, false};
    case ManifestMode::kSemisupHardOnly:
      return {gt, {false, false, false, true, true}, true};
    case ManifestMode::kSemisupSoftOnly:
      return {gt_soft, {false, false, true, false, false}, true};
    case ManifestMode::kSemisupFull:
      return {gt_soft, {false, false, true, true, true}, true};
  }
  throw ConfigError("unknown manifest mode");
}

}  // namespace

std::string manifest_mode_name(ManifestMode mode) {
  for (const auto& [m, name] : kModeNames) {
    if (m == mode) return name;
  }
  throw ConfigError("unknown manifest mode");
}

ManifestMode parse_manifest_mode(const std::string& name) {
  for (const auto& [m, n] : kModeNames) {
    if (name == n) return m;
  }
  throw ConfigError("unknown manifest mode '" + name + "'");
}

void TransferSetManifest::validate() const {
  std::set<std::string> seen;
  for (const auto* list : {&labeled, &unlabeled}) {
    for (const auto& e : *list) {
      if (!seen.insert(e.scene_id).second) {
        throw InputError("manifest: scene " + e.scene_id + " listed twice");
      }
    }
  }
  for (const auto& e : labeled) {
    if (!e.flags.use_gt_focal || !e.flags.use_gt_loc) {
      throw InputError("manifest: labeled scene " + e.scene_id + " must use its ground truth");
    }
    if (e.flags.use_hard_focal || e.flags.use_hard_loc) {
      throw InputError("manifest: labeled scene " + e.scene_id + " cannot use teacher boxes");
    }
  }
  for (const auto& e : unlabeled) {
    if (e.flags.use_gt_focal || e.flags.use_gt_loc) {
      throw InputError("manifest: unlabeled scene " + e.scene_id + " has no ground truth");
    }
  }
  if (uses_soft_targets() && targets_path.empty()) {
    throw InputError("manifest: soft targets requested but no target file recorded");
  }
}

bool TransferSetManifest::uses_soft_targets() const {
  for (const auto* list : {&labeled, &unlabeled}) {
    for (const auto& e : *list) {
      if (e.flags.use_soft_adl || e.flags.use_hard_focal || e.flags.use_hard_loc) return true;
    }
  }
  return false;
}

TransferSetManifest assemble_manifest(const std::vector<std::string>& labeled_ids,
                                      const std::vector<std::string>& unlabeled_ids,
                                      ManifestMode mode,
                                      const std::vector<TargetRecord>& records) {
  const ModeFlags flags = flags_for(mode);
  std::set<std::string> have;
  for (const auto& r : records) have.insert(r.scene_id);
  auto require = [&](const std::string& id) {
    if (!have.count(id)) throw InputError("manifest: no teacher record for scene " + id);
  };

  TransferSetManifest m;
  m.mode = mode;
  for (const auto& id : labeled_ids) {
    if (flags.labeled.use_soft_adl) require(id);
    m.labeled.push_back({id, flags.labeled});
  }
  if (flags.has_unlabeled) {
    for (const auto& id : unlabeled_ids) {
      require(id);
      m.unlabeled.push_back({id, flags.unlabeled});
    }
  }
  // Paths are filled in by the caller; skip the target-file check here.
  std::set<std::string> seen;
  for (const auto* list : {&m.labeled, &m.unlabeled}) {
    for (const auto& e : *list) {
      if (!seen.insert(e.scene_id).second) {
        throw InputError("manifest: scene " + e.scene_id + " listed twice");
      }
    }
  }
  return m;
}

namespace {

json entries_json(const std::vector<ManifestEntry>& entries) {
  json arr = json::array();
  for (const auto& e : entries) {
    arr.push_back({{"scene_id", e.scene_id},
                   {"use_gt_focal", e.flags.use_gt_focal},
                   {"use_gt_loc", e.flags.use_gt_loc},
                   {"use_soft_adl", e.flags.use_soft_adl},
                   {"use_hard_focal", e.flags.use_hard_focal},
                   {"use_hard_loc", e.flags.use_hard_loc}});
  }
  return arr;
}

std::vector<ManifestEntry> entries_from_json(const json& arr) {
  std::vector<ManifestEntry> out;
  for (const auto& j : arr) {
    ManifestEntry e;
    e.scene_id = j.at("scene_id").get<std::string>();
    e.flags.use_gt_focal = j.at("use_gt_focal").get<bool>();
    e.flags.use_gt_loc = j.at("use_gt_loc").get<bool>();
    e.flags.use_soft_adl = j.at("use_soft_adl").get<bool>();
    e.flags.use_hard_focal = j.at("use_hard_focal").get<bool>();
    e.flags.use_hard_loc = j.at("use_hard_loc").get<bool>();
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace

void write_manifest(std::ostream& out, const TransferSetManifest& m) {
  const json doc = {{"format", "sad-manifest"},
                    {"version", 1},
                    {"mode", manifest_mode_name(m.mode)},
                    {"datasets", m.dataset_paths},
                    {"targets", m.targets_path},
                    {"config_hash", m.config_hash},
                    {"labeled", entries_json(m.labeled)},
                    {"unlabeled", entries_json(m.unlabeled)}};
  out << doc.dump(1) << '\n';
  if (!out) throw InputError("manifest: write failed");
}

TransferSetManifest read_manifest(std::istream& in) {
  TransferSetManifest m;
  try {
    const json doc = json::parse(in);
    if (doc.at("format") != "sad-manifest" || doc.at("version") != 1) {
      throw InputError("manifest: unsupported format");
    }
    m.mode = parse_manifest_mode(doc.at("mode").get<std::string>());
    m.dataset_paths = doc.at("datasets").get<std::vector<std::string>>();
    m.targets_path = doc.at("targets").get<std::string>();
    m.config_hash = doc.at("config_hash").get<std::string>();
    m.labeled = entries_from_json(doc.at("labeled"));
    m.unlabeled = entries_from_json(doc.at("unlabeled"));
  } catch (const json::exception& e) {
    throw InputError(std::string("manifest: ") + e.what());
  }
  m.validate();
  return m;
}

void write_manifest(const std::string& path, const TransferSetManifest& manifest) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open " + path + " for writing");
  write_manifest(out, manifest);
}

TransferSetManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  return read_manifest(in);
}

std::vector<GroundTruthBox> hard_targets_as_boxes(const TargetRecord& record) {
  std::vector<GroundTruthBox> out;
  out.reserve(record.hard_targets.size());
  for (const auto& d : record.hard_targets) out.push_back({d.class_id, d.box});
  return out;
}

std::vector<TrainingExample> build_examples(
    const TransferSetManifest& manifest, const std::map<std::string, const Scene*>& scenes,
    const std::map<std::string, const TargetRecord*>& records) {
  auto scene_for = [&](const std::string& id) {
    const auto it = scenes.find(id);
    if (it == scenes.end()) throw InputError("manifest: scene " + id + " not found in data");
    return it->second;
  };
  auto record_for = [&](const std::string& id) {
    const auto it = records.find(id);
    if (it == records.end()) throw InputError("manifest: no teacher record for scene " + id);
    return it->second;
  };

  std::vector<TrainingExample> out;
  for (const auto& e : manifest.labeled) {
    const Scene* s = scene_for(e.scene_id);
    if (s->split != Split::kLabeled) {
      throw InputError("manifest: scene " + e.scene_id + " is not labeled");
    }
    TrainingExample ex{s, s->boxes, true, true, false, nullptr};
    if (e.flags.use_soft_adl) {
      ex.use_soft = true;
      ex.soft_targets = &record_for(e.scene_id)->soft_targets;
    }
    out.push_back(std::move(ex));
  }
  for (const auto& e : manifest.unlabeled) {
    const Scene* s = scene_for(e.scene_id);
    TrainingExample ex{s, {}, e.flags.use_hard_focal, e.flags.use_hard_loc, e.flags.use_soft_adl,
                       nullptr};
    if (e.flags.use_hard_focal || e.flags.use_hard_loc || e.flags.use_soft_adl) {
      const TargetRecord* r = record_for(e.scene_id);
      ex.boxes = hard_targets_as_boxes(*r);
      if (e.flags.use_soft_adl) ex.soft_targets = &r->soft_targets;
    }
    if (!ex.use_focal && !ex.use_loc && !ex.use_soft) {
      throw InputError("manifest: unlabeled scene " + e.scene_id + " contributes no loss");
    }
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace sad
