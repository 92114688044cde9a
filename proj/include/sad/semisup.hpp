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

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "sad/scene.hpp"
#include "sad/teacher.hpp"
#include "sad/trainer.hpp"

namespace sad {

// Unlabeled scenes split by whether the teacher annotated anything. Both
// pools are sorted by scene id so the split does not depend on record order.
struct UnlabeledPools {
  std::vector<std::string> positive;
  std::vector<std::string> negative;
};

UnlabeledPools filter_unlabeled(const std::vector<TargetRecord>& records);

struct MixConfig {
  double rho = 1.0;
  std::size_t total = 0;
  std::uint64_t seed = 1;

  void validate() const;
  std::size_t positives() const;
  std::size_t negatives() const { return total - positives(); }
};

// Draws round(rho * total) ids from the positive pool and the rest from the
// negative pool, each without replacement. Output is sorted.
std::vector<std::string> mix_pools(const UnlabeledPools& pools, const MixConfig& mix);

enum class ManifestMode {
  kSupervised,
  kDistill,
  kSemisupHardOnly,
  kSemisupSoftOnly,
  kSemisupFull,
};

std::string manifest_mode_name(ManifestMode mode);
ManifestMode parse_manifest_mode(const std::string& name);

struct ImageFlags {
  bool use_gt_focal = false;
  bool use_gt_loc = false;
  bool use_soft_adl = false;
  bool use_hard_focal = false;
  bool use_hard_loc = false;

  friend bool operator==(const ImageFlags&, const ImageFlags&) = default;
};

struct ManifestEntry {
  std::string scene_id;
  ImageFlags flags;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct TransferSetManifest {
  ManifestMode mode = ManifestMode::kSupervised;
  std::vector<ManifestEntry> labeled;
  std::vector<ManifestEntry> unlabeled;
  // Provenance: scene files and the teacher record file.
  std::vector<std::string> dataset_paths;
  std::string targets_path;
  std::string config_hash;

  void validate() const;
  bool uses_soft_targets() const;

  friend bool operator==(const TransferSetManifest&, const TransferSetManifest&) = default;
};

// Throws InputError naming the first scene whose record is missing. The
// unlabeled list is ignored by the supervised and distill modes.
TransferSetManifest assemble_manifest(const std::vector<std::string>& labeled_ids,
                                      const std::vector<std::string>& unlabeled_ids,
                                      ManifestMode mode,
                                      const std::vector<TargetRecord>& records);

void write_manifest(std::ostream& out, const TransferSetManifest& manifest);
TransferSetManifest read_manifest(std::istream& in);
void write_manifest(const std::string& path, const TransferSetManifest& manifest);
TransferSetManifest read_manifest(const std::string& path);

// Resolves a manifest into trainer inputs. The returned examples point into
// `scenes` and `records`, which must outlive them.
std::vector<TrainingExample> build_examples(const TransferSetManifest& manifest,
                                            const std::map<std::string, const Scene*>& scenes,
                                            const std::map<std::string, const TargetRecord*>& records);

std::vector<GroundTruthBox> hard_targets_as_boxes(const TargetRecord& record);

}  // namespace sad
