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

#include <map>
#include <string>
#include <vector>

#include "sad/anchors.hpp"
#include "sad/metrics.hpp"
#include "sad/model.hpp"
#include "sad/scene.hpp"
#include "sad/teacher.hpp"
#include "sad/trainer.hpp"

namespace sad {

// Glue shared by the command-line driver and the acceptance runner.

struct Evaluation {
  EvalReport report;
  std::vector<ImageDetections> images;
};

Evaluation evaluate_model(const DenseModel& model, const std::vector<Scene>& scenes,
                          const AnchorSet& anchors, const InferenceConfig& inference,
                          std::size_t workers = 1);

// Concatenates the scenes of several dataset files, rejecting duplicate ids.
std::vector<Scene> load_scenes(const std::vector<std::string>& paths);

// Ground-truth-only examples in scene order.
std::vector<TrainingExample> supervised_examples(const std::vector<Scene>& scenes);

std::map<std::string, const Scene*> index_scenes(const std::vector<Scene>& scenes);
std::map<std::string, const TargetRecord*> index_records(const std::vector<TargetRecord>& records);

}  // namespace sad
