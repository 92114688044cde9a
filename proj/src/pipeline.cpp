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
#include "sad/pipeline.hpp"

#include "sad/errors.hpp"
#include "sad/parallel.hpp"

namespace sad {

Evaluation evaluate_model(const DenseModel& model, const std::vector<Scene>& scenes,
                          const AnchorSet& anchors, const InferenceConfig& inference,
                          std::size_t workers) {
  Evaluation ev;
  ev.images.resize(scenes.size());
  parallel_for(scenes.size(), workers, [&](std::size_t i) {
    ev.images[i] = {scenes[i].scene_id, detect(model, scenes[i], anchors, inference),
                    scenes[i].boxes};
  });
  ev.report = evaluate(ev.images, model.shape().num_classes);
  return ev;
}

std::vector<Scene> load_scenes(const std::vector<std::string>& paths) {
  std::vector<Scene> out;
  for (const auto& p : paths) {
    auto part = read_dataset(p);
    out.insert(out.end(), std::make_move_iterator(part.begin()),
               std::make_move_iterator(part.end()));
  }
  index_scenes(out);  // duplicate check
  return out;
}

std::vector<TrainingExample> supervised_examples(const std::vector<Scene>& scenes) {
  std::vector<TrainingExample> out;
  out.reserve(scenes.size());
  for (const auto& s : scenes) out.push_back({&s, s.boxes, true, true, false, nullptr});
  return out;
}

std::map<std::string, const Scene*> index_scenes(const std::vector<Scene>& scenes) {
  std::map<std::string, const Scene*> out;
  for (const auto& s : scenes) {
    if (!out.emplace(s.scene_id, &s).second) throw InputError("duplicate scene id " + s.scene_id);
  }
  return out;
}

std::map<std::string, const TargetRecord*> index_records(const std::vector<TargetRecord>& records) {
  std::map<std::string, const TargetRecord*> out;
  for (const auto& r : records) {
    if (!out.emplace(r.scene_id, &r).second) {
      throw InputError("duplicate target record for scene " + r.scene_id);
    }
  }
  return out;
}

}  // namespace sad
