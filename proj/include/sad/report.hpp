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

#include <iosfwd>
#include <string>
#include <vector>

#include "sad/metrics.hpp"
#include "sad/trainer.hpp"

namespace sad {

void write_report(std::ostream& out, const EvalReport& report);
EvalReport read_report(std::istream& in);
void write_report(const std::string& path, const EvalReport& report);
EvalReport read_report(const std::string& path);

// Detections and ground truth per image, enough to recompute the report.
void write_detections(std::ostream& out, const std::vector<ImageDetections>& images);
std::vector<ImageDetections> read_detections(std::istream& in);
void write_detections(const std::string& path, const std::vector<ImageDetections>& images);
std::vector<ImageDetections> read_detections(const std::string& path);

struct RhoSweepRow {
  double rho = 0.0;
  std::vector<double> ap;  // one entry per seed
  double mean_ap() const;
};

// Header `rho,mean_ap,runs,ap_per_run`; the last column is `;`-separated.
void write_rho_sweep_csv(const std::string& path, const std::vector<RhoSweepRow>& rows);

// Writes report.json, loss.csv and detections.jsonl into `dir`.
void emit_report(const std::string& dir, const EvalReport& report,
                 const std::vector<LossLogEntry>& log,
                 const std::vector<ImageDetections>& images);

}  // namespace sad
