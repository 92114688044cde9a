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
#include "sad/report.hpp"

#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "sad/errors.hpp"

namespace sad {

using nlohmann::json;

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open " + path + " for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  return in;
}

json box_json(const Box& b) { return {b.x1, b.y1, b.x2, b.y2}; }

Box box_from(const json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(),
          j.at(3).get<double>()};
}

}  // namespace

void write_report(std::ostream& out, const EvalReport& r) {
  json per_class = json::array();
  for (const auto& v : r.per_class_ap) per_class.push_back(optional_json(v));
  json curves = json::array();
  for (const auto& c : r.pr_curves) {
    curves.push_back(
        {{"class_id", c.class_id}, {"iou", c.iou}, {"recall", c.recall}, {"precision", c.precision}});
  }
  const json doc = {{"format", "sad-report"},
                    {"version", 1},
                    {"ap", optional_json(r.ap)},
                    {"ap50", optional_json(r.ap50)},
                    {"ap75", optional_json(r.ap75)},
                    {"per_class_ap", per_class},
                    {"num_images", r.num_images},
                    {"num_ground_truth", r.num_ground_truth},
                    {"seed", r.seed},
                    {"config_hash", r.config_hash},
                    {"pr_curves", curves}};
  out << doc.dump(1) << '\n';
  if (!out) throw InputError("report: write failed");
}

EvalReport read_report(std::istream& in) {
  EvalReport r;
  try {
    const json doc = json::parse(in);
    if (doc.at("format") != "sad-report") throw InputError("report: unsupported format");
    r.ap = optional_from(doc.at("ap"));
    r.ap50 = optional_from(doc.at("ap50"));
    r.ap75 = optional_from(doc.at("ap75"));
    for (const auto& v : doc.at("per_class_ap")) r.per_class_ap.push_back(optional_from(v));
    r.num_images = doc.at("num_images").get<std::size_t>();
    r.num_ground_truth = doc.at("num_ground_truth").get<std::size_t>();
    r.seed = doc.at("seed").get<std::uint64_t>();
    r.config_hash = doc.at("config_hash").get<std::string>();
    for (const auto& c : doc.at("pr_curves")) {
      r.pr_curves.push_back({c.at("class_id").get<int>(), c.at("iou").get<double>(),
                             c.at("recall").get<std::vector<double>>(),
                             c.at("precision").get<std::vector<double>>()});
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("report: ") + e.what());
  }
  return r;
}

void write_report(const std::string& path, const EvalReport& report) {
  auto out = open_out(path);
  write_report(out, report);
}

EvalReport read_report(const std::string& path) {
  auto in = open_in(path);
  return read_report(in);
}

void write_detections(std::ostream& out, const std::vector<ImageDetections>& images) {
  for (const auto& img : images) {
    json dets = json::array();
    for (const auto& d : img.detections) {
      dets.push_back({{"class_id", d.class_id}, {"box", box_json(d.box)}, {"score", d.score}});
    }
    json gts = json::array();
    for (const auto& g : img.ground_truth) {
      gts.push_back({{"class_id", g.class_id}, {"box", box_json(g.box)}});
    }
    out << json{{"scene_id", img.scene_id}, {"detections", dets}, {"ground_truth", gts}}.dump()
        << '\n';
  }
  if (!out) throw InputError("detections: write failed");
}

std::vector<ImageDetections> read_detections(std::istream& in) {
  std::vector<ImageDetections> images;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      ImageDetections img;
      img.scene_id = j.at("scene_id").get<std::string>();
      for (const auto& d : j.at("detections")) {
        img.detections.push_back(
            {d.at("class_id").get<int>(), box_from(d.at("box")), d.at("score").get<double>()});
      }
      for (const auto& g : j.at("ground_truth")) {
        img.ground_truth.push_back({g.at("class_id").get<int>(), box_from(g.at("box"))});
      }
      images.push_back(std::move(img));
    } catch (const json::exception& e) {
      throw InputError("detections line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return images;
}

void write_detections(const std::string& path, const std::vector<ImageDetections>& images) {
  auto out = open_out(path);
  write_detections(out, images);
}

std::vector<ImageDetections> read_detections(const std::string& path) {
  auto in = open_in(path);
  return read_detections(in);
}

double RhoSweepRow::mean_ap() const {
  if (ap.empty()) return 0.0;
  return std::accumulate(ap.begin(), ap.end(), 0.0) / static_cast<double>(ap.size());
}

void write_rho_sweep_csv(const std::string& path, const std::vector<RhoSweepRow>& rows) {
  auto out = open_out(path);
  out.precision(17);
  out << "rho,mean_ap,runs,ap_per_run\n";
  for (const auto& r : rows) {
    out << r.rho << ',' << r.mean_ap() << ',' << r.ap.size() << ',';
    for (std::size_t i = 0; i < r.ap.size(); ++i) out << (i ? ";" : "") << r.ap[i];
    out << '\n';
  }
  if (!out) throw InputError("cannot write " + path);
}

void emit_report(const std::string& dir, const EvalReport& report,
                 const std::vector<LossLogEntry>& log,
                 const std::vector<ImageDetections>& images) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw InputError("cannot create " + dir + ": " + ec.message());
  const std::filesystem::path d(dir);
  write_report((d / "report.json").string(), report);
  if (!log.empty()) write_loss_log_csv((d / "loss.csv").string(), log);
  write_detections((d / "detections.jsonl").string(), images);
}

}  // namespace sad
