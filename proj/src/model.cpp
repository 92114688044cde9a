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
#include "sad/model.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "sad/errors.hpp"

namespace sad {

namespace {

constexpr std::array<char, 8> kMagic{'S', 'A', 'D', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kCheckpointVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint IO assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw InputError("checkpoint: truncated");
  return v;
}

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

void ModelShape::validate() const {
  if (num_classes < 1 || anchors_per_cell < 1 || features < 1) {
    throw ConfigError("model: classes, anchors and features must be positive");
  }
  if (window < 1 || window % 2 == 0) {
    throw ConfigError("model: window must be a positive odd number");
  }
}

DenseModel::DenseModel(const ModelShape& shape) : shape_(shape) {
  shape_.validate();
  params_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(shape_.parameter_count()));
}

bool operator==(const DenseModel& a, const DenseModel& b) {
  return a.shape_ == b.shape_ && a.params_.size() == b.params_.size() &&
         std::memcmp(a.params_.data(), b.params_.data(),
                     sizeof(double) * static_cast<std::size_t>(a.params_.size())) == 0;
}

DenseModel init_model(const ModelShape& shape, std::uint64_t seed, double prior) {
  DenseModel model(shape);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.01);
  const double class_bias = -std::log((1.0 - prior) / prior);
  auto p = model.parameters();
  const int in = shape.inputs();
  for (int a = 0; a < shape.anchors_per_cell; ++a) {
    for (int o = 0; o < shape.outputs(); ++o) {
      const std::size_t row = (static_cast<std::size_t>(a) * shape.outputs() + o) * in;
      for (int j = 0; j + 1 < in; ++j) {
        p[row + j] = normal(rng);
      }
      p[row + in - 1] = o < shape.num_classes ? class_bias : 0.0;
    }
  }
  return model;
}

ModelOutput forward(const DenseModel& model, const Scene& scene, ForwardCache* cache) {
  const ModelShape& shape = model.shape();
  if (scene.features != shape.features) {
    throw InputError("forward: scene " + scene.scene_id + " has " +
                     std::to_string(scene.features) + " features, model expects " +
                     std::to_string(shape.features));
  }
  if (scene.grid.size() != static_cast<std::size_t>(scene.height) * scene.width * scene.features) {
    throw InputError("forward: scene " + scene.scene_id + " grid size mismatch");
  }
  const int cells = scene.height * scene.width;
  const int half = shape.window / 2;
  const int f = shape.features;

  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c.columns.setZero(cells, shape.inputs());
  for (int y = 0; y < scene.height; ++y) {
    for (int x = 0; x < scene.width; ++x) {
      const int row = y * scene.width + x;
      int col = 0;
      for (int dy = -half; dy <= half; ++dy) {
        for (int dx = -half; dx <= half; ++dx, col += f) {
          const int yy = y + dy;
          const int xx = x + dx;
          if (yy < 0 || yy >= scene.height || xx < 0 || xx >= scene.width) continue;
          const double* src = &scene.grid[(static_cast<std::size_t>(yy) * scene.width + xx) * f];
          for (int k = 0; k < f; ++k) c.columns(row, col + k) = src[k];
        }
      }
      c.columns(row, shape.inputs() - 1) = 1.0;
    }
  }

  ModelOutput out;
  out.num_anchors = static_cast<std::size_t>(cells) * shape.anchors_per_cell;
  out.num_classes = shape.num_classes;
  out.logits.resize(out.num_anchors * shape.num_classes);
  out.deltas.resize(out.num_anchors * 4);

  const auto& params = model.parameter_vector();
  const int a_count = shape.anchors_per_cell;
  for (int a = 0; a < a_count; ++a) {
    Eigen::Map<const RowMajor> weights(
        params.data() + static_cast<std::size_t>(a) * shape.outputs() * shape.inputs(),
        shape.outputs(), shape.inputs());
    const RowMajor scores = c.columns * weights.transpose();
    for (int cell = 0; cell < cells; ++cell) {
      const std::size_t anchor = static_cast<std::size_t>(cell) * a_count + a;
      for (int k = 0; k < shape.num_classes; ++k) {
        out.logits[anchor * shape.num_classes + k] = scores(cell, k);
      }
      for (int k = 0; k < 4; ++k) {
        out.deltas[anchor * 4 + k] = scores(cell, shape.num_classes + k);
      }
    }
  }
  return out;
}

void backward(const DenseModel& model, const ForwardCache& cache,
              std::span<const double> grad_logits, std::span<const double> grad_deltas,
              std::span<double> grad) {
  const ModelShape& shape = model.shape();
  const auto cells = cache.columns.rows();
  const int a_count = shape.anchors_per_cell;
  const std::size_t anchors = static_cast<std::size_t>(cells) * a_count;
  if (grad_logits.size() != anchors * shape.num_classes || grad_deltas.size() != anchors * 4 ||
      grad.size() != shape.parameter_count()) {
    throw InputError("backward: buffer size mismatch");
  }
  RowMajor g(cells, shape.outputs());
  for (int a = 0; a < a_count; ++a) {
    for (Eigen::Index cell = 0; cell < cells; ++cell) {
      const std::size_t anchor = static_cast<std::size_t>(cell) * a_count + a;
      for (int k = 0; k < shape.num_classes; ++k) {
        g(cell, k) = grad_logits[anchor * shape.num_classes + k];
      }
      for (int k = 0; k < 4; ++k) {
        g(cell, shape.num_classes + k) = grad_deltas[anchor * 4 + k];
      }
    }
    Eigen::Map<RowMajor> dw(grad.data() + static_cast<std::size_t>(a) * shape.outputs() * shape.inputs(),
                            shape.outputs(), shape.inputs());
    dw.noalias() += g.transpose() * cache.columns;
  }
}

void save_checkpoint(std::ostream& out, const DenseModel& model, std::uint64_t config_hash) {
  const ModelShape& s = model.shape();
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.num_classes));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.anchors_per_cell));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.window));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.features));
  put<std::uint64_t>(out, s.parameter_count());
  put<std::uint64_t>(out, config_hash);
  for (double v : model.parameters()) put<double>(out, v);
}

void save_checkpoint(const std::string& path, const DenseModel& model, std::uint64_t config_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open " + path + " for writing");
  save_checkpoint(out, model, config_hash);
  if (!out) throw InputError("failed writing " + path);
}

DenseModel load_checkpoint(std::istream& in, std::uint64_t* config_hash) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) {
    throw InputError("checkpoint: bad magic");
  }
  if (get<std::uint32_t>(in) != kCheckpointVersion) {
    throw InputError("checkpoint: unsupported version");
  }
  ModelShape s;
  s.num_classes = static_cast<int>(get<std::uint32_t>(in));
  s.anchors_per_cell = static_cast<int>(get<std::uint32_t>(in));
  s.window = static_cast<int>(get<std::uint32_t>(in));
  s.features = static_cast<int>(get<std::uint32_t>(in));
  const auto count = get<std::uint64_t>(in);
  const auto hash = get<std::uint64_t>(in);
  try {
    s.validate();
  } catch (const ConfigError& e) {
    throw InputError(std::string("checkpoint: ") + e.what());
  }
  if (count != s.parameter_count()) {
    throw InputError("checkpoint: parameter count does not match shape");
  }
  DenseModel model(s);
  for (double& v : model.parameters()) v = get<double>(in);
  if (config_hash) *config_hash = hash;
  return model;
}

DenseModel load_checkpoint(const std::string& path, std::uint64_t* config_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint " + path);
  return load_checkpoint(in, config_hash);
}

}  // namespace sad
