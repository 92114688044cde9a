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

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sad/scene.hpp"

namespace sad {

struct ModelShape {
  int num_classes = 3;
  int anchors_per_cell = 3;
  int window = 3;    // k, odd
  int features = 8;

  int outputs() const { return num_classes + 4; }
  int inputs() const { return window * window * features + 1; }  // + bias
  std::size_t parameter_count() const {
    return static_cast<std::size_t>(anchors_per_cell) * outputs() * inputs();
  }
  void validate() const;

  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

// A shared affine scorer: for every cell and anchor slot, C class logits and
// 4 box deltas are linear in the zero-padded k x k feature window around the
// cell. Parameters are stored slot-major, then output row, then input column
// (bias last).
class DenseModel {
 public:
  DenseModel() = default;
  explicit DenseModel(const ModelShape& shape);

  const ModelShape& shape() const { return shape_; }
  std::span<double> parameters() {
    return {params_.data(), static_cast<std::size_t>(params_.size())};
  }
  std::span<const double> parameters() const {
    return {params_.data(), static_cast<std::size_t>(params_.size())};
  }
  const Eigen::VectorXd& parameter_vector() const { return params_; }

  // True for parameters that are biases (excluded from weight decay).
  bool is_bias(std::size_t index) const {
    return index % static_cast<std::size_t>(shape_.inputs()) ==
           static_cast<std::size_t>(shape_.inputs() - 1);
  }

  friend bool operator==(const DenseModel&, const DenseModel&);

 private:
  ModelShape shape_;
  Eigen::VectorXd params_;
};

// Small Gaussian weights, zero delta biases and class biases at the prior
// probability `prior` so early training is not swamped by background.
DenseModel init_model(const ModelShape& shape, std::uint64_t seed, double prior = 0.01);

struct ModelOutput {
  std::size_t num_anchors = 0;
  int num_classes = 0;
  std::vector<double> logits;  // anchor-major, num_anchors x num_classes
  std::vector<double> deltas;  // anchor-major, num_anchors x 4
};

// Window columns of one scene, kept between forward and backward.
struct ForwardCache {
  Eigen::MatrixXd columns;  // cells x inputs
};

ModelOutput forward(const DenseModel& model, const Scene& scene, ForwardCache* cache = nullptr);

// Accumulates d loss / d params into grad given d loss / d outputs.
void backward(const DenseModel& model, const ForwardCache& cache,
              std::span<const double> grad_logits, std::span<const double> grad_deltas,
              std::span<double> grad);

// Versioned little-endian checkpoint: magic, version, C, A, k, F, parameter
// count, config hash, then the parameters as 64-bit floats.
void save_checkpoint(std::ostream& out, const DenseModel& model, std::uint64_t config_hash);
void save_checkpoint(const std::string& path, const DenseModel& model, std::uint64_t config_hash);
DenseModel load_checkpoint(std::istream& in, std::uint64_t* config_hash = nullptr);
DenseModel load_checkpoint(const std::string& path, std::uint64_t* config_hash = nullptr);

}  // namespace sad
