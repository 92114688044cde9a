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

#include <stdexcept>
#include <string>

namespace sad {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad numeric or structural input to an operation.
class InputError : public Error {
 public:
  using Error::Error;
};

// An operation was called in a way its contract forbids (e.g. focal loss
// without a hard label).
class UsageError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Raised when training produces a non-finite loss. Carries the scene and the
// loss term that went bad so the CLI can print a diagnostic.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, std::string scene_id, std::string term)
      : Error(what), scene_id_(std::move(scene_id)), term_(std::move(term)) {}

  const std::string& scene_id() const { return scene_id_; }
  const std::string& term() const { return term_; }

 private:
  std::string scene_id_;
  std::string term_;
};

// The finite-difference oracle could not evaluate its function.
class OracleError : public Error {
 public:
  using Error::Error;
};

}  // namespace sad
