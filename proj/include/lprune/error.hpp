// Copyright (c) 2026 The lprune Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lprune {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or graph dimensions do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A value that must stay finite became NaN or Inf.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// An operation was called out of order (e.g. backward before forward).
class StateError : public Error {
 public:
  using Error::Error;
};

/// Argument outside its documented domain.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Checkpoint magic bytes or version do not match.
class CheckpointFormatError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint ends before the header, metadata or parameter blob is complete.
class CheckpointTruncatedError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint topology and blob length disagree.
class CheckpointTopologyError : public Error {
 public:
  using Error::Error;
};

/// A required dataset file does not exist.
class MissingFileError : public Error {
 public:
  using Error::Error;
};

/// A dataset file has the wrong byte length.
class FileLengthError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class TrainingDivergedError : public Error {
 public:
  TrainingDivergedError(const std::string& what, std::size_t step)
      : Error(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace lprune
