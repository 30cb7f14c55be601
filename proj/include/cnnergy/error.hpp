/* Copyright 2026 The cnnergy Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cnnergy {

enum class Errc {
  // arch
  NonPositiveOutput,
  GroupMismatch,
  ShapeConflict,
  UnknownNetwork,
  SyntaxError,
  SemanticError,
  // costmodel
  ShapeMismatch,
  UndefinedRatio,
  // powertrace
  FormatError,
  NonMonotoneTime,
  ChannelCountMismatch,
  EmptyRegion,
  InsufficientSamples,
  // energymodel
  InsufficientData,
  MismatchedRecords,
  KeyMismatch,
  // multigpu
  IndivisibleBatch,
  MissingDevice,
  // tuner
  NoDataForConfig,
  NothingFeasible,
  // generic
  InvalidArgument,
  IoError,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::NonPositiveOutput: return "NonPositiveOutput";
    case Errc::GroupMismatch: return "GroupMismatch";
    case Errc::ShapeConflict: return "ShapeConflict";
    case Errc::UnknownNetwork: return "UnknownNetwork";
    case Errc::SyntaxError: return "SyntaxError";
    case Errc::SemanticError: return "SemanticError";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::UndefinedRatio: return "UndefinedRatio";
    case Errc::FormatError: return "FormatError";
    case Errc::NonMonotoneTime: return "NonMonotoneTime";
    case Errc::ChannelCountMismatch: return "ChannelCountMismatch";
    case Errc::EmptyRegion: return "EmptyRegion";
    case Errc::InsufficientSamples: return "InsufficientSamples";
    case Errc::InsufficientData: return "InsufficientData";
    case Errc::MismatchedRecords: return "MismatchedRecords";
    case Errc::KeyMismatch: return "KeyMismatch";
    case Errc::IndivisibleBatch: return "IndivisibleBatch";
    case Errc::MissingDevice: return "MissingDevice";
    case Errc::NoDataForConfig: return "NoDataForConfig";
    case Errc::NothingFeasible: return "NothingFeasible";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

/// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  [[nodiscard]] Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace cnnergy
