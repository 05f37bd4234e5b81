// Copyright 2026 The maploc Authors. All Rights Reserved.
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

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace maploc {

enum class Errc {
  // tensor files
  Io,
  BadMagic,
  UnsupportedVersion,
  UnknownDtype,
  TruncatedHeader,
  TruncatedPayload,
  TrailingData,
  InvalidShape,
  ElementCountOverflow,
  DtypeMismatch,
  // bundles
  MissingManifest,
  InvalidManifest,
  MissingFile,
  GroupSizeOutOfRange,
  // shapes and arguments
  DimensionMismatch,
  ShapeMismatch,
  LengthMismatch,
  InvalidArgument,
  InvalidConfig,
  // geometry and alignment
  NonOrthonormal,
  DegenerateTranslation,
  DegenerateConfiguration,
  DisconnectedGraph,
  // nn index
  EmptyInput,
  NonFiniteCoordinate,
  // metrics and curation
  NoValidPixels,
  EmptyCloud,
  InsufficientFrames,
  NoFeasibleGroup,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::Io: return "Io";
    case Errc::BadMagic: return "BadMagic";
    case Errc::UnsupportedVersion: return "UnsupportedVersion";
    case Errc::UnknownDtype: return "UnknownDtype";
    case Errc::TruncatedHeader: return "TruncatedHeader";
    case Errc::TruncatedPayload: return "TruncatedPayload";
    case Errc::TrailingData: return "TrailingData";
    case Errc::InvalidShape: return "InvalidShape";
    case Errc::ElementCountOverflow: return "ElementCountOverflow";
    case Errc::DtypeMismatch: return "DtypeMismatch";
    case Errc::MissingManifest: return "MissingManifest";
    case Errc::InvalidManifest: return "InvalidManifest";
    case Errc::MissingFile: return "MissingFile";
    case Errc::GroupSizeOutOfRange: return "GroupSizeOutOfRange";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::NonOrthonormal: return "NonOrthonormal";
    case Errc::DegenerateTranslation: return "DegenerateTranslation";
    case Errc::DegenerateConfiguration: return "DegenerateConfiguration";
    case Errc::DisconnectedGraph: return "DisconnectedGraph";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::NonFiniteCoordinate: return "NonFiniteCoordinate";
    case Errc::NoValidPixels: return "NoValidPixels";
    case Errc::EmptyCloud: return "EmptyCloud";
    case Errc::InsufficientFrames: return "InsufficientFrames";
    case Errc::NoFeasibleGroup: return "NoFeasibleGroup";
  }
  return "Unknown";
}

/// Exception carrying a machine-readable condition code. `details` holds
/// per-item context where one error aggregates several (e.g. every missing
/// file of a bundle).
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message,
        std::vector<std::string> details = {})
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        message_(message),
        details_(std::move(details)) {}

  Errc code() const noexcept { return code_; }
  const std::string& message() const noexcept { return message_; }
  const std::vector<std::string>& details() const noexcept { return details_; }

 private:
  Errc code_;
  std::string message_;
  std::vector<std::string> details_;
};

}  // namespace maploc
