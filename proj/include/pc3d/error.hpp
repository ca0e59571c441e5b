// SPDX-FileCopyrightText: 2026 pc3d contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pc3d {

enum class ErrorCode {
  EmptyCloud,
  NonFinitePoint,
  IntensityMismatch,
  DegenerateBox,
  InvalidSensor,
  PointOutOfRange,
  MalformedHeader,
  UnsupportedField,
  CountMismatch,
  InvalidFrame,
  BadMagic,
  CrcMismatch,
  TruncatedFrame,
  CorruptPayload,
  WrongCodec,
  SensorMismatch,
  InvalidConfig,
  NonPositiveVoxelSize,
  GridTooLarge,
  DegenerateReference,
  TooFewPoints,
  ZeroPoints,
  EmptyList,
  TooFewSettings,
  LosslessInCurve,
  EmptyCurve,
  BindFailure,
  ConnectFailure,
  HandshakeFailure,
  IoFailure,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::NonFinitePoint: return "NonFinitePoint";
    case ErrorCode::IntensityMismatch: return "IntensityMismatch";
    case ErrorCode::DegenerateBox: return "DegenerateBox";
    case ErrorCode::InvalidSensor: return "InvalidSensor";
    case ErrorCode::PointOutOfRange: return "PointOutOfRange";
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::UnsupportedField: return "UnsupportedField";
    case ErrorCode::CountMismatch: return "CountMismatch";
    case ErrorCode::InvalidFrame: return "InvalidFrame";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::CrcMismatch: return "CrcMismatch";
    case ErrorCode::TruncatedFrame: return "TruncatedFrame";
    case ErrorCode::CorruptPayload: return "CorruptPayload";
    case ErrorCode::WrongCodec: return "WrongCodec";
    case ErrorCode::SensorMismatch: return "SensorMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::NonPositiveVoxelSize: return "NonPositiveVoxelSize";
    case ErrorCode::GridTooLarge: return "GridTooLarge";
    case ErrorCode::DegenerateReference: return "DegenerateReference";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::ZeroPoints: return "ZeroPoints";
    case ErrorCode::EmptyList: return "EmptyList";
    case ErrorCode::TooFewSettings: return "TooFewSettings";
    case ErrorCode::LosslessInCurve: return "LosslessInCurve";
    case ErrorCode::EmptyCurve: return "EmptyCurve";
    case ErrorCode::BindFailure: return "BindFailure";
    case ErrorCode::ConnectFailure: return "ConnectFailure";
    case ErrorCode::HandshakeFailure: return "HandshakeFailure";
    case ErrorCode::IoFailure: return "IoFailure";
  }
  return "Unknown";
}

/// Every failure raised by the toolkit. `code()` identifies the failure class;
/// the message carries the detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace pc3d
