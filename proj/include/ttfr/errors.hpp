// Copyright 2026 The ttfr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace ttfr {

// Root of every error raised by the library. The CLI maps these to exit
// code 1; usage errors never reach this hierarchy.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not agree (matmul, padding, layer norm lengths).
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A numeric parameter is outside its domain (negative std, bad lr, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Caller-supplied data violates a precondition (token ids, lengths, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

// A GrowthPlan is inconsistent with itself or with the source model.
class PlanError : public Error {
 public:
  using Error::Error;
};

// The requested operation is not implemented for this configuration.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

enum class FormatErrorKind {
  kBadMagic,
  kBadVersion,
  kBadHeader,
  kMisaligned,
  kOverlappingOffsets,
  kPayloadOutOfBounds,
  kShapeMismatch,
  kNonFinite,
  kUnknownTensor,
  kMissingTensor,
  kDuplicateTensor,
};

// Checkpoint container violations. kind() distinguishes them for callers
// that need to react differently (tests do).
class FormatError : public Error {
 public:
  FormatError(FormatErrorKind kind, const std::string& what)
      : Error(what), kind_(kind) {}
  FormatErrorKind kind() const { return kind_; }

 private:
  FormatErrorKind kind_;
};

}  // namespace ttfr
