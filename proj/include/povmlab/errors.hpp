// Copyright 2026 The povmlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef POVMLAB_ERRORS_HPP
#define POVMLAB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace povmlab {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition violations: bad sizes, mismatched spaces, out-of-range indices.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Physical guards. The CLI maps every subclass to exit code 3.
class GuardError : public Error {
 public:
  using Error::Error;
};

/// Probability mass reached the edge of a periodic grid.
class LocalizationError : public GuardError {
 public:
  using GuardError::GuardError;
};

/// Eigenvalue spacing too small for a calibrated pointer.
class CalibrationError : public GuardError {
 public:
  using GuardError::GuardError;
};

/// Conditioning on an outcome of (numerically) zero probability.
class ConditioningError : public GuardError {
 public:
  using GuardError::GuardError;
};

/// A partition leaves part of the value range unassigned.
class CoverageError : public GuardError {
 public:
  using GuardError::GuardError;
};

/// A displacement or lattice is not commensurate with the grid.
class AlignmentError : public GuardError {
 public:
  using GuardError::GuardError;
};

/// Dense or brute-force paths that would exceed their size budget.
class SizeGuardError : public GuardError {
 public:
  using GuardError::GuardError;
};

/// Configuration errors. `field()` is a JSON-pointer style path.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& message)
      : Error(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace povmlab

#endif  // POVMLAB_ERRORS_HPP
