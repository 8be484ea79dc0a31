// Copyright 2026 The urnlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace urnlab {

/// Bad input: configuration, parameters, or file contents. Carries the
/// 1-based data row when the problem is tied to one.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what)
      : std::invalid_argument(what) {}
  ValidationError(const std::string& what, std::int64_t row)
      : std::invalid_argument("row " + std::to_string(row) + ": " + what),
        row_(row) {}

  std::optional<std::int64_t> row() const noexcept { return row_; }

 private:
  std::optional<std::int64_t> row_;
};

/// A computation that could not produce a trustworthy number.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace urnlab
