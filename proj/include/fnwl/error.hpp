// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace fnwl {

/// Base of every error thrown by the library. `kind()` is a stable short tag
/// used by the command-line tool to choose an exit code.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

/// Tensor shapes do not line up.
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what) : Error("dimension", what) {}
};

/// A class label is outside 0..K-1.
class LabelError : public Error {
 public:
  explicit LabelError(const std::string& what) : Error("label", what) {}
};

/// Invalid filter-design request.
class DesignError : public Error {
 public:
  explicit DesignError(const std::string& what) : Error("design", what) {}
};

/// A series or sequence is too short for the requested operation.
class LengthError : public Error {
 public:
  explicit LengthError(const std::string& what) : Error("length", what) {}
};

/// Invalid model, training or classifier configuration.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config", what) {}
};

/// NaN/Inf encountered during evaluation or training.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error("numeric", what) {}
};

/// A cached forward state does not belong to the backward call using it.
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error("contract", what) {}
};

/// Binary file is malformed. `offset()` is the byte position of the problem.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error("format", what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

/// Text input (CSV, JSON) does not parse.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("parse", "line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Metric requested on input where it is undefined.
class MetricError : public Error {
 public:
  explicit MetricError(const std::string& what) : Error("metric", what) {}
};

/// Text input parses but violates the schema (e.g. irregular sampling).
class SchemaError : public Error {
 public:
  explicit SchemaError(const std::string& what) : Error("schema", what) {}
};

/// Out-of-range algorithm parameter (k > N, frequency above Nyquist, ...).
class ParameterError : public Error {
 public:
  explicit ParameterError(const std::string& what) : Error("parameter", what) {}
};

/// A classifier cannot be fitted to the given training set.
class FitError : public Error {
 public:
  explicit FitError(const std::string& what) : Error("fit", what) {}
};

/// A dataset cannot be split as requested.
class SplitError : public Error {
 public:
  explicit SplitError(const std::string& what) : Error("split", what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error("io", what) {}
};

}  // namespace fnwl
