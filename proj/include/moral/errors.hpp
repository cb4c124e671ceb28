// Copyright 2026 The MoralBench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace moral {

// Dimension mismatch between operands.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A value outside the accepted domain of an operation.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Zero-norm vector where a direction is required.
class DegenerateVectorError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Operation called in the wrong lifecycle state (e.g. backward before forward).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed model input such as an out-of-vocabulary token.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Unparseable payload from an external service. Keeps the raw text.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::string raw)
      : std::runtime_error(what), raw_(std::move(raw)) {}
  const std::string& raw_payload() const noexcept { return raw_; }

 private:
  std::string raw_;
};

// Parseable payload that fails a content rule (e.g. an empty question).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Transport-level failure talking to a remote service. Retryable.
class ClientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace moral
