/* Copyright 2026 The AFDM Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <stdexcept>
#include <string>

namespace afdm {

// Root of every error thrown by the library. The CLI maps the subclasses
// onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes that cannot be combined by an operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Argument outside a function's mathematical domain (e.g. log of x <= 0).
class DomainError : public Error {
 public:
  using Error::Error;
};

class SingularMatrixError : public Error {
 public:
  using Error::Error;
};

// Violated calling contract (non-scalar loss, missing gradient, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration or model setup.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Symbol outside the configured alphabet.
class LabelError : public Error {
 public:
  using Error::Error;
};

// CTC target that no alignment of the given length can produce.
class InfeasibleTargetError : public Error {
 public:
  using Error::Error;
};

// Missing, unreadable or malformed input data.
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite values encountered during training or evaluation.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace afdm
