/* Copyright 2026 The oosguard Authors. All Rights Reserved.

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

#ifndef OOSGUARD_ERROR_H_
#define OOSGUARD_ERROR_H_

#include <cstdint>
#include <stdexcept>
#include <string>

namespace oosguard {

// Class index of an in-scope intent. Out-of-scope examples carry kOosLabel.
using ClassIndex = std::int32_t;
inline constexpr ClassIndex kOosLabel = -1;

// Errors are grouped by the process exit code the CLI maps them to.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

// Invalid configuration, flags or hyperparameters (exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

// Malformed or inconsistent input data (exit code 3).
class DataError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

// Unsupported artifact or file-format version.
class VersionError : public DataError {
 public:
  using DataError::DataError;
};

// Non-finite values, failed factorizations (exit code 4).
class NumericError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

}  // namespace oosguard

#endif  // OOSGUARD_ERROR_H_
