/*
 * Copyright 2026 The cfhrm Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
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

namespace cfhrm {

// Every failure raised by the library derives from Error. The CLI maps the
// families below onto its exit codes (usage = 1, data = 2, numeric = 3).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes passed to an operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid model or training configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Calling an API in a way its contract forbids (e.g. backward on a non-scalar).
class UsageError : public Error {
 public:
  using Error::Error;
};

// Token ids, prompts or sequence lengths outside what the model accepts.
class InputError : public Error {
 public:
  using Error::Error;
};

// Index outside a valid range (e.g. a target id >= vocab size).
class IndexError : public InputError {
 public:
  using InputError::InputError;
};

// Corpus, telemetry or report content that cannot be used.
class DataError : public Error {
 public:
  using Error::Error;
};

// File system failures.
class FileError : public DataError {
 public:
  using DataError::DataError;
};

// NaN/Inf encountered where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace cfhrm
