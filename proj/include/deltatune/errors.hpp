/*
 * Copyright 2026 The deltatune Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef DELTATUNE_ERRORS_HPP_
#define DELTATUNE_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace deltatune {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed argument: dimension mismatch, out-of-bounds vector, bad pairing.
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

class UndefinedGainError : public Error {
 public:
  using Error::Error;
};

// Control group mean too close to zero for a ratio statistic.
class DegenerateBaseError : public Error {
 public:
  using Error::Error;
};

class NoDataError : public Error {
 public:
  using Error::Error;
};

// A (candidate, metric, round) key was absorbed twice.
class ConflictError : public Error {
 public:
  using Error::Error;
};

// Kernel matrix stayed singular after the full jitter ladder.
class FitFailureError : public Error {
 public:
  using Error::Error;
};

class ColdStartError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class RestoreError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace deltatune

#endif  // DELTATUNE_ERRORS_HPP_
