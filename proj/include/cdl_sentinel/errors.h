/*
 * Copyright 2026 The CDL Sentinel Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef CDL_SENTINEL_ERRORS_H_
#define CDL_SENTINEL_ERRORS_H_

#include <stdexcept>
#include <string>

namespace cdl_sentinel {

// Tensor or layer dimensions disagree.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Caller-supplied data is unusable (e.g. non-finite input).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A documented precondition was violated.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Arithmetic produced a non-finite value; the operation was not applied.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Scenario or server configuration is invalid. `field()` names the culprit.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message),
        field_(std::move(field)),
        message_(message) {}
  const std::string& field() const { return field_; }
  const std::string& message() const { return message_; }

 private:
  std::string field_;
  std::string message_;
};

// The protocol refused a request.
class DeniedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An internal invariant broke during a run. Runs abort on this.
class InvariantError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cdl_sentinel

#endif  // CDL_SENTINEL_ERRORS_H_
