// Copyright 2026 The ifcmoe Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef IFCMOE_ERROR_H_
#define IFCMOE_ERROR_H_

#include <stdexcept>
#include <string>

namespace ifcmoe {

// Base of every error the library raises. The CLI maps the concrete
// subclasses onto distinct exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or precondition on caller-supplied parameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or empty data (empty text, empty split, bad file contents).
class DataError : public Error {
 public:
  using Error::Error;
};

// A request would consult a domain outside the caller's access policy.
class PolicyViolation : public Error {
 public:
  using Error::Error;
};

// An on-disk artifact was built from a different corpus than the one
// it is being used with.
class StaleArtifact : public Error {
 public:
  using Error::Error;
};

}  // namespace ifcmoe

#endif  // IFCMOE_ERROR_H_
