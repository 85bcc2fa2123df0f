// Copyright 2026 The mtevc Authors
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

#pragma once

#include <stdexcept>
#include <string>

namespace mtevc {

// Base class for all toolkit errors. The CLI maps subclasses to exit codes:
// usage -> 1, data -> 2, numerical divergence -> 3.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class InvalidInput : public Error {
public:
  using Error::Error;
};

class ShapeError : public Error {
public:
  using Error::Error;
};

class UnknownCodeError : public Error {
public:
  using Error::Error;
};

class StateError : public Error {
public:
  using Error::Error;
};

class AlignmentError : public Error {
public:
  using Error::Error;
};

class TrainingDiverged : public Error {
public:
  using Error::Error;
};

class SingularityError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

class DataError : public Error {
public:
  using Error::Error;
};

class UsageError : public Error {
public:
  using Error::Error;
};

class CompatibilityError : public Error {
public:
  using Error::Error;
};

}  // namespace mtevc
