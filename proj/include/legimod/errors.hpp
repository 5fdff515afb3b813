// Copyright 2026 The Legimod Authors
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

#ifndef LEGIMOD_ERRORS_HPP_
#define LEGIMOD_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace legimod {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside its mathematical domain (u outside [0,1], sigma <= 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class DegenerateGeometryError : public Error {
 public:
  using Error::Error;
};

class InsufficientLengthError : public Error {
 public:
  using Error::Error;
};

class CohortTooSmallError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss during training or non-finite iterate during sampling.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

class InfeasibleDemoError : public Error {
 public:
  using Error::Error;
};

// API misuse, e.g. stepping an episode that already terminated.
class UsageError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

namespace detail {

template <typename E = DomainError>
inline void require(bool condition, const std::string& message) {
  if (!condition) throw E(message);
}

}  // namespace detail
}  // namespace legimod

#endif  // LEGIMOD_ERRORS_HPP_
