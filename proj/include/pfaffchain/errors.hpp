// Copyright 2026 The pfaffchain Authors
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

#include <sstream>
#include <stdexcept>
#include <string>

namespace pfc {

// Bad input or violated precondition. The CLI maps it to exit code 2.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A numerical procedure could not deliver a trustworthy value.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct WeightOverflow : InputError {
  double x;
  WeightOverflow(const std::string& what, double at) : InputError(what), x(at) {}
};

struct QuadratureError : NumericalError {
  double coarse, fine;
  QuadratureError(const std::string& what, double c, double f)
      : NumericalError(what), coarse(c), fine(f) {}
};

namespace detail {

template <typename... Args>
std::string cat(Args&&... args) {
  std::ostringstream oss;
  (oss << ... << args);
  return oss.str();
}

}  // namespace detail

}  // namespace pfc
