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

// Exact rationals (GMP) and the scalar helpers shared by the templated code.

#pragma once

#include <gmpxx.h>

#include <cmath>
#include <random>
#include <string>

#include "pfaffchain/errors.hpp"

namespace pfc {

// Canonical (den > 0, reduced) after every arithmetic operation.
using Rational = mpq_class;

inline double to_double(double x) { return x; }
inline double to_double(const Rational& x) { return x.get_d(); }

inline std::string to_string(const Rational& x) { return x.get_str(); }

inline Rational parse_rational(const std::string& s) {
  Rational r;
  if (r.set_str(s, 10) != 0) throw InputError(detail::cat("not a rational number: '", s, "'"));
  if (r.get_den() == 0) throw InputError(detail::cat("zero denominator in '", s, "'"));
  r.canonicalize();
  return r;
}

// Numerator uniform in [-num_max, num_max], denominator uniform in [1, den_max].
inline Rational random_rational(std::mt19937_64& rng, int num_max = 9, int den_max = 7) {
  std::uniform_int_distribution<int> n(-num_max, num_max), d(1, den_max);
  Rational r(n(rng), d(rng));
  r.canonicalize();
  return r;
}

inline Rational random_nonzero_rational(std::mt19937_64& rng, int num_max = 9, int den_max = 7) {
  for (;;) {
    Rational r = random_rational(rng, num_max, den_max);
    if (r != 0) return r;
  }
}

// Scalar conversions used by templates instantiated with double or Rational.
template <typename T>
T scalar_from_ratio(long num, long den) {
  if constexpr (std::is_same_v<T, Rational>) {
    Rational r(num, den);
    r.canonicalize();
    return r;
  } else {
    return static_cast<T>(num) / static_cast<T>(den);
  }
}

inline double abs_value(double x) { return std::abs(x); }
inline double abs_value(const Rational& x) { return std::abs(x.get_d()); }

}  // namespace pfc
