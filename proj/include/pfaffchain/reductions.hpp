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

// Hydrodynamic reductions u = u(R^1, ..., R^N) of the chain: the tangent
// recursion for d_i u, the eigen relation, and the Gibbons-Tsarev system
// with an exact involutivity check.

#pragma once

#include <nlohmann/json.hpp>

#include <map>
#include <random>
#include <vector>

#include "pfaffchain/errors.hpp"
#include "pfaffchain/integrability.hpp"
#include "pfaffchain/rational.hpp"

namespace pfc {

// Forward-mode value + one directional derivative.
template <typename T>
struct Dual {
  T v{}, d{};
  Dual() = default;
  Dual(const T& value) : v(value), d(0) {}  // constants promote implicitly
  Dual(const T& value, const T& deriv) : v(value), d(deriv) {}
  static Dual constant(const T& x) { return {x, T(0)}; }
  friend Dual operator+(const Dual& a, const Dual& b) { return {a.v + b.v, a.d + b.d}; }
  friend Dual operator-(const Dual& a, const Dual& b) { return {a.v - b.v, a.d - b.d}; }
  friend Dual operator-(const Dual& a) { return {-a.v, -a.d}; }
  friend Dual operator*(const Dual& a, const Dual& b) { return {a.v * b.v, a.v * b.d + a.d * b.v}; }
  friend Dual operator/(const Dual& a, const Dual& b) {
    if (b.v == 0) throw NumericalError("division by zero in dual arithmetic");
    return {a.v / b.v, (a.d * b.v - a.v * b.d) / (b.v * b.v)};
  }
  friend Dual operator*(const T& s, const Dual& a) { return {s * a.v, s * a.d}; }
};

struct ReductionJet {
  int N = 0;
  std::vector<Rational> lambda, du0, du1;
  Rational u0, u1;
  RationalPoint u_window;  // u^k, consistent with u0, u1

  static ReductionJet random(int N, int W, std::mt19937_64& rng) {
    if (N < 1 || W < 1) throw InputError("jet needs N >= 1 and window >= 1");
    ReductionJet j;
    j.N = N;
    j.u_window = RationalPoint::random(W, rng);
    j.u0 = j.u_window(0);
    j.u1 = j.u_window(1);
    while (static_cast<int>(j.lambda.size()) < N) {
      Rational l = random_rational(rng);
      if (std::find(j.lambda.begin(), j.lambda.end(), l) == j.lambda.end()) j.lambda.push_back(l);
    }
    for (int i = 0; i < N; ++i) {
      j.du0.push_back(random_rational(rng));
      j.du1.push_back(random_rational(rng));
    }
    return j;
  }
};

namespace detail {

inline void check_jet(const ReductionJet& J, int i) {
  if (i < 0 || i >= J.N) throw InputError(cat("reduction index ", i, " outside [0, ", J.N, ")"));
  if (static_cast<int>(J.lambda.size()) != J.N || static_cast<int>(J.du0.size()) != J.N ||
      static_cast<int>(J.du1.size()) != J.N)
    throw InputError("jet arrays must have length N");
  if (J.u_window.window < 1 || J.u_window(0) != J.u0 || J.u_window(1) != J.u1)
    throw InputError("jet u_window disagrees with u0, u1");
  if (J.u0 == 0) throw NumericalError("u0 = 0: the tangent recursion is singular");
}

}  // namespace detail

// d_i u^k for |k| <= K from d_i u^0, d_i u^1. Row r >= 1 of the eigen
// relation is solved for column r + 1, row r <= 0 for column r - 1; in both
// cases the pivot entry is u^0.
inline std::map<int, Rational> tangent_recursion(const ReductionJet& J, int i, int K) {
  detail::check_jet(J, i);
  if (K < 1) throw InputError("tangent recursion needs K >= 1");
  if (J.u_window.window < K + 1)
    throw InputError(detail::cat("jet window ", J.u_window.window, " too small for K = ", K, " (need ", K + 1, ")"));
  const auto spec = pfaff_chain_spec();
  const Rational& lam = J.lambda[i];
  std::map<int, Rational> d{{0, J.du0[i]}, {1, J.du1[i]}};
  auto solve = [&](int r, int c) {
    const SparseRow row = spec.row(r, J.u_window);
    Rational acc = lam * d.at(r);
    for (const auto& [j, a] : row)
      if (j != c) acc -= a * d.at(j);
    d[c] = acc / row.at(c);
  };
  for (int r = 1; r <= K - 1; ++r) solve(r, r + 1);
  for (int r = 0; r >= -(K - 1); --r) solve(r, r - 1);
  return d;
}

// max over |k| <= K-1 of |lambda d_k - (A d)_k| for a given vector d.
inline Rational eigen_residual_of(const ReductionJet& J, int i, const std::map<int, Rational>& d, int K) {
  detail::check_jet(J, i);
  const auto spec = pfaff_chain_spec();
  auto at = [&](int k) {
    auto it = d.find(k);
    return it == d.end() ? Rational(0) : it->second;
  };
  Rational worst = 0;
  for (int k = -(K - 1); k <= K - 1; ++k) {
    Rational r = J.lambda[i] * at(k);
    for (const auto& [j, a] : spec.row(k, J.u_window)) r -= a * at(j);
    if (abs(r) > worst) worst = abs(r);
  }
  return worst;
}

inline Rational eigen_residual(const ReductionJet& J, int i, int K) {
  return eigen_residual_of(J, i, tangent_recursion(J, i, K), K);
}

// The closed forms for k = -2, -1, 2, 3.
inline std::map<int, Rational> printed_reduction(const ReductionJet& J, int i) {
  detail::check_jet(J, i);
  const auto& u = J.u_window;
  const Rational l = J.lambda[i], u0 = u(0), u1 = u(1), u2 = u(2), u3 = u(3), um1 = u(-1), um2 = u(-2);
  const Rational a = J.du0[i], b = J.du1[i];
  const Rational w = u1 * u1 - 2 * u2;
  std::map<int, Rational> d;
  d[-2] = (l * l - u0 * u1 * l - u0 * (2 * u0 + um2 + um1 * u1)) / (u0 * u0) * a - (l + um1) * b;
  d[-1] = (l / u0 - u1) * a - u0 * b;
  d[2] = w / u0 * a + (l + u0 * u1) / u0 * b;
  d[3] = (w * l + u0 * (u1 * (1 + u2) - 3 * u3)) / (u0 * u0) * a + (l * l + u0 * u1 * l + u0 * u0 * (u2 - 1)) / (u0 * u0) * b;
  return d;
}

// ---------------------------------------------------------------------------
// Gibbons-Tsarev system

struct GtRhs {
  Rational dlam_ij, dlam_ji, d2u0_ij, d2u1_ij;
};

namespace detail {

// Closures on the jet coordinates (lambda, u0, d u0, d u1), generic in the
// scalar so the same code evaluates values and directional derivatives.
// `c` is the coefficient of (u0)^2 in the speed equation (4 for the chain).
template <typename S>
struct GtClosure {
  const std::vector<S>& lam;
  const S& u0;
  const std::vector<S>& a;  // d_m u0
  const std::vector<S>& b;  // d_m u1
  Rational c;

  S dlam(int i, int j) const {  // d_j lambda^i
    return (S(c) * u0 * u0 - lam[i] * lam[j]) / (u0 * (lam[i] - lam[j])) * a[j];
  }
  S d2u0(int i, int j) const {
    const S dl = lam[i] - lam[j];
    return (lam[i] * lam[i] + lam[j] * lam[j] - S(Rational(8)) * u0 * u0) / (u0 * dl * dl) * a[i] * a[j];
  }
  S d2u1(int i, int j) const {
    const S dl = lam[i] - lam[j], q = u0 * dl * dl;
    return -(((lam[j] - S(Rational(2)) * lam[i]) * lam[j] + S(Rational(4)) * u0 * u0) / q) * a[i] * b[j] -
           (((lam[i] - S(Rational(2)) * lam[j]) * lam[i] + S(Rational(4)) * u0 * u0) / q) * a[j] * b[i];
  }
};

inline void check_distinct(const ReductionJet& J) {
  for (int i = 0; i < J.N; ++i)
    for (int j = i + 1; j < J.N; ++j)
      if (J.lambda[i] == J.lambda[j])
        throw NumericalError(cat("coincident characteristic speeds lambda^", i, " = lambda^", j));
}

}  // namespace detail

inline GtRhs gt_rhs(const ReductionJet& J, int i, int j, const Rational& coefficient = 4) {
  detail::check_jet(J, i);
  detail::check_jet(J, j);
  if (i == j) throw InputError("gt_rhs needs distinct indices");
  if (J.lambda[i] == J.lambda[j]) throw NumericalError("coincident characteristic speeds");
  const detail::GtClosure<Rational> g{J.lambda, J.u0, J.du0, J.du1, coefficient};
  return {g.dlam(i, j), g.dlam(j, i), g.d2u0(i, j), g.d2u1(i, j)};
}

struct GtResidual {
  int i, j, k;
  Rational lam, u0, u1;  // the three symmetrisation defects
};

struct GtInvolutivity {
  std::vector<GtResidual> residuals;
  Rational max_abs;
};

namespace detail {

// D_k of every jet coordinate, taken from the closures; the coordinates
// carrying index k itself never enter the differentiated expressions.
inline std::vector<Dual<Rational>> seeded(const std::vector<Rational>& x, const std::vector<Rational>& dx) {
  std::vector<Dual<Rational>> r;
  for (size_t m = 0; m < x.size(); ++m) r.emplace_back(x[m], dx[m]);
  return r;
}

}  // namespace detail

// For each permutation (i, j, k) of (0, 1, 2):
//   D_k d_j lambda^i - D_j d_k lambda^i,
//   D_k (d_i d_j u0) - D_i (d_k d_j u0),
//   D_k (d_i d_j u1) - D_i (d_k d_j u1),
// with D_k the total derivative along R^k closed by the system itself.
inline GtInvolutivity gt_involutivity(const ReductionJet& J, const Rational& coefficient = 4) {
  if (J.N != 3) throw InputError("gt_involutivity needs N = 3");
  detail::check_jet(J, 0);
  detail::check_distinct(J);
  const detail::GtClosure<Rational> g{J.lambda, J.u0, J.du0, J.du1, coefficient};

  auto direction = [&](int k) {
    std::vector<Rational> dl(3, Rational(0)), da(3, Rational(0)), db(3, Rational(0));
    for (int m = 0; m < 3; ++m)
      if (m != k) {
        dl[m] = g.dlam(m, k);
        da[m] = g.d2u0(m, k);
        db[m] = g.d2u1(m, k);
      }
    const auto lam = detail::seeded(J.lambda, dl), a = detail::seeded(J.du0, da), b = detail::seeded(J.du1, db);
    const Dual<Rational> u0(J.u0, J.du0[k]);
    return std::make_tuple(lam, u0, a, b);
  };

  GtInvolutivity out;
  out.max_abs = 0;
  const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (const auto& p : perms) {
    const int i = p[0], j = p[1], k = p[2];
    auto [lk, uk, ak, bk] = direction(k);
    auto [lj, uj, aj, bj] = direction(j);
    auto [li, ui, ai, bi] = direction(i);
    const detail::GtClosure<Dual<Rational>> Gk{lk, uk, ak, bk, coefficient}, Gj{lj, uj, aj, bj, coefficient},
        Gi{li, ui, ai, bi, coefficient};
    GtResidual r{i, j, k, Gk.dlam(i, j).d - Gj.dlam(i, k).d, Gk.d2u0(i, j).d - Gi.d2u0(k, j).d,
                 Gk.d2u1(i, j).d - Gi.d2u1(k, j).d};
    for (const Rational* x : {&r.lam, &r.u0, &r.u1})
      if (abs(*x) > out.max_abs) out.max_abs = abs(*x);
    out.residuals.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Batch over random N = 3 jets

struct GtBatch {
  int jets = 0;
  int depth = 0;
  Rational coefficient = 4;
  Rational max_involutivity, max_eigen;
  int printed_mismatches = 0;
};

inline GtBatch gt_batch(int jets, std::uint64_t seed, int K, const Rational& coefficient = 4) {
  if (jets < 1) throw InputError("gt batch needs at least one jet");
  if (K < 3) throw InputError("gt batch needs K >= 3 (the closed forms reach k = 3)");
  GtBatch b;
  b.jets = jets;
  b.depth = K;
  b.coefficient = coefficient;
  b.max_involutivity = 0;
  b.max_eigen = 0;
  std::mt19937_64 rng(seed);
  for (int t = 0; t < jets; ++t) {
    const auto J = ReductionJet::random(3, K + 1, rng);
    const Rational r = gt_involutivity(J, coefficient).max_abs;
    if (r > b.max_involutivity) b.max_involutivity = r;
    for (int i = 0; i < 3; ++i) {
      const auto d = tangent_recursion(J, i, K);
      const Rational e = eigen_residual_of(J, i, d, K);
      if (e > b.max_eigen) b.max_eigen = e;
      for (const auto& [k, v] : printed_reduction(J, i)) b.printed_mismatches += d.at(k) != v;
    }
  }
  return b;
}

inline nlohmann::ordered_json gt_batch_to_json(const GtBatch& b) {
  nlohmann::ordered_json j;
  j["jets"] = b.jets;
  j["depth"] = b.depth;
  j["coefficient"] = to_string(b.coefficient);
  j["max_involutivity_residual"] = to_string(b.max_involutivity);
  j["eigen_residual"] = to_string(b.max_eigen);
  j["printed_reduction_mismatches"] = b.printed_mismatches;
  return j;
}

}  // namespace pfc
