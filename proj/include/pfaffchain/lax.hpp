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

// Band form of the Pfaff lattice Lax matrix and its flows.
//
// Sites are 1-based (n = 1..N); matrix indices are 0-based. Band positions:
//   w^0_n     (2n-1, 2n)          1 at (2n-2, 2n-1)
//   w^k_n     (2n+2k-2, 2n-1)     w^-k_n  (2n+2k-3, 2n-2)     k > 0
//   v^0_n     (2n-1, 2n-1), and -v^0_n at (2n, 2n)
//   v^k_n     (2n+2k-1, 2n-1)     v^-k_n  (2n+2k-2, 2n-2)     k > 0

#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cmath>
#include <ostream>
#include <random>
#include <type_traits>
#include <utility>
#include <vector>

#include "pfaffchain/ensemble.hpp"
#include "pfaffchain/errors.hpp"
#include "pfaffchain/rational.hpp"

namespace pfc {

template <typename T>
struct LaxBands {
  int sites = 0;
  int depth = 0;
  bool even_reduced = false;
  bool periodic = false;  // site index wraps mod N instead of reading 0
  std::vector<T> w_data, v_data;

  static LaxBands zeros(int N, int K, bool even = false) {
    if (N < 1 || K < 0) throw InputError(detail::cat("bad band shape N=", N, " K=", K));
    LaxBands b;
    b.sites = N;
    b.depth = K;
    b.even_reduced = even;
    b.w_data.assign(static_cast<size_t>((2 * K + 1) * N), T(0));
    b.v_data.assign(b.w_data.size(), T(0));
    return b;
  }

  // Flat index, or -1 when (k, n) is closed to zero.
  int index(int k, int n) const {
    if (k < -depth || k > depth) return -1;
    if (periodic) {
      n = ((n - 1) % sites + sites) % sites + 1;
    } else if (n < 1 || n > sites) {
      return -1;
    }
    return (k + depth) * sites + (n - 1);
  }

  T w(int k, int n) const {
    const int i = index(k, n);
    return i < 0 ? T(0) : w_data[i];
  }
  T v(int k, int n) const {
    const int i = index(k, n);
    return i < 0 ? T(0) : v_data[i];
  }

  T& w_ref(int k, int n) { return w_data[checked(k, n)]; }
  T& v_ref(int k, int n) {
    if (even_reduced) throw InputError("v bands of an even-reduced state are identically zero");
    return v_data[checked(k, n)];
  }

 private:
  int checked(int k, int n) const {
    const int i = index(k, n);
    if (i < 0) throw InputError(detail::cat("band entry (k=", k, ", n=", n, ") outside the window"));
    return i;
  }
};

template <typename T>
LaxBands<T> random_bands(int N, int K, std::mt19937_64& rng, bool even = false) {
  auto b = LaxBands<T>::zeros(N, K, even);
  auto draw = [&]() -> T {
    if constexpr (std::is_same_v<T, double>)
      return to_double(random_rational(rng));
    else
      return random_rational(rng);
  };
  for (auto& x : b.w_data) x = draw();
  if (!even)
    for (auto& x : b.v_data) x = draw();
  return b;
}

// Square dense matrix; sizes here stay below ~64 so plain loops suffice.
template <typename T>
struct Dense {
  int dim = 0;
  std::vector<T> a;

  Dense() = default;
  explicit Dense(int n) : dim(n), a(static_cast<size_t>(n) * n, T(0)) {}

  T& operator()(int i, int j) { return a[static_cast<size_t>(i) * dim + j]; }
  const T& operator()(int i, int j) const { return a[static_cast<size_t>(i) * dim + j]; }

  friend bool operator==(const Dense& x, const Dense& y) { return x.dim == y.dim && x.a == y.a; }

  friend Dense operator+(const Dense& x, const Dense& y) {
    Dense r(x.dim);
    for (size_t i = 0; i < x.a.size(); ++i) r.a[i] = x.a[i] + y.a[i];
    return r;
  }
  friend Dense operator-(const Dense& x, const Dense& y) {
    Dense r(x.dim);
    for (size_t i = 0; i < x.a.size(); ++i) r.a[i] = x.a[i] - y.a[i];
    return r;
  }
  friend Dense operator*(const Dense& x, const Dense& y) {
    Dense r(x.dim);
    const int n = x.dim;
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) {
        const T& xik = x(i, k);
        if (xik == 0) continue;
        for (int j = 0; j < n; ++j)
          if (y(k, j) != 0) r(i, j) += xik * y(k, j);
      }
    return r;
  }
};

inline Eigen::MatrixXd symplectic_j(int M) {
  if (M % 2 != 0) throw InputError(detail::cat("J needs even dimension, got ", M));
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(M, M);
  for (int r = 0; r < M; r += 2) {
    J(r, r + 1) = 1.0;
    J(r + 1, r) = -1.0;
  }
  return J;
}

// J X^T J, elementwise.
template <typename T>
Dense<T> jxtj(const Dense<T>& X) {
  if (X.dim % 2 != 0) throw InputError(detail::cat("odd dimension ", X.dim, " in J X^T J"));
  Dense<T> r(X.dim);
  for (int i = 0; i < X.dim; ++i)
    for (int j = 0; j < X.dim; ++j) {
      const T& x = X(j ^ 1, i ^ 1);
      if (x == 0) continue;
      const bool neg = (i % 2 == 0) != (j % 2 == 1);
      r(i, j) = neg ? T(-x) : x;
    }
  return r;
}

// A_- - J A_+^T J + (A_0 - J A_0^T J) / 2, with A_0 the 2x2 block diagonal.
template <typename T>
Dense<T> project_t(const Dense<T>& A) {
  if (A.dim % 2 != 0) throw InputError(detail::cat("project_t needs even dimension, got ", A.dim));
  const int M = A.dim;
  Dense<T> lo(M), up(M), blk(M);
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < M; ++j) {
      if (i / 2 == j / 2)
        blk(i, j) = A(i, j);
      else if (i > j)
        lo(i, j) = A(i, j);
      else
        up(i, j) = A(i, j);
    }
  const T half = scalar_from_ratio<T>(1, 2);
  Dense<T> b = blk - jxtj(blk);
  for (auto& x : b.a) x *= half;
  return lo - jxtj(up) + b;
}

inline std::pair<int, int> w_position(int k, int n) {
  if (k == 0) return {2 * n - 1, 2 * n};
  if (k > 0) return {2 * n + 2 * k - 2, 2 * n - 1};
  return {2 * n - 2 * k - 3, 2 * n - 2};
}

inline std::pair<int, int> v_position(int k, int n) {
  if (k == 0) return {2 * n - 1, 2 * n - 1};
  if (k > 0) return {2 * n + 2 * k - 1, 2 * n - 1};
  return {2 * n - 2 * k - 2, 2 * n - 2};
}

template <typename T>
Dense<T> assemble_lax(const LaxBands<T>& b, int M) {
  if (M % 2 != 0) throw InputError(detail::cat("Lax dimension must be even, got ", M));
  if (M > 2 * b.sites)
    throw InputError(detail::cat("Lax dimension ", M, " exceeds 2N = ", 2 * b.sites));
  Dense<T> L(M);
  for (int n = 1; 2 * n <= M; ++n) L(2 * n - 2, 2 * n - 1) = T(1);
  for (int n = 1; n <= b.sites; ++n)
    for (int k = -b.depth; k <= b.depth; ++k) {
      const auto [wr, wc] = w_position(k, n);
      if (wr < M && wc < M) L(wr, wc) = b.w(k, n);
      if (b.even_reduced) continue;
      const auto [vr, vc] = v_position(k, n);
      if (vr < M && vc < M) L(vr, vc) = b.v(k, n);
      if (k == 0 && 2 * n < M) L(2 * n, 2 * n) = -b.v(0, n);
    }
  return L;
}

// Reads the band slots of A; slots outside the matrix stay 0.
template <typename T>
LaxBands<T> disassemble_lax(const Dense<T>& A, int N, int K) {
  auto b = LaxBands<T>::zeros(N, K);
  for (int n = 1; n <= N; ++n)
    for (int k = -K; k <= K; ++k) {
      const auto [wr, wc] = w_position(k, n);
      if (wr < A.dim && wc < A.dim) b.w_ref(k, n) = A(wr, wc);
      const auto [vr, vc] = v_position(k, n);
      if (vr < A.dim && vc < A.dim) b.v_ref(k, n) = A(vr, vc);
    }
  return b;
}

template <typename T>
struct CommutatorResult {
  LaxBands<T> d;
  int flow = 0;
  int dim = 0;
  // Site n is interior when the stencil margin k + K clears both matrix ends.
  bool in_interior(int n) const {
    const int margin = flow + d.depth;
    return n - 1 > margin && dim / 2 - n > margin;
  }
};

// [-(L^k)_t, L] read back into bands.
template <typename T>
CommutatorResult<T> lax_rhs_commutator(const LaxBands<T>& b, int k, int M) {
  if (k < 1) throw InputError(detail::cat("commutator flow index must be >= 1, got ", k));
  if (b.periodic) throw InputError("commutator flows need an open (non-periodic) band state");
  if (M < 2 * (k + 2))
    throw InputError(detail::cat("truncation too tight: M = ", M, " < 2(k+2) = ", 2 * (k + 2)));
  CommutatorResult<T> out;
  out.flow = k;
  out.dim = M;
  bool any = false;
  for (int n = 1; n <= b.sites && !any; ++n) {
    out.d.depth = b.depth;
    any = out.in_interior(n);
  }
  if (!any)
    throw InputError(detail::cat("truncation too tight: no interior sites for M = ", M,
                                 ", k = ", k, ", K = ", b.depth));
  const Dense<T> L = assemble_lax(b, M);
  Dense<T> Lk = L;
  for (int i = 1; i < k; ++i) Lk = Lk * L;
  Dense<T> P = project_t(Lk);
  const Dense<T> C = L * P - P * L;  // = [-P, L]
  out.d = disassemble_lax(C, b.sites, b.depth);
  return out;
}

// `printed` is a known-incorrect transcription of the explicit formulas,
// kept so its discrepancies can be measured (README, "Formula variants").
enum class FlowForm { corrected, printed };

namespace detail {

template <typename T>
struct Readers {
  const LaxBands<T>& b;
  T W(int k, int n) const { return b.w(k, n); }
  T V(int k, int n) const { return b.v(k, n); }
  // Negative family w^{-j}, v^{-j}; j = 0 names the slots left of w^0 and the -v^0 diagonal.
  T Wn(int j, int n) const { return j == 0 ? b.w(0, n - 1) : b.w(-j, n); }
  T Vn(int j, int n) const { return j == 0 ? T(-b.v(0, n - 1)) : b.v(-j, n); }
};

template <typename T>
T sq(const T& x) {
  return x * x;
}

template <typename T, typename Fw, typename Fv>
LaxBands<T> fill_derivative(const LaxBands<T>& b, bool even_out, Fw fw, Fv fv) {
  auto d = LaxBands<T>::zeros(b.sites, b.depth, even_out);
  d.periodic = b.periodic;
  for (int n = 1; n <= b.sites; ++n)
    for (int k = -b.depth; k <= b.depth; ++k) {
      d.w_ref(k, n) = fw(k, n);
      if (!even_out) d.v_ref(k, n) = fv(k, n);
    }
  return d;
}

}  // namespace detail

template <typename T>
LaxBands<T> flow_t1_explicit(const LaxBands<T>& b, FlowForm form = FlowForm::corrected) {
  const detail::Readers<T> r{b};
  auto W = [&](int k, int n) { return r.W(k, n); };
  auto V = [&](int k, int n) { return r.V(k, n); };
  const T h = scalar_from_ratio<T>(1, 2);
  auto dv = [&](int k, int n) -> T {
    if (k < -1)
      return h * (V(0, n - 1) + V(0, n) - V(0, n - k - 1) - V(0, n - k)) * V(k, n) + W(k - 1, n) -
             W(0, n) * W(-(k + 1), n + 1) - W(-1, n) * W(-k, n) - W(0, n - 1) * W(-(k - 1), n - 1);
    if (k == -1)
      return h * (V(0, n - 1) - V(0, n + 1)) * V(-1, n) + W(-2, n) - W(0, n) - W(-1, n) * W(1, n) -
             W(0, n - 1) * W(2, n - 1);
    if (k == 0) return W(0, n) * W(1, n);
    if (k == 1)
      return h * (V(0, n + 1) - V(0, n - 1)) * V(1, n) - W(-2, n) + W(0, n) + W(-1, n + 1) * W(1, n) +
             W(0, n + 1) * W(2, n);
    return h * (V(0, n + k) + V(0, n + k - 1) - V(0, n) - V(0, n - 1)) * V(k, n) +
           W(0, n + k - 1) * W(k - 1, n) + W(-1, n + k) * W(k, n) + W(0, n + k) * W(k + 1, n) -
           W(-(k + 1), n);
  };
  auto dw = [&](int k, int n) -> T {
    if (k < -1) {
      // For k = -2 the corrected form reads the -v^0_{n-1} slot here.
      const T lead = form == FlowForm::corrected ? r.Vn(-(k + 2), n) : V(k + 2, n);
      return h * (V(0, n - k - 1) + V(0, n - k - 2) + V(0, n) + V(0, n - 1)) * W(k, n) +
             W(0, n - k - 2) * lead - W(0, n) * V(-(k + 2), n + 1) + W(-1, n - k - 1) * V(k + 1, n) -
             W(-1, n) * V(-(k + 1), n) + W(0, n - k - 1) * V(k, n) - W(0, n - 1) * V(-k, n - 1);
    }
    if (k == -1) return W(0, n) * V(-1, n) - W(0, n - 1) * V(1, n - 1);
    if (k == 0) return h * (V(0, n + 1) - 2 * V(0, n) + V(0, n - 1)) * W(0, n);
    return -h * (V(0, n + k) + V(0, n + k - 1) + V(0, n) + V(0, n - 1)) * W(k, n) + V(k, n) - V(-k, n);
  };
  return detail::fill_derivative<T>(b, false, dw, dv);
}

namespace detail {

template <typename T>
LaxBands<T> flow_t2_corrected(const LaxBands<T>& b) {
  const Readers<T> r{b};
  auto W = [&](int k, int n) { return r.W(k, n); };
  auto V = [&](int k, int n) { return r.V(k, n); };
  auto Wn = [&](int j, int n) { return r.Wn(j, n); };
  auto Vn = [&](int j, int n) { return r.Vn(j, n); };
  const T h = scalar_from_ratio<T>(1, 2);
  auto g = [&](int n) -> T { return W(0, n) * W(1, n); };
  auto dv = [&](int k, int n) -> T {
    if (k < 0)
      return -h * V(k, n) *
                 (sq(V(0, n - k)) - sq(V(0, n - k - 1)) - sq(V(0, n)) + sq(V(0, n - 1)) + g(n - k) -
                  g(n - k - 1) - g(n) + g(n - 1)) +
             W(0, n - k) * Vn(-(k - 1), n) - W(0, n - k - 1) * Vn(-(k + 1), n) +
             W(0, n) * Vn(-(k + 1), n + 1) - W(0, n - 1) * Vn(-(k - 1), n - 1) +
             (V(0, n - k) - V(0, n - k - 1)) * Wn(-(k - 1), n) -
             (V(0, n) - V(0, n - 1)) * W(-1, n) * W(-k, n) -
             (W(0, n) * V(-1, n) + W(0, n - 1) * V(1, n - 1)) * W(-k, n);
    if (k == 0) return W(0, n) * (V(1, n) + V(-1, n));
    return h * V(k, n) *
               (sq(V(0, n + k)) - sq(V(0, n + k - 1)) - sq(V(0, n)) + sq(V(0, n - 1)) + g(n + k) -
                g(n + k - 1) - g(n) + g(n - 1)) +
           W(0, n + k) * V(k + 1, n) - W(0, n + k - 1) * V(k - 1, n) + W(0, n) * V(k - 1, n + 1) -
           W(0, n - 1) * V(k + 1, n - 1) + (V(0, n + k) - V(0, n + k - 1)) * W(-1, n + k) * W(k, n) -
           (V(0, n) - V(0, n - 1)) * W(-(k + 1), n) +
           (W(0, n + k) * V(-1, n + k) + W(0, n + k - 1) * V(1, n + k - 1)) * W(k, n);
  };
  auto dw = [&](int k, int n) -> T {
    if (k < 0)
      return h * W(k, n) *
                 (sq(V(0, n - k - 1)) - sq(V(0, n - k - 2)) + sq(V(0, n)) - sq(V(0, n - 1)) +
                  g(n - k - 1) - g(n - k - 2) + g(n) - g(n - 1)) +
             W(0, n - k - 1) * Wn(-(k - 1), n) - W(0, n - k - 2) * Wn(-(k + 1), n) +
             W(0, n) * Wn(-(k + 1), n + 1) - W(0, n - 1) * Wn(-(k - 1), n - 1) +
             (V(0, n - k - 1) - V(0, n - k - 2)) * W(-1, n - k - 1) * Vn(-(k + 1), n) -
             (V(0, n) - V(0, n - 1)) * W(-1, n) * V(-(k + 1), n) +
             (W(0, n - k - 1) * V(-1, n - k - 1) + W(0, n - k - 2) * V(1, n - k - 2)) *
                 Vn(-(k + 1), n) -
             (W(0, n) * V(-1, n) + W(0, n - 1) * V(1, n - 1)) * V(-(k + 1), n);
    if (k == 0)
      return h * W(0, n) * (sq(V(0, n + 1)) - sq(V(0, n - 1)) + g(n + 1) - g(n - 1)) +
             W(0, n) * (W(-1, n + 1) - W(-1, n));
    if (k == 1)
      return -h * W(1, n) * (sq(V(0, n + 1)) - sq(V(0, n - 1)) + g(n + 1) - g(n - 1)) +
             W(0, n + 1) * W(2, n) - W(0, n - 1) * W(2, n - 1) + (V(0, n + 1) - V(0, n)) * V(1, n) -
             (V(0, n) - V(0, n - 1)) * V(-1, n);
    return -h * W(k, n) *
               (sq(V(0, n + k)) - sq(V(0, n + k - 1)) + sq(V(0, n)) - sq(V(0, n - 1)) + g(n + k) -
                g(n + k - 1) + g(n) - g(n - 1)) +
           W(0, n + k) * W(k + 1, n) - W(0, n + k - 1) * W(k - 1, n) + W(0, n) * W(k - 1, n + 1) -
           W(0, n - 1) * W(k + 1, n - 1) + (V(0, n + k) - V(0, n + k - 1)) * V(k, n) -
           (V(0, n) - V(0, n - 1)) * V(-k, n);
  };
  return fill_derivative<T>(b, false, dw, dv);
}

template <typename T>
LaxBands<T> flow_t2_printed(const LaxBands<T>& b) {
  const Readers<T> r{b};
  auto W = [&](int k, int n) { return r.W(k, n); };
  auto V = [&](int k, int n) { return r.V(k, n); };
  const T h = scalar_from_ratio<T>(1, 2);
  auto g = [&](int n) -> T { return W(0, n) * W(1, n); };
  auto dv = [&](int k, int n) -> T {
    if (k < 0)
      return -h * V(k, n) *
                 (sq(V(0, n - k)) - sq(V(0, n - k - 1)) - sq(V(0, n)) + sq(V(0, n - 1)) + g(n - k) -
                  g(n - k - 1) - g(n) + g(n - 1)) +
             W(0, n - k) * V(k - 1, n) - W(0, n - k - 1) * V(k + 1, n) + W(0, n) * V(k + 1, n + 1) -
             W(0, n - 1) * V(k - 1, n - 1) + (V(0, n - k) - V(0, n - k - 1)) * W(k - 1, n) -
             (V(0, n) - V(0, n - 1)) * W(-1, n) * W(-k, n) -
             (W(0, n) * V(k + 1, n) - W(0, n - 1) * V(-(k + 1), n - 1)) * W(-k, n);
    if (k == 0) return W(0, n) * (V(1, n) + V(-1, n));
    return h * V(k, n) *
               (sq(V(0, n + k)) - sq(V(0, n + k - 1)) + sq(V(0, n)) - sq(V(0, n - 1)) + g(n + k) -
                g(n + k - 1) + g(n) - g(n - 1)) +
           W(0, n + k) * V(k + 1, n) - W(0, n + k - 1) * V(k - 1, n) + W(0, n) * V(k, n + 1) -
           W(0, n - 1) * V(k + 1, n - 1) + (V(0, n + k) - V(0, n + k - 1)) * W(-1, n + k) * W(k, n) -
           (V(0, n) - V(0, n - 1)) * W(-(k + 1), n) +
           (W(0, n + k) * V(-(k - 1), n + k) - W(0, n + k - 1) * V(k - 1, n + k - 1)) * W(k, n);
  };
  auto dw = [&](int k, int n) -> T {
    if (k < 0)
      return h * W(k, n) *
                 (sq(V(0, n - k - 1)) - sq(V(0, n - k - 2)) + sq(V(0, n)) - sq(V(0, n - 1)) +
                  g(n - k - 1) - g(n - k - 2) + g(n) - g(n - 1)) +
             W(0, n - k - 1) * W(k - 1, n) - W(0, n - k - 2) * W(k + 1, n) +
             W(0, n) * W(k + 1, n + 1) - W(0, n - 1) * W(k - 1, n - 1) +
             (V(0, n - k - 1) - V(0, n - k - 2)) * W(-1, n - k - 1) * V(k + 1, n) -
             (V(0, n) - V(0, n - 1)) * W(-1, n) * V(-(k + 1), n) +
             (W(0, n - k - 1) * V(k + 2, n - k - 1) + W(0, n - k - 2) * V(-(k + 2), n - k - 2)) *
                 V(k + 1, n) -
             (W(0, n) * V(k + 2, n) + W(0, n - 1) * V(-(k + 2), n - 1)) * V(-(k + 1), n);
    if (k == 0)
      return h * W(0, n) * (sq(V(0, n + 1)) - sq(V(0, n - 1)) + g(n + 1) - g(n - 1)) +
             W(0, n) * (W(-1, n + 1) - W(-1, n - 1));
    if (k == 1)
      return -h * W(1, n) * (sq(V(0, n + 1)) - sq(V(0, n - 1)) + g(n + 1) - g(n - 1)) +
             W(0, n + 1) * W(2, n) - sq(W(0, n)) + W(0, n) * W(0, n + 1) - W(0, n - 1) * W(2, n - 1) +
             (V(0, n + 1) - V(0, n)) * V(1, n) - (V(0, n) - V(0, n - 1)) * V(-1, n);
    return -h * W(k, n) *
               (sq(V(0, n + k)) - sq(V(0, n + k - 1)) + sq(V(0, n)) - sq(V(0, n - 1)) + g(n + k) -
                g(n + k - 1) + g(n) - g(n - 1)) +
           W(0, n + k) * W(k + 1, n) - W(0, n + k - 1) * W(k - 1, n) + W(0, n) * W(k - 1, n + 1) -
           W(0, n - 1) * W(k + 1, n - 1) + (V(0, n + k) - V(0, n + k - 1)) * V(k, n) -
           (V(0, n) - V(0, n - 1)) * V(-k, n);
  };
  return fill_derivative<T>(b, false, dw, dv);
}

}  // namespace detail

template <typename T>
LaxBands<T> flow_t2_explicit(const LaxBands<T>& b, FlowForm form = FlowForm::corrected) {
  auto d = form == FlowForm::corrected ? detail::flow_t2_corrected(b) : detail::flow_t2_printed(b);
  return d;
}

// Second flow of the reduced lattice (all v identically zero).
template <typename T>
LaxBands<T> flow_t2_even_explicit(const LaxBands<T>& b) {
  if (!b.even_reduced) throw InputError("flow_t2_even_explicit needs an even-reduced band state");
  auto W = [&](int k, int n) { return b.w(k, n); };
  const T h = scalar_from_ratio<T>(1, 2);
  auto g = [&](int n) -> T { return W(0, n) * W(1, n); };
  auto dw = [&](int k, int n) -> T {
    if (k < -1)
      return h * W(k, n) * (g(n) + g(n - k - 1) - g(n - 1) - g(n - k - 2)) + W(k + 1, n + 1) * W(0, n) +
             W(k - 1, n) * W(0, n - k - 1) - W(k - 1, n - 1) * W(0, n - 1) -
             W(k + 1, n) * W(0, n - k - 2);
    if (k == -1)
      return W(0, n) * (W(-1, n) * W(1, n) + W(-2, n) + W(0, n)) -
             W(0, n - 1) * (W(-1, n) * W(1, n - 1) + W(-2, n - 1)) - detail::sq(W(0, n - 1));
    if (k == 0) return h * (g(n + 1) - g(n - 1)) * W(0, n) + (W(-1, n + 1) - W(-1, n)) * W(0, n);
    if (k == 1)
      return h * (g(n - 1) * W(1, n) - g(n + 1) * W(1, n)) + W(0, n + 1) * W(2, n) -
             W(0, n - 1) * W(2, n - 1);
    return h * W(k, n) * (g(n - 1) + g(n + k - 1) - g(n) - g(n + k)) + W(0, n) * W(k - 1, n + 1) +
           W(0, n + k) * W(k + 1, n) - W(0, n - 1) * W(k + 1, n - 1) - W(0, n + k - 1) * W(k - 1, n);
  };
  auto none = [](int, int) { return T(0); };
  return detail::fill_derivative<T>(b, true, dw, none);
}

// max |c - e| / max(1, |e|) over interior sites and all bands.
template <typename T>
double interior_relative_mismatch(const CommutatorResult<T>& c, const LaxBands<T>& e) {
  double worst = 0.0;
  for (int n = 1; n <= e.sites; ++n) {
    if (!c.in_interior(n)) continue;
    for (int k = -e.depth; k <= e.depth; ++k) {
      const T dw = c.d.w(k, n) - e.w(k, n), dv = c.d.v(k, n) - e.v(k, n);
      worst = std::max(worst, abs_value(dw) / std::max(1.0, abs_value(e.w(k, n))));
      worst = std::max(worst, abs_value(dv) / std::max(1.0, abs_value(e.v(k, n))));
    }
  }
  return worst;
}

// m = P J P^T with P block lower triangular and P_ss = p_s I, p_s > 0; Q = P^{-1}.
struct SkewFactorization {
  Eigen::MatrixXd Q, P;
};

namespace detail {

inline void check_factorizable(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() % 2 != 0)
    throw InputError(detail::cat("skew_factorize needs an even square matrix, got ", m.rows(), "x",
                                 m.cols()));
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m + m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw InputError("skew_factorize input is not antisymmetric");
}

// `scale` is the magnitude of the terms that cancelled to produce p2.
inline double pivot_or_throw(double p2, int r, double scale) {
  const int d = 2 * (r + 1);
  if (!(std::abs(p2) > 1e-12 * scale) || p2 == 0.0)
    throw InputError(detail::cat("leading ", d, "x", d, " minor is singular (pivot ", p2, ")"));
  if (p2 < 0.0)
    throw InputError(detail::cat("leading ", d, "x", d,
                                 " minor has a negative Pfaffian ratio; no factorisation with"
                                 " positive diagonal pairs (pivot ",
                                 p2, ")"));
  return std::sqrt(p2);
}

}  // namespace detail

inline SkewFactorization skew_factorize(const Eigen::MatrixXd& m) {
  detail::check_factorizable(m);
  const int R = static_cast<int>(m.rows()) / 2;
  Eigen::Matrix2d J2;
  J2 << 0, 1, -1, 0;
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(2 * R, 2 * R);
  std::vector<double> p(R);
  for (int s = 0; s < R; ++s) {
    Eigen::Matrix2d d = m.block<2, 2>(2 * s, 2 * s);
    double local = std::abs(d(0, 1));
    for (int a = 0; a < s; ++a) {
      const Eigen::Matrix2d t = P.block<2, 2>(2 * s, 2 * a) * J2 * P.block<2, 2>(2 * s, 2 * a).transpose();
      local = std::max(local, std::abs(t(0, 1)));
      d -= t;
    }
    p[s] = detail::pivot_or_throw(d(0, 1), s, local);
    P.block<2, 2>(2 * s, 2 * s) = p[s] * Eigen::Matrix2d::Identity();
    for (int r = s + 1; r < R; ++r) {
      Eigen::Matrix2d x = m.block<2, 2>(2 * r, 2 * s);
      for (int a = 0; a < s; ++a)
        x -= P.block<2, 2>(2 * r, 2 * a) * J2 * P.block<2, 2>(2 * s, 2 * a).transpose();
      P.block<2, 2>(2 * r, 2 * s) = x * (-J2) / p[s];
    }
  }
  SkewFactorization f;
  f.Q = P.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(2 * R, 2 * R));
  f.P = std::move(P);
  return f;
}

inline SkewFactorization skew_factorize(const SkewMomentMatrix& m) { return skew_factorize(m.entries); }

// Independent route: skew Gram-Schmidt on the unit vectors with <x, y> = x^T m y.
inline SkewFactorization skew_factorize_gram_schmidt(const Eigen::MatrixXd& m) {
  detail::check_factorizable(m);
  const int M = static_cast<int>(m.rows());
  Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(M, M);
  auto form = [&](int i, int j) { return Q.row(i).dot(m * Q.row(j).transpose()); };
  for (int r = 0; r < M / 2; ++r) {
    for (int s = 0; s < r; ++s)
      for (int i : {2 * r, 2 * r + 1}) {
        const double xb = form(i, 2 * s + 1), xa = form(i, 2 * s);
        Q.row(i) += -xb * Q.row(2 * s) + xa * Q.row(2 * s + 1);
      }
    const double local = Q.row(2 * r).cwiseAbs().dot(m.cwiseAbs() * Q.row(2 * r + 1).cwiseAbs().transpose());
    const double c = detail::pivot_or_throw(form(2 * r, 2 * r + 1), r, local);
    Q.row(2 * r) /= c;
    Q.row(2 * r + 1) /= c;
  }
  SkewFactorization f;
  f.P = Q.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(M, M));
  f.Q = std::move(Q);
  return f;
}

// L(0) = Q Lambda Q^{-1} from the Gaussian moments. Moments are taken at
// dimension 2(N+1) so every entry of the leading 2N block is exact.
inline LaxBands<double> initial_bands_gaussian(int N, int K, const QuadratureConfig& q = {},
                                               double v_tolerance = 1e-8) {
  if (N < 1 || K < 0) throw InputError(detail::cat("bad band shape N=", N, " K=", K));
  const auto m = moment_matrix(N + 1, CouplingVector{}, q);
  const auto f = skew_factorize(m);
  const int D = 2 * (N + 1);
  Eigen::MatrixXd Lambda = Eigen::MatrixXd::Zero(D, D);
  for (int i = 0; i + 1 < D; ++i) Lambda(i, i + 1) = 1.0;
  const Eigen::MatrixXd L = f.Q * Lambda * f.P;
  Dense<double> lead(2 * N);
  for (int i = 0; i < 2 * N; ++i)
    for (int j = 0; j < 2 * N; ++j) lead(i, j) = L(i, j);
  auto b = disassemble_lax(lead, N, K);
  for (int n = 1; n <= N; ++n)
    for (int k = -K; k <= K; ++k) {
      const double v = b.v(k, n);
      if (std::abs(v) > v_tolerance)
        throw NumericalError(detail::cat("Gaussian Lax matrix has v^", k, "_", n, " = ", v,
                                         " above tolerance ", v_tolerance));
    }
  std::fill(b.v_data.begin(), b.v_data.end(), 0.0);
  b.even_reduced = true;
  return b;
}

enum class FlowKind { t1, t2, t2_even, commutator };

struct Flow {
  FlowKind kind = FlowKind::t1;
  int k = 0;  // commutator only
};

inline LaxBands<double> flow_derivative(const LaxBands<double>& b, const Flow& f) {
  switch (f.kind) {
    case FlowKind::t1:
      return flow_t1_explicit(b);
    case FlowKind::t2:
      return flow_t2_explicit(b);
    case FlowKind::t2_even:
      return flow_t2_even_explicit(b);
    case FlowKind::commutator:
      if (f.k < 1 || f.k > 6) throw InputError(detail::cat("commutator flows support 1 <= k <= 6, got ", f.k));
      return lax_rhs_commutator(b, f.k, 2 * b.sites).d;
  }
  throw InputError("unknown flow");
}

// Classical RK4. Even states stay even under flows that preserve the
// reduction (t2, t2_even, even commutators); v-derivatives are then dropped.
inline std::vector<LaxBands<double>> integrate_flow(const LaxBands<double>& b0, const Flow& f, double dt,
                                                    int steps) {
  if (!(dt > 0.0)) throw InputError(detail::cat("integrate_flow needs dt > 0, got ", dt));
  if (steps < 0) throw InputError("integrate_flow needs steps >= 0");
  const bool keep_even =
      b0.even_reduced && (f.kind == FlowKind::t2 || f.kind == FlowKind::t2_even ||
                          (f.kind == FlowKind::commutator && f.k % 2 == 0));
  LaxBands<double> start = b0;
  start.even_reduced = keep_even;
  auto axpy = [&](const LaxBands<double>& x, double a, const LaxBands<double>& d) {
    LaxBands<double> y = x;
    for (size_t i = 0; i < y.w_data.size(); ++i) y.w_data[i] += a * d.w_data[i];
    if (!y.even_reduced)
      for (size_t i = 0; i < y.v_data.size(); ++i) y.v_data[i] += a * d.v_data[i];
    return y;
  };
  std::vector<LaxBands<double>> traj{start};
  traj.reserve(static_cast<size_t>(steps) + 1);
  for (int s = 1; s <= steps; ++s) {
    const auto& x = traj.back();
    const auto k1 = flow_derivative(x, f);
    const auto k2 = flow_derivative(axpy(x, 0.5 * dt, k1), f);
    const auto k3 = flow_derivative(axpy(x, 0.5 * dt, k2), f);
    const auto k4 = flow_derivative(axpy(x, dt, k3), f);
    auto y = axpy(x, dt / 6.0, k1);
    y = axpy(y, dt / 3.0, k2);
    y = axpy(y, dt / 3.0, k3);
    y = axpy(y, dt / 6.0, k4);
    for (int n = 1; n <= y.sites; ++n)
      for (int k = -y.depth; k <= y.depth; ++k)
        if (!std::isfinite(y.w(k, n)) || !std::isfinite(y.v(k, n)))
          throw NumericalError(detail::cat("non-finite band value at step ", s, " (k=", k, ", n=", n, ")"));
    traj.push_back(std::move(y));
  }
  return traj;
}

inline nlohmann::ordered_json bands_to_json(const LaxBands<double>& b) {
  nlohmann::ordered_json j;
  j["N"] = b.sites;
  j["K"] = b.depth;
  j["even"] = b.even_reduced;
  auto w = nlohmann::ordered_json::array(), v = nlohmann::ordered_json::array();
  for (int k = -b.depth; k <= b.depth; ++k)
    for (int n = 1; n <= b.sites; ++n) {
      w.push_back({k, n, b.w(k, n)});
      if (!b.even_reduced) v.push_back({k, n, b.v(k, n)});
    }
  j["w"] = std::move(w);
  j["v"] = std::move(v);
  return j;
}

template <typename Json>
LaxBands<double> bands_from_json(const Json& j) {
  try {
    if (!j.is_object()) throw InputError("band state must be a JSON object");
    for (const char* key : {"N", "K"})
      if (!j.contains(key) || !j[key].is_number_integer())
        throw InputError(detail::cat("band state needs integer field '", key, "'"));
    const bool even = j.contains("even") ? j["even"].template get<bool>() : false;
    auto b = LaxBands<double>::zeros(j["N"].template get<int>(), j["K"].template get<int>(), false);
    for (const char* key : {"w", "v"}) {
      if (!j.contains(key)) continue;
      for (const auto& e : j[key]) {
        if (!e.is_array() || e.size() != 3) throw InputError(detail::cat("'", key, "' entries are [k,n,value]"));
        const int k = e[0].template get<int>(), n = e[1].template get<int>();
        const double val = e[2].template get<double>();
        if (!std::isfinite(val)) throw InputError("non-finite band value");
        if (key[0] == 'w') {
          b.w_ref(k, n) = val;
        } else {
          if (even && val != 0.0)
            throw InputError(detail::cat("even state has nonzero v^", k, "_", n, " = ", val));
          b.v_ref(k, n) = val;
        }
      }
    }
    b.even_reduced = even;
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(detail::cat("malformed band state: ", e.what()));
  }
}

// header step,band,k,n,value
inline void write_trajectory_csv(std::ostream& os, const std::vector<LaxBands<double>>& traj) {
  os << "step,band,k,n,value\n";
  os.precision(17);
  for (size_t s = 0; s < traj.size(); ++s) {
    const auto& b = traj[s];
    for (int k = -b.depth; k <= b.depth; ++k)
      for (int n = 1; n <= b.sites; ++n) os << s << ",w," << k << ',' << n << ',' << b.w(k, n) << '\n';
    if (b.even_reduced) continue;
    for (int k = -b.depth; k <= b.depth; ++k)
      for (int n = 1; n <= b.sites; ++n) os << s << ",v," << k << ',' << n << ',' << b.v(k, n) << '\n';
  }
}

}  // namespace pfc
