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

// Continuum limit of the even lattice: the hydrodynamic chain u_t = A(u) u_x,
// its dispersive corrections, the first-flow continuum equations, a periodic
// finite-difference evolver and the lattice-vs-continuum residual study.

#pragma once

#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <vector>

#include "pfaffchain/errors.hpp"
#include "pfaffchain/lax.hpp"

namespace pfc {

// ---------------------------------------------------------------------------
// A(u) rows

namespace detail {

// Structural entries of row k. Rows 0 and 1 carry the merged values of their
// colliding columns; elsewhere a_{k-1} = a_{k+1} = u^0 are added onto a_0, a_1.
template <typename T, typename F>
std::map<int, T> chain_row(F&& u, int k) {
  std::map<int, T> r;
  const T u0 = u(0), u1 = u(1);
  if (k == 0) {
    r[0] = u0 * u1;
    r[1] = u0 * u0;
    r[-1] = u0;
    return r;
  }
  if (k == 1) {
    const T u2 = u(2);
    r[0] = 2 * u2 - u1 * u1;
    r[1] = -(u0 * u1);
    r[2] = u0;
    return r;
  }
  const T uk = u(k), ukm = u(k - 1), ukp = u(k + 1);
  if (k < 0) {
    r[0] = (k + 2) * ukp - k * ukm + u1 * uk;
    r[1] = u0 * uk;
  } else {
    r[0] = (k + 1) * ukp - (k - 1) * ukm - u1 * uk;
    r[1] = -(u0 * uk);
  }
  r[k - 1] += u0;
  r[k + 1] += u0;
  return r;
}

}  // namespace detail

template <typename T>
std::map<int, T> chain_matrix_row(const std::map<int, T>& u, int k) {
  for (int j : {0, 1, k - 1, k, k + 1})
    if (!u.count(j)) throw InputError(detail::cat("chain_matrix_row(k=", k, ") needs u^", j));
  return detail::chain_row<T>([&](int j) { return u.at(j); }, k);
}

// ---------------------------------------------------------------------------
// Grid state and stencils

struct ChainState {
  int grid = 0;
  int depth = 0;
  double h = 0.0;
  double epsilon = 0.0;
  std::vector<double> u_data, z_data;  // (k + K) * G + m; z empty when absent

  static ChainState zeros(int G, int K, double h, bool with_z = false) {
    if (G < 1 || K < 0 || !(h > 0.0))
      throw InputError(detail::cat("bad chain grid G=", G, " K=", K, " h=", h));
    ChainState s;
    s.grid = G;
    s.depth = K;
    s.h = h;
    s.u_data.assign(static_cast<size_t>((2 * K + 1) * G), 0.0);
    if (with_z) s.z_data = s.u_data;
    return s;
  }

  bool has_z() const { return !z_data.empty(); }
  double x(int m) const { return m * h; }

  int index(int k, int m) const {
    if (k < -depth || k > depth) return -1;
    m = ((m % grid) + grid) % grid;
    return (k + depth) * grid + m;
  }
  double u(int k, int m) const {
    const int i = index(k, m);
    return i < 0 ? 0.0 : u_data[i];
  }
  double z(int k, int m) const {
    const int i = index(k, m);
    return i < 0 || !has_z() ? 0.0 : z_data[i];
  }
  double& u_ref(int k, int m) { return u_data[checked(k, m)]; }
  double& z_ref(int k, int m) {
    if (!has_z()) throw InputError("chain state has no z field");
    return z_data[checked(k, m)];
  }
  std::vector<double> u_band(int k) const { return band(u_data, k); }
  std::vector<double> z_band(int k) const { return band(z_data, k); }

 private:
  int checked(int k, int m) const {
    if (k < -depth || k > depth || m < 0 || m >= grid)
      throw InputError(detail::cat("chain entry (k=", k, ", m=", m, ") outside the grid"));
    return index(k, m);
  }
  std::vector<double> band(const std::vector<double>& d, int k) const {
    if (d.empty() || k < -depth || k > depth) return std::vector<double>(grid, 0.0);
    return {d.begin() + (k + depth) * grid, d.begin() + (k + depth + 1) * grid};
  }
};

namespace detail {

// Fourth-order periodic central differences.
inline double fd(const double* f, int G, int m, double h, int order) {
  auto at = [&](int o) { return f[((m + o) % G + G) % G]; };
  switch (order) {
    case 0:
      return at(0);
    case 1:
      return (at(-2) - 8.0 * at(-1) + 8.0 * at(1) - at(2)) / (12.0 * h);
    case 2:
      return (-at(-2) + 16.0 * at(-1) - 30.0 * at(0) + 16.0 * at(1) - at(2)) / (12.0 * h * h);
    case 3:
      return (0.125 * at(-3) - at(-2) + 1.625 * at(-1) - 1.625 * at(1) + at(2) - 0.125 * at(3)) /
             (h * h * h);
  }
  throw InputError(detail::cat("unsupported derivative order ", order));
}

inline void check_grid(int G) {
  if (G < 7) throw InputError(detail::cat("grid too coarse for the third-derivative stencil: G = ", G));
}

// Value and first three x-derivatives of every band at every grid point.
struct Jets {
  int depth = 0, grid = 0;
  double h = 0.0;
  std::vector<std::array<double, 4>> u, z;

  Jets(const ChainState& s, int max_order) : depth(s.depth), grid(s.grid), h(s.h) {
    check_grid(s.grid);
    fill(s.u_data, u, max_order);
    if (s.has_z()) fill(s.z_data, z, max_order);
  }

  double U(int k, int d, int m) const {
    return k < -depth || k > depth ? 0.0 : u[(k + depth) * grid + m][d];
  }
  double Z(int k, int d, int m) const {
    return z.empty() || k < -depth || k > depth ? 0.0 : z[(k + depth) * grid + m][d];
  }

 private:
  void fill(const std::vector<double>& src, std::vector<std::array<double, 4>>& dst, int max_order) {
    dst.assign(src.size(), {0.0, 0.0, 0.0, 0.0});
    for (int b = 0; b < 2 * depth + 1; ++b) {
      const double* f = src.data() + b * grid;
      for (int m = 0; m < grid; ++m)
        for (int d = 0; d <= max_order; ++d) dst[b * grid + m][d] = fd(f, grid, m, h, d);
    }
  }
};

}  // namespace detail

inline double fd_derivative(const std::vector<double>& f, int m, double h, int order) {
  detail::check_grid(static_cast<int>(f.size()));
  return detail::fd(f.data(), static_cast<int>(f.size()), m, h, order);
}

// ---------------------------------------------------------------------------
// Even second flow: leading order and corrections

enum class ContinuumForm { corrected, printed };

namespace detail {

// Accessor over one grid point: u(j), ux(j), ... with closure outside the depth.
struct Point {
  const Jets& J;
  int m;
  double u(int j) const { return J.U(j, 0, m); }
  double ux(int j) const { return J.U(j, 1, m); }
  double uxx(int j) const { return J.U(j, 2, m); }
  double uxxx(int j) const { return J.U(j, 3, m); }
  double z(int j) const { return J.Z(j, 0, m); }
  double zx(int j) const { return J.Z(j, 1, m); }
  double zxx(int j) const { return J.Z(j, 2, m); }
};

// The four branches of the hydrodynamic chain.
inline double hydro_branch(const Point& p, int k) {
  if (k < 0)
    return ((k + 2) * p.u(k + 1) - k * p.u(k - 1) + p.u(1) * p.u(k)) * p.ux(0) + p.u(0) * p.u(k) * p.ux(1) +
           p.u(0) * p.ux(k - 1) + p.u(0) * p.ux(k + 1);
  if (k == 0) return p.u(0) * p.u(1) * p.ux(0) + p.u(0) * p.u(0) * p.ux(1) + p.u(0) * p.ux(-1);
  if (k == 1) return (2 * p.u(2) - p.u(1) * p.u(1)) * p.ux(0) - p.u(0) * p.u(1) * p.ux(1) + p.u(0) * p.ux(2);
  return ((k + 1) * p.u(k + 1) - (k - 1) * p.u(k - 1) - p.u(1) * p.u(k)) * p.ux(0) -
         p.u(0) * p.u(k) * p.ux(1) + p.u(0) * p.ux(k - 1) + p.u(0) * p.ux(k + 1);
}

// Shared pieces: (u^0 u^1)_xx / 2-type and (u^0 u^1)_xxx-type groupings.
inline double g2(const Point& p) { return 2 * p.ux(0) * p.ux(1) + p.u(1) * p.uxx(0) + p.u(0) * p.uxx(1); }
inline double g3(const Point& p) {
  return 3 * p.ux(1) * p.uxx(0) + 3 * p.ux(0) * p.uxx(1) + p.u(1) * p.uxxx(0) + p.u(0) * p.uxxx(1);
}

// Coefficients of eps^1 and eps^2 in the expansion of the lattice flow.
inline std::array<double, 2> t2_corrections(const Point& p, int k) {
  const double kk = k;
  if (k <= -2) {
    const double e1 = 0.5 * (-(kk + 2) * (kk + 2) * p.u(k + 1) * p.uxx(0) + kk * (kk + 2) * p.u(k - 1) * p.uxx(0) -
                             (kk + 2) * p.u(k) * g2(p) - 2 * p.ux(0) * p.ux(k - 1) +
                             p.u(0) * (p.uxx(k + 1) - p.uxx(k - 1)));
    const double c = (kk + 1) * (kk + 1) * (kk + 1) - 1;
    const double e2 =
        (2 * ((kk + 2) * (kk + 2) * (kk + 2) * p.u(k + 1) - c * p.u(k - 1)) * p.uxxx(0) +
         6 * (p.uxx(0) * p.ux(k - 1) + p.ux(0) * p.uxx(k - 1)) + 2 * p.u(0) * (p.uxxx(k - 1) + p.uxxx(k + 1)) +
         (3 * kk * kk + 9 * kk + 8) * p.u(k) * g3(p)) /
        12.0;
    return {e1, e2};
  }
  if (k == -1) {
    const double e1 =
        -0.5 * (p.u(-1) * g2(p) + p.u(-2) * p.uxx(0) + p.u(0) * p.uxx(-2) + 2 * p.u(0) * p.uxx(0) +
                2 * p.ux(-2) * p.ux(0) + 2 * p.ux(0) * p.ux(0));
    const double e2 = (p.u(-1) * g3(p) + p.u(-2) * p.uxxx(0) + p.u(0) * p.uxxx(-2) + 2 * p.u(0) * p.uxxx(0) +
                       3 * p.ux(-2) * p.uxx(0) + 3 * p.uxx(-2) * p.ux(0) + 6 * p.ux(0) * p.uxx(0)) /
                      6.0;
    return {e1, e2};
  }
  if (k == 0) {
    return {0.5 * p.u(0) * p.uxx(-1),
            p.u(0) * (3 * p.ux(1) * p.uxx(0) + 3 * p.ux(0) * p.uxx(1) + p.uxxx(-1) + p.u(1) * p.uxxx(0) +
                      p.u(0) * p.uxxx(1)) /
                6.0};
  }
  if (k == 1) {
    return {-p.ux(0) * p.ux(2) - 0.5 * p.u(0) * p.uxx(2),
            (-p.uxxx(0) * p.u(1) * p.u(1) - (3 * p.ux(1) * p.uxx(0) + 3 * p.ux(0) * p.uxx(1) + p.u(0) * p.uxxx(1)) * p.u(1) +
             3 * p.ux(2) * p.uxx(0) + 3 * p.ux(0) * p.uxx(2) + 2 * p.u(2) * p.uxxx(0) + p.u(0) * p.uxxx(2)) /
                6.0};
  }
  const double e1 = 0.5 * (p.uxx(0) * ((kk * kk - 1) * p.u(k + 1) - (kk - 1) * (kk - 1) * p.u(k - 1)) -
                           2 * p.ux(0) * p.ux(k + 1) - (kk - 1) * g2(p) * p.u(k) + p.u(0) * p.uxx(k - 1) -
                           p.u(0) * p.uxx(k + 1));
  const double e2 =
      (2 * (p.uxxx(0) * ((kk * kk * kk + 1) * p.u(k + 1) - (kk - 1) * (kk - 1) * (kk - 1) * p.u(k - 1)) +
            3 * p.uxx(0) * p.ux(k + 1) + 3 * p.ux(0) * p.uxx(k + 1) + p.u(0) * (p.uxxx(k - 1) + p.uxxx(k + 1))) -
       (3 * kk * kk - 3 * kk + 2) * g3(p) * p.u(k)) /
      12.0;
  return {e1, e2};
}

// Known-incorrect variant of all three orders for k < 0 and k > 1 (README).
inline std::array<double, 3> t2_printed(const Point& p, int k) {
  const double kk = k;
  if (k < 0) {
    const double lead = ((kk + 2) * p.u(k + 1) - kk * p.u(k - 1) - p.u(1) * p.ux(0) * p.u(k)) * p.ux(0) -
                        p.u(0) * p.ux(1) * p.u(k) + p.u(0) * p.ux(k - 1) + p.u(0) * p.ux(k + 1);
    const double e1 = 0.5 * (kk * kk * p.uxx(0) * (-p.u(k - 1)) + (kk * kk + 2 * kk) * p.uxx(0) * p.u(k + 1) -
                             kk * p.u(k) * g2(p) - 2 * p.ux(0) * p.ux(k + 1) +
                             p.u(0) * (p.uxx(k - 1) - p.uxx(k + 1)));
    const double e2 =
        (2 * (p.uxxx(0) * (((kk + 1) * (kk + 1) * (kk + 1) + 1) * p.u(k + 1) - kk * kk * kk * p.u(k - 1)) +
              3 * p.uxx(0) * p.ux(k + 1) + 3 * p.ux(0) * p.uxx(k + 1) + p.u(0) * (p.uxxx(k - 1) + p.uxxx(k + 1))) -
         p.u(k) * (3 * kk * kk + 3 * kk + 2) * g3(p)) /
        12.0;
    return {lead, e1, e2};
  }
  if (k <= 1) {
    const auto c = t2_corrections(p, k);
    return {hydro_branch(p, k), c[0], c[1]};
  }
  const double lead = ((kk + 1) * p.u(k + 1) - (kk - 1) * p.u(k - 1) + p.u(1) * p.u(k)) * p.ux(0) +
                      p.u(0) * p.ux(1) * p.u(k) + p.u(0) * p.ux(k - 1) + p.u(0) * p.ux(k + 1);
  const double e1 = 0.5 * (p.uxx(0) * ((kk * kk - 1) * p.u(k + 1) - (kk * kk - 2 * kk + 1) * p.u(k - 1)) -
                           2 * p.ux(0) * p.ux(k + 1) + (kk - 1) * g2(p) * p.u(k) + p.u(0) * p.uxx(k - 1) -
                           p.u(0) * p.uxx(k + 1));
  const double e2 =
      (2 * (p.uxxx(0) * ((kk * kk * kk + 1) * p.u(k + 1) - (kk - 1) * (kk - 1) * (kk - 1) * p.u(k - 1)) +
            3 * p.uxx(0) * p.ux(k + 1) + 3 * p.ux(0) * p.uxx(k + 1) + p.u(0) * (p.uxxx(k - 1) + p.uxxx(k + 1))) +
       (3 * kk * kk - 3 * kk + 2) * g3(p) * p.u(k)) /
      12.0;
  return {lead, e1, e2};
}

inline ChainState like(const ChainState& s, bool with_z = false) {
  auto d = ChainState::zeros(s.grid, s.depth, s.h, with_z);
  d.epsilon = s.epsilon;
  return d;
}

inline void check_order(int order) {
  if (order < 0 || order > 2) throw InputError(detail::cat("order must be 0, 1 or 2, got ", order));
}

}  // namespace detail

// u_t = A(u) u_x with the four printed branches.
inline ChainState chain_rhs_t2(const ChainState& s) {
  if (s.depth < 1) throw InputError("chain_rhs_t2 needs depth >= 1");
  const detail::Jets J(s, 1);
  auto d = detail::like(s);
  for (int k = -s.depth; k <= s.depth; ++k)
    for (int m = 0; m < s.grid; ++m) d.u_ref(k, m) = detail::hydro_branch({J, m}, k);
  return d;
}

// Same flow from the row entries of A(u).
inline ChainState chain_rhs_t2_assembled(const ChainState& s) {
  if (s.depth < 1) throw InputError("chain_rhs_t2 needs depth >= 1");
  const detail::Jets J(s, 1);
  auto d = detail::like(s);
  for (int k = -s.depth; k <= s.depth; ++k)
    for (int m = 0; m < s.grid; ++m) {
      double acc = 0.0;
      for (const auto& [j, a] : detail::chain_row<double>([&](int i) { return J.U(i, 0, m); }, k))
        acc += a * J.U(j, 1, m);
      d.u_ref(k, m) = acc;
    }
  return d;
}

// Through eps^order, eps taken from the state.
inline ChainState chain_rhs_t2_corrected(const ChainState& s, int order,
                                         ContinuumForm form = ContinuumForm::corrected) {
  detail::check_order(order);
  if (s.depth < 1) throw InputError("chain_rhs_t2 needs depth >= 1");
  const detail::Jets J(s, order + 1);
  const double e = s.epsilon;
  auto d = detail::like(s);
  for (int k = -s.depth; k <= s.depth; ++k)
    for (int m = 0; m < s.grid; ++m) {
      const detail::Point p{J, m};
      double v;
      if (form == ContinuumForm::printed) {
        const auto t = detail::t2_printed(p, k);
        v = t[0] + (order >= 1 ? e * t[1] : 0.0) + (order >= 2 ? e * e * t[2] : 0.0);
      } else {
        v = detail::hydro_branch(p, k);
        if (order >= 1) {
          const auto c = detail::t2_corrections(p, k);
          v += e * c[0] + (order >= 2 ? e * e * c[1] : 0.0);
        }
      }
      d.u_ref(k, m) = v;
    }
  return d;
}

// ---------------------------------------------------------------------------
// First flow (coupled u, z); right-hand sides only

struct ContinuumT1 {
  ChainState du, dz;  // derivatives stored in the u field of each
};

namespace detail {

// (f g)_xx for two jets.
inline double prod_xx(double f, double fx, double fxx, double g, double gx, double gxx) {
  return fxx * g + 2 * fx * gx + f * gxx;
}

inline std::array<double, 3> t1_z(const Point& p, int k) {
  const double kk = k;
  if (k < -1) {
    const int a = -(k - 1), b = -(k + 1);
    return {-p.u(0) * (p.u(b) + p.u(a)) - p.u(-1) * p.u(-k) + p.u(k - 1),
            p.u(a) * p.ux(0) + kk * p.z(k) * p.zx(0) - p.u(0) * p.ux(b) + p.u(0) * p.ux(a),
            -0.5 * (prod_xx(p.u(a), p.ux(a), p.uxx(a), p.u(0), p.ux(0), p.uxx(0)) + p.u(0) * p.uxx(b) +
                    (kk + 1) * kk * p.z(k) * p.zxx(0))};
  }
  if (k == -1)
    return {p.u(-2) - p.u(0) - p.u(-1) * p.u(1) - p.u(0) * p.u(2),
            p.ux(0) * p.u(2) + p.u(0) * p.ux(2) - p.z(-1) * p.zx(0),
            -0.5 * prod_xx(p.u(0), p.ux(0), p.uxx(0), p.u(2), p.ux(2), p.uxx(2))};
  if (k == 0) return {p.u(0) * p.u(1), 0.0, 0.0};
  if (k == 1)
    return {-p.u(-2) + p.u(0) + p.u(-1) * p.u(1) + p.u(0) * p.u(2),
            p.zx(0) * p.z(1) + p.ux(-1) * p.u(1) + p.ux(0) * p.u(2),
            0.5 * (p.u(1) * p.uxx(-1) + p.u(2) * p.uxx(0))};
  return {p.u(0) * (p.u(k - 1) + p.u(k + 1)) + p.u(-1) * p.u(k) - p.u(-(k + 1)),
          kk * p.zx(0) * p.z(k) + (kk - 1) * p.u(k - 1) * p.ux(0) + kk * p.ux(-1) * p.u(k) + kk * p.ux(0) * p.u(k + 1),
          0.5 * (kk * kk * (p.u(k) * p.uxx(-1) + p.u(k + 1) * p.uxx(0)) + (kk - 1) * (kk - 1) * p.u(k - 1) * p.uxx(0) +
                 kk * (kk - 1) * p.z(k) * p.zxx(0))};
}

inline std::array<double, 3> t1_u(const Point& p, int k, ContinuumForm form) {
  const double kk = k;
  if (k == -2 && form == ContinuumForm::corrected)
    return {p.u(-1) * (p.z(-1) - p.z(1)) + 2 * p.u(-2) * p.z(0) + p.u(0) * (p.z(-2) - p.z(2)) - 2 * p.u(0) * p.z(0),
            p.u(0) * p.zx(2) + p.z(-1) * p.ux(-1) + p.z(-2) * p.ux(0) + p.z(2) * p.ux(0),
            0.5 * p.u(-2) * p.zxx(0) - p.u(0) * p.zxx(0) - 0.5 * p.u(0) * p.zxx(2) + 0.5 * p.z(-1) * p.uxx(-1) +
                0.5 * p.z(-2) * p.uxx(0) - 0.5 * p.z(2) * p.uxx(0) - p.ux(0) * p.zx(2)};
  if (k < -1) {
    const int a = k + 2, b = -(k + 2), c = -k;
    // printed text has z^{k+1}_x in front of u^{-1}_xx
    const double lead1 = form == ContinuumForm::printed ? p.zx(k + 1) : p.z(k + 1);
    return {2 * p.z(0) * p.u(k) + p.u(0) * (p.z(a) - p.z(b) + p.z(k) - p.z(c)) +
                p.u(-1) * (p.z(k + 1) - p.z(-(k + 1))),
            -(kk + 1) * (p.z(k + 1) * p.ux(-1) + p.z(k) * p.ux(0)) - (kk + 2) * (p.z(a) * p.ux(0) + p.u(k) * p.zx(0)) -
                p.u(0) * p.zx(b) + (p.ux(0) * p.z(c) + p.u(0) * p.zx(c)),
            0.5 * ((kk + 1) * (kk + 1) * (lead1 * p.uxx(-1) + p.z(k) * p.uxx(0)) + (kk + 2) * (kk + 2) * p.z(a) * p.uxx(0) +
                   (3 + kk * (kk + 3)) * p.u(k) * p.zxx(0) - p.u(0) * p.zxx(b) -
                   prod_xx(p.u(0), p.ux(0), p.uxx(0), p.z(c), p.zx(c), p.zxx(c)))};
  }
  if (k == -1)
    return {p.u(0) * (p.z(-1) - p.z(1)), p.ux(0) * p.z(1) + p.u(0) * p.zx(1),
            -0.5 * prod_xx(p.u(0), p.ux(0), p.uxx(0), p.z(1), p.zx(1), p.zxx(1))};
  if (k == 0) return {0.0, 0.0, 0.5 * p.zxx(0) * p.u(0)};
  return {-2 * p.z(0) * p.u(k) + p.z(k) - p.z(-k), -(kk - 1) * p.zx(0) * p.u(k),
          -0.5 * (1 + kk * (kk - 1)) * p.u(k) * p.zxx(0)};
}

}  // namespace detail

inline ContinuumT1 continuum_t1_rhs(const ChainState& s, int order, ContinuumForm form = ContinuumForm::corrected) {
  detail::check_order(order);
  if (!s.has_z()) throw InputError("continuum_t1_rhs needs the z field");
  if (s.depth < 3) throw InputError("continuum_t1_rhs needs depth >= 3");
  const detail::Jets J(s, 2);
  const double e = s.epsilon;
  ContinuumT1 r{detail::like(s), detail::like(s)};
  auto sum = [&](const std::array<double, 3>& t) {
    return t[0] + (order >= 1 ? e * t[1] : 0.0) + (order >= 2 ? e * e * t[2] : 0.0);
  };
  for (int k = -s.depth; k <= s.depth; ++k)
    for (int m = 0; m < s.grid; ++m) {
      const detail::Point p{J, m};
      r.dz.u_ref(k, m) = sum(detail::t1_z(p, k));
      r.du.u_ref(k, m) = sum(detail::t1_u(p, k, form));
    }
  return r;
}

// ---------------------------------------------------------------------------
// Evolution

enum class ChainScheme { rk4_central, lax_friedrichs };

struct ChainTrajectory {
  std::vector<ChainState> states;
  double dt = 0.0;
  double epsilon = 0.0;  // t = eps * t_2
  double time(int step) const { return step * dt; }
  double lattice_time(int step) const {
    return epsilon > 0.0 ? step * dt / epsilon : std::numeric_limits<double>::infinity();
  }
};

namespace detail {

inline double max_row_sum(const ChainState& s) {
  double worst = 0.0;
  for (int k = -s.depth; k <= s.depth; ++k)
    for (int m = 0; m < s.grid; ++m) {
      double acc = 0.0;
      for (const auto& [j, a] : chain_row<double>([&](int i) { return s.u(i, m); }, k))
        if (j >= -s.depth && j <= s.depth) acc += std::abs(a);
      worst = std::max(worst, acc);
    }
  return worst;
}

inline ChainState lax_friedrichs_step(const ChainState& s, double dt) {
  auto y = like(s);
  for (int k = -s.depth; k <= s.depth; ++k)
    for (int m = 0; m < s.grid; ++m) {
      double acc = 0.0;
      for (const auto& [j, a] : chain_row<double>([&](int i) { return s.u(i, m); }, k))
        acc += a * (s.u(j, m + 1) - s.u(j, m - 1)) / (2.0 * s.h);
      y.u_ref(k, m) = 0.5 * (s.u(k, m + 1) + s.u(k, m - 1)) + dt * acc;
    }
  return y;
}

}  // namespace detail

// Periodic in x. rk4_central uses the fourth-order stencils; lax_friedrichs
// is first order and requires dt <= h / (4 max row sum of |A|).
inline ChainTrajectory evolve_chain(const ChainState& s0, double dt, int steps, ChainScheme scheme,
                                    int order = 0) {
  if (!(dt > 0.0)) throw InputError(detail::cat("evolve_chain needs dt > 0, got ", dt));
  if (steps < 0) throw InputError("evolve_chain needs steps >= 0");
  detail::check_order(order);
  if (scheme == ChainScheme::lax_friedrichs) {
    if (order != 0) throw InputError("lax-friedrichs evolves the leading-order chain only");
    const double bound = s0.h / (4.0 * detail::max_row_sum(s0));
    if (dt > bound) throw InputError(detail::cat("CFL bound violated: dt = ", dt, " > ", bound));
  }
  ChainTrajectory tr;
  tr.dt = dt;
  tr.epsilon = s0.epsilon;
  tr.states.push_back(s0);
  auto axpy = [](const ChainState& x, double a, const ChainState& d) {
    ChainState y = x;
    for (size_t i = 0; i < y.u_data.size(); ++i) y.u_data[i] += a * d.u_data[i];
    return y;
  };
  auto rhs = [&](const ChainState& x) { return chain_rhs_t2_corrected(x, order); };
  for (int step = 1; step <= steps; ++step) {
    const ChainState& x = tr.states.back();
    ChainState y;
    if (scheme == ChainScheme::rk4_central) {
      const auto k1 = rhs(x), k2 = rhs(axpy(x, 0.5 * dt, k1)), k3 = rhs(axpy(x, 0.5 * dt, k2)),
                 k4 = rhs(axpy(x, dt, k3));
      y = axpy(axpy(axpy(axpy(x, dt / 6.0, k1), dt / 3.0, k2), dt / 3.0, k3), dt / 6.0, k4);
    } else {
      y = detail::lax_friedrichs_step(x, dt);
    }
    for (int k = -y.depth; k <= y.depth; ++k)
      for (int m = 0; m < y.grid; ++m)
        if (!std::isfinite(y.u(k, m)))
          throw NumericalError(detail::cat("non-finite value at step ", step, ", u^", k, " at m = ", m,
                                           " (x = ", y.x(m), "): gradient catastrophe or instability"));
    tr.states.push_back(std::move(y));
  }
  return tr;
}

// header step,k,m,x,u; every `every`-th step plus the last one
inline void write_chain_csv(std::ostream& os, const ChainTrajectory& tr, int every = 1) {
  if (every < 1) throw InputError("CSV stride must be >= 1");
  os << "step,k,m,x,u\n";
  os.precision(17);
  for (size_t s = 0; s < tr.states.size(); ++s) {
    if (s % every != 0 && s + 1 != tr.states.size()) continue;
    const auto& st = tr.states[s];
    for (int k = -st.depth; k <= st.depth; ++k)
      for (int m = 0; m < st.grid; ++m) os << s << ',' << k << ',' << m << ',' << st.x(m) << ',' << st.u(k, m) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Lattice vs continuum

// Period-1 trigonometric polynomial per band.
struct TrigProfile {
  struct Mode {
    int freq;
    double amp, phase;
  };
  struct Band {
    double mean = 0.0;
    std::vector<Mode> modes;
    double operator()(double x) const {
      double v = mean;
      for (const auto& md : modes) v += md.amp * std::sin(2.0 * std::numbers::pi * md.freq * x + md.phase);
      return v;
    }
  };
  int depth = 0;
  std::map<int, Band> u, z;

  double U(int k, double x) const {
    auto it = u.find(k);
    return it == u.end() ? 0.0 : it->second(x);
  }
  double Z(int k, double x) const {
    auto it = z.find(k);
    return it == z.end() ? 0.0 : it->second(x);
  }
  bool has_z() const { return !z.empty(); }

  // Fixed smooth profile with u^0 bounded away from zero.
  static TrigProfile standard(int K, bool with_z = false) {
    TrigProfile p;
    p.depth = K;
    for (int k = -K; k <= K; ++k) {
      Band b;
      b.mean = k == 0 ? 1.5 : 0.1 * k;
      b.modes = {{1, 0.2 + 0.02 * k, 0.3 * k}, {2, 0.05, 1.0 - 0.1 * k}};
      p.u[k] = b;
      if (with_z) {
        Band c;
        c.mean = 0.05 * k;
        c.modes = {{1, 0.15, 0.7 + 0.2 * k}, {3, 0.03, 0.1 * k}};
        p.z[k] = c;
      }
    }
    return p;
  }

  // u^0 = 1 + a sin(2 pi x), u^1 = a cos(2 pi x), u^-1 = a sin(4 pi x), rest 0.
  static TrigProfile small_amplitude(int K, double a) {
    TrigProfile p;
    p.depth = K;
    const double half_pi = 0.5 * std::numbers::pi;
    p.u[0] = {1.0, {{1, a, 0.0}}};
    if (K >= 1) {
      p.u[1] = {0.0, {{1, a, half_pi}}};
      p.u[-1] = {0.0, {{2, a, 0.0}}};
    }
    return p;
  }

  // Dyadic constants, so lattice differences cancel exactly.
  static TrigProfile constant(int K) {
    TrigProfile p;
    p.depth = K;
    for (int k = -K; k <= K; ++k) p.u[k].mean = 0.125 * (k + K + 2);
    return p;
  }
};

// Grid samples u^k(m h), h = 1/G.
inline ChainState sample_profile(const TrigProfile& prof, int G, double epsilon = 0.0) {
  auto s = ChainState::zeros(G, prof.depth, 1.0 / G, prof.has_z());
  s.epsilon = epsilon;
  for (int k = -prof.depth; k <= prof.depth; ++k)
    for (int m = 0; m < G; ++m) {
      s.u_ref(k, m) = prof.U(k, s.x(m));
      if (prof.has_z()) s.z_ref(k, m) = prof.Z(k, s.x(m));
    }
  return s;
}

enum class ContinuumFlow { t2, t1 };

struct ResidualReport {
  int order = 0;
  std::vector<double> eps, residual;
  double slope = std::numeric_limits<double>::quiet_NaN();
};

// Least-squares slope of log(residual) against log(eps); NaN if any residual is 0.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    if (!(y[i] > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    const double a = std::log(x[i]), b = std::log(y[i]);
    sx += a;
    sy += b;
    sxx += a * a;
    sxy += a * b;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// Sample the profile on a periodic lattice w^k_n = u^k(eps n) (N = 1/eps),
// evaluate the lattice flow, and compare with the continuum right-hand side
// on a grid of spacing eps/4 at the lattice points. For t2 the lattice flow is
// divided by eps (t = eps t_2). Sup norm over |k| <= K - 2.
inline ResidualReport continuum_residual(const TrigProfile& prof, const std::vector<double>& eps_list, int order,
                                         ContinuumFlow flow = ContinuumFlow::t2,
                                         ContinuumForm form = ContinuumForm::corrected) {
  detail::check_order(order);
  if (eps_list.size() < 3) throw InputError("continuum_residual needs at least 3 values of eps");
  if (flow == ContinuumFlow::t1 && !prof.has_z()) throw InputError("t1 residual needs a z profile");
  const int K = prof.depth;
  if (K < 3) throw InputError("continuum_residual needs profile depth >= 3");
  ResidualReport rep;
  rep.order = order;
  for (double eps : eps_list) {
    const double Nd = 1.0 / eps;
    const int N = static_cast<int>(std::lround(Nd));
    if (!(eps > 0.0) || std::abs(Nd - N) > 1e-9 * Nd || N < 8)
      throw InputError(detail::cat("eps must be 1/N for an integer N >= 8, got ", eps));
    const bool even = flow == ContinuumFlow::t2;
    auto b = LaxBands<double>::zeros(N, K, even);
    b.periodic = true;
    auto s = ChainState::zeros(4 * N, K, eps / 4.0, !even);
    s.epsilon = eps;
    for (int k = -K; k <= K; ++k) {
      for (int n = 1; n <= N; ++n) {
        b.w_ref(k, n) = prof.U(k, eps * n);
        if (!even) b.v_ref(k, n) = prof.Z(k, eps * n);
      }
      for (int m = 0; m < 4 * N; ++m) {
        s.u_ref(k, m) = prof.U(k, s.x(m));
        if (!even) s.z_ref(k, m) = prof.Z(k, s.x(m));
      }
    }
    double worst = 0.0;
    if (even) {
      const auto H = flow_t2_even_explicit(b);
      const auto R = chain_rhs_t2_corrected(s, order, form);
      for (int k = -(K - 2); k <= K - 2; ++k)
        for (int n = 1; n <= N; ++n) worst = std::max(worst, std::abs(H.w(k, n) / eps - R.u(k, 4 * n)));
    } else {
      const auto H = flow_t1_explicit(b);
      const auto R = continuum_t1_rhs(s, order, form);
      for (int k = -(K - 2); k <= K - 2; ++k)
        for (int n = 1; n <= N; ++n) {
          worst = std::max(worst, std::abs(H.w(k, n) - R.du.u(k, 4 * n)));
          worst = std::max(worst, std::abs(H.v(k, n) - R.dz.u(k, 4 * n)));
        }
    }
    rep.eps.push_back(eps);
    rep.residual.push_back(worst);
  }
  rep.slope = loglog_slope(rep.eps, rep.residual);
  return rep;
}

inline nlohmann::ordered_json residual_report_to_json(const ResidualReport& r) {
  nlohmann::ordered_json j;
  j["order"] = r.order;
  j["eps"] = r.eps;
  j["residual"] = r.residual;
  if (std::isfinite(r.slope))
    j["slope"] = r.slope;
  else
    j["slope"] = nullptr;
  return j;
}

}  // namespace pfc
