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

// Symmetric-ensemble moments, Pfaffians and tau functions.
//
// The skew inner product is <f, g> = int int f(x) g(y) sgn(y - x) w(x) w(y),
// i.e. the orientation for which tau_2 = mu_01 > 0 at t = 0.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <ostream>
#include <utility>
#include <vector>

#include "pfaffchain/errors.hpp"

namespace pfc {

struct CouplingVector {
  std::map<int, double> entries;
  bool even_only = false;

  CouplingVector with(int k, double value) const {
    CouplingVector c = *this;
    c.entries[k] = value;
    return c;
  }

  double get(int k) const {
    auto it = entries.find(k);
    return it == entries.end() ? 0.0 : it->second;
  }

  // Throws InputError unless the weight is integrable at infinity.
  void validate() const {
    int kmax = 0;
    for (const auto& [k, v] : entries) {
      if (k < 1) throw InputError(detail::cat("coupling index must be >= 1, got t_", k));
      if (even_only && k % 2 != 0)
        throw InputError(detail::cat("even-only coupling vector has odd key t_", k));
      if (!std::isfinite(v)) throw InputError(detail::cat("coupling t_", k, " is not finite"));
      if (v != 0.0) kmax = std::max(kmax, k);
    }
    if (kmax == 0) return;
    const double lead = get(kmax);
    const bool ok = (kmax % 2 == 0 && lead < 0.0) || (kmax <= 2 && -0.5 + get(2) < 0.0);
    if (!ok)
      throw InputError(detail::cat("integrability guard: leading coupling t_", kmax, " = ", lead,
                                   " makes the weight non-integrable"));
  }
};

enum class QuadratureScheme { tensor_gauss_legendre, adaptive };

struct QuadratureConfig {
  int nodes_per_axis = 200;
  double domain_radius = 10.0;
  QuadratureScheme scheme = QuadratureScheme::tensor_gauss_legendre;
  double tolerance = 1e-9;  // relative, between two refinement levels

  void validate() const {
    if (nodes_per_axis < 8) throw InputError("quadrature needs nodes_per_axis >= 8");
    if (!(domain_radius > 0.0)) throw InputError("quadrature needs domain_radius > 0");
    if (!(tolerance > 0.0)) throw InputError("quadrature tolerance must be positive");
  }
};

struct SkewMomentMatrix {
  int dim = 0;
  Eigen::MatrixXd entries;
  CouplingVector couplings;
  QuadratureConfig quad_meta;
  int nodes_used = 0;

  double operator()(int i, int j) const { return entries(i, j); }

  // header i,j,mu; one row per upper-triangle entry
  void write_csv(std::ostream& os) const {
    os << "i,j,mu\n";
    os.precision(17);
    for (int i = 0; i < dim; ++i)
      for (int j = i + 1; j < dim; ++j) os << i << ',' << j << ',' << entries(i, j) << '\n';
  }
};

namespace detail {

inline double weight_exponent(double x, const CouplingVector& t) {
  double e = -0.5 * x * x;
  for (const auto& [k, v] : t.entries)
    if (v != 0.0) e += v * std::pow(x, k);
  return e;
}

inline double weight_unchecked(double x, const CouplingVector& t) {
  const double e = weight_exponent(x, t);
  if (e > 700.0) throw WeightOverflow(detail::cat("weight overflow at x = ", x), x);
  return std::exp(e);
}

// Gauss-Legendre rule on [-1, 1] by Newton iteration on P_n.
inline const std::pair<std::vector<double>, std::vector<double>>& gauss_legendre(int n) {
  static std::mutex mu;
  static std::map<int, std::pair<std::vector<double>, std::vector<double>>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<double> x(n), w(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  return cache.emplace(n, std::make_pair(std::move(x), std::move(w))).first->second;
}

// Upper triangle of the moment block for 0 <= i, j < dim at one node count.
// The kernel sign jumps on the diagonal, so the inner integral is split at
// y = x and each triangle is integrated smoothly.
inline Eigen::MatrixXd moment_block(int dim, const CouplingVector& t, int nodes, double R) {
  const auto& [xi, wi] = gauss_legendre(nodes);
  Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(dim, dim);
  std::vector<double> G(dim), xp(dim), yp(dim);
  for (int a = 0; a < nodes; ++a) {
    const double x = R * xi[a];
    const double wx = R * wi[a] * weight_unchecked(x, t);
    if (wx == 0.0) continue;
    std::fill(G.begin(), G.end(), 0.0);
    for (int side = 0; side < 2; ++side) {
      const double lo = side == 0 ? x : -R, hi = side == 0 ? R : x;
      const double sgn = side == 0 ? 1.0 : -1.0;
      const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
      if (half <= 0.0) continue;
      for (int b = 0; b < nodes; ++b) {
        const double y = mid + half * xi[b];
        const double wy = sgn * half * wi[b] * weight_unchecked(y, t);
        double p = 1.0;
        for (int j = 0; j < dim; ++j, p *= y) G[j] += wy * p;
      }
    }
    double p = 1.0;
    for (int i = 0; i < dim; ++i, p *= x) xp[i] = p;
    for (int i = 0; i < dim; ++i)
      for (int j = i + 1; j < dim; ++j) mu(i, j) += wx * xp[i] * G[j];
  }
  for (int i = 0; i < dim; ++i)
    for (int j = i + 1; j < dim; ++j) mu(j, i) = -mu(i, j);
  return mu;
}

struct Mismatch {
  int i = -1, j = -1;
  double coarse = 0, fine = 0;
};

// Absolute moments a_i = int |x|^i w(x) dx on [-R, R]. The product a_i a_j
// bounds |mu_ij| and sets the scale of cancellation noise in it.
inline std::vector<double> absolute_moments(int dim, const CouplingVector& t, int nodes, double R) {
  const auto& [xi, wi] = gauss_legendre(nodes);
  std::vector<double> a(dim, 0.0);
  for (int b = 0; b < nodes; ++b) {
    const double x = R * xi[b];
    const double wx = R * wi[b] * weight_unchecked(x, t);
    double p = 1.0;
    for (int i = 0; i < dim; ++i, p *= std::abs(x)) a[i] += wx * p;
  }
  return a;
}

// Change between two levels, relative to max(1, |mu_ij|, a_i a_j).
inline Mismatch worst_change(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double tol,
                             const std::vector<double>& absm) {
  Mismatch m;
  double worst = 0.0;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = i + 1; j < a.cols(); ++j) {
      const double scale = std::max({1.0, std::abs(b(i, j)), absm[i] * absm[j]});
      const double d = std::abs(a(i, j) - b(i, j)) / scale;
      if (d > tol && d > worst) {
        worst = d;
        m = {i, j, a(i, j), b(i, j)};
      }
    }
  return m;
}

inline SkewMomentMatrix converged_block(int dim, const CouplingVector& t, const QuadratureConfig& q) {
  t.validate();
  q.validate();
  SkewMomentMatrix out;
  out.dim = dim;
  out.couplings = t;
  out.quad_meta = q;
  if (dim == 0) {
    out.entries = Eigen::MatrixXd(0, 0);
    return out;
  }
  int n = q.nodes_per_axis;
  Eigen::MatrixXd coarse = moment_block(dim, t, n, q.domain_radius);
  const auto absm = absolute_moments(dim, t, 2 * n, q.domain_radius);
  const int levels = q.scheme == QuadratureScheme::adaptive ? 8 : 1;
  for (int level = 0; level < levels; ++level) {
    const int n2 = q.scheme == QuadratureScheme::adaptive ? 2 * n : n + n / 2;
    Eigen::MatrixXd fine = moment_block(dim, t, n2, q.domain_radius);
    const Mismatch m = worst_change(coarse, fine, q.tolerance, absm);
    if (m.i < 0) {
      out.entries = std::move(fine);
      out.nodes_used = n2;
      return out;
    }
    if (level + 1 == levels)
      throw QuadratureError(detail::cat("quadrature did not converge for mu(", m.i, ",", m.j,
                                        "): ", m.coarse, " at ", n, " nodes vs ", m.fine,
                                        " at ", n2, " nodes"),
                            m.coarse, m.fine);
    coarse = std::move(fine);
    n = n2;
  }
  return out;  // unreachable
}

}  // namespace detail

inline double weight_eval(double x, const CouplingVector& t) {
  t.validate();
  return detail::weight_unchecked(x, t);
}

inline double moment_mu(int i, int j, const CouplingVector& t, const QuadratureConfig& q = {}) {
  if (i < 0 || j < 0) throw InputError("moment indices must be non-negative");
  t.validate();
  q.validate();
  if (i == j) return 0.0;
  const int lo = std::min(i, j), hi = std::max(i, j);
  const auto m = detail::converged_block(hi + 1, t, q);
  const double v = m.entries(lo, hi);
  return i < j ? v : -v;
}

inline SkewMomentMatrix moment_matrix(int n, const CouplingVector& t, const QuadratureConfig& q = {}) {
  if (n < 0) throw InputError("moment_matrix needs n >= 0");
  return detail::converged_block(2 * n, t, q);
}

// Cofactor expansion along the first row; the small-dimension oracle.
template <typename Derived>
typename Derived::Scalar pfaffian_cofactor(const Eigen::MatrixBase<Derived>& a) {
  using S = typename Derived::Scalar;
  const int n = static_cast<int>(a.rows());
  if (n % 2 != 0) throw InputError("pfaffian of an odd-dimensional matrix");
  if (n == 0) return S(1);
  if (n > 12) throw InputError("cofactor pfaffian is limited to dim <= 12");
  S sum = S(0);
  std::vector<int> keep;
  for (int j = 1; j < n; ++j) {
    if (a(0, j) == S(0)) continue;
    keep.clear();
    for (int r = 1; r < n; ++r)
      if (r != j) keep.push_back(r);
    Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> sub(n - 2, n - 2);
    for (int r = 0; r < n - 2; ++r)
      for (int c = 0; c < n - 2; ++c) sub(r, c) = a(keep[r], keep[c]);
    const S term = a(0, j) * pfaffian_cofactor(sub);
    sum += (j % 2 == 1) ? term : S(-term);
  }
  return sum;
}

// Parlett-Reid style skew tridiagonalization with partial pivoting.
template <typename Derived>
typename Derived::Scalar pfaffian_ltl(const Eigen::MatrixBase<Derived>& in) {
  using S = typename Derived::Scalar;
  Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> a = in;
  const int n = static_cast<int>(a.rows());
  if (n % 2 != 0) throw InputError("pfaffian of an odd-dimensional matrix");
  S pf = S(1);
  for (int k = 0; k + 1 < n; k += 2) {
    int kp = k + 1;
    for (int r = k + 2; r < n; ++r)
      if (std::abs(a(r, k)) > std::abs(a(kp, k))) kp = r;
    if (kp != k + 1) {
      a.row(k + 1).swap(a.row(kp));
      a.col(k + 1).swap(a.col(kp));
      pf = -pf;
    }
    if (a(k + 1, k) == S(0)) return S(0);
    pf *= a(k, k + 1);
    if (k + 2 < n) {
      const int m = n - k - 2;
      Eigen::Matrix<S, Eigen::Dynamic, 1> tau = a.row(k).segment(k + 2, m).transpose() / a(k, k + 1);
      Eigen::Matrix<S, Eigen::Dynamic, 1> col = a.col(k + 1).segment(k + 2, m);
      a.block(k + 2, k + 2, m, m) += tau * col.transpose() - col * tau.transpose();
    }
  }
  return pf;
}

template <typename Derived>
typename Derived::Scalar pfaffian(const Eigen::MatrixBase<Derived>& a) {
  const int n = static_cast<int>(a.rows());
  if (a.rows() != a.cols()) throw InputError("pfaffian of a non-square matrix");
  if (n % 2 != 0) throw InputError(detail::cat("pfaffian of odd dimension ", n));
  if (n == 0) return typename Derived::Scalar(1);
  const double scale = std::max(1.0, static_cast<double>(a.cwiseAbs().maxCoeff()));
  const double asym = static_cast<double>((a + a.transpose()).cwiseAbs().maxCoeff());
  if (asym > 1e-12 * scale)
    throw InputError(detail::cat("pfaffian input is not antisymmetric (|A + A^T| = ", asym, ")"));
  return n <= 8 ? pfaffian_cofactor(a) : pfaffian_ltl(a);
}

inline double pfaffian(const SkewMomentMatrix& m) { return pfaffian(m.entries); }

inline double tau_from_moments(int n, const CouplingVector& t, const QuadratureConfig& q = {}) {
  if (n == 0) return 1.0;  // empty Pfaffian
  return pfaffian(moment_matrix(n, t, q));
}

inline double log_selberg_tau_zero(int n) {
  if (n < 0) throw InputError("selberg product needs n >= 0");
  double s = 0.5 * n * std::log(std::numbers::pi);
  for (int k = 0; k < n; ++k) s += std::lgamma(2.0 * k + 1.0) - 2.0 * k * std::log(2.0);
  return s;
}

// pi^{n/2} prod_{k<n} 2^{-2k} (2k)!
inline double selberg_tau_zero(int n) {
  if (log_selberg_tau_zero(n) > 700.0)
    throw InputError(detail::cat("selberg product overflows double at n = ", n));
  double p = std::pow(std::numbers::pi, 0.5 * n);
  double fact = 1.0;  // (2k)!
  for (int k = 0; k < n; ++k) {
    if (k > 0) fact *= (2.0 * k - 1.0) * (2.0 * k);
    p *= fact * std::ldexp(1.0, -2 * k);
  }
  return p;
}

// Signed central-difference defect d mu_ij / d t_k - (mu_{i+k,j} + mu_{i,j+k}).
// Its leading term is (h^2 / 6) d^3 mu_ij / d t_k^3.
inline double moment_flow_defect(int i, int j, int k, const CouplingVector& t, double h,
                                 const QuadratureConfig& q = {}) {
  if (!(h > 0.0)) throw InputError("moment_flow_residual needs h > 0");
  if (k < 1) throw InputError("moment_flow_residual needs k >= 1");
  if (i < 0 || j < 0) throw InputError("moment indices must be non-negative");
  const CouplingVector tp = t.with(k, t.get(k) + h), tm = t.with(k, t.get(k) - h);
  tp.validate();
  tm.validate();
  const int dim = std::max(i, j) + k + 1;
  const auto mp = detail::converged_block(dim, tp, q);
  const auto mm = detail::converged_block(dim, tm, q);
  const auto m0 = detail::converged_block(dim, t, q);
  const double deriv = (mp(i, j) - mm(i, j)) / (2.0 * h);
  return deriv - (m0(i + k, j) + m0(i, j + k));
}

inline double moment_flow_residual(int i, int j, int k, const CouplingVector& t, double h,
                                   const QuadratureConfig& q = {}) {
  return std::abs(moment_flow_defect(i, j, k, t, h, q));
}

// Richardson combination of the defects at h and h/2; removes the h^2 term.
inline double moment_flow_residual_extrapolated(int i, int j, int k, const CouplingVector& t,
                                                double h, const QuadratureConfig& q = {}) {
  const double d1 = moment_flow_defect(i, j, k, t, h, q);
  const double d2 = moment_flow_defect(i, j, k, t, 0.5 * h, q);
  return std::abs((4.0 * d2 - d1) / 3.0);
}

}  // namespace pfc
