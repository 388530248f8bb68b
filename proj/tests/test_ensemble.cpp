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

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "pfaffchain/ensemble.hpp"

using namespace pfc;

namespace {

const double kPi = std::numbers::pi;

Eigen::MatrixXd random_skew(int dim, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = i + 1; j < dim; ++j) {
      m(i, j) = d(rng);
      m(j, i) = -m(i, j);
    }
  return m;
}

}  // namespace

TEST(Weight, GaussianOracles) {
  const CouplingVector zero;
  EXPECT_EQ(weight_eval(0.0, zero), 1.0);
  for (double x : {0.3, 1.7, 4.2}) EXPECT_EQ(weight_eval(x, zero), weight_eval(-x, zero));
  EXPECT_NEAR(weight_eval(1.0, CouplingVector{}.with(2, -0.1)), std::exp(-0.6), 1e-15);
  EXPECT_NEAR(std::exp(-0.6), 0.548812, 1e-6);
}

TEST(Weight, IntegrabilityGuard) {
  EXPECT_THROW(CouplingVector{}.with(3, 0.1).validate(), InputError);
  EXPECT_THROW(CouplingVector{}.with(2, 0.6).validate(), InputError);
  EXPECT_THROW(CouplingVector{}.with(4, 0.01).validate(), InputError);
  EXPECT_NO_THROW(CouplingVector{}.with(1, 0.3).validate());
  EXPECT_NO_THROW(CouplingVector{}.with(2, -0.05).validate());
  EXPECT_NO_THROW(CouplingVector{}.with(3, 0.1).with(4, -0.2).validate());
  CouplingVector ev;
  ev.even_only = true;
  EXPECT_THROW(ev.with(1, 0.1).validate(), InputError);
  EXPECT_THROW(CouplingVector{}.with(0, 0.1).validate(), InputError);
}

TEST(Weight, Overflow) {
  CouplingVector t = CouplingVector{}.with(2, -0.01).with(1, 80.0);
  EXPECT_THROW(weight_eval(10.0, t), WeightOverflow);
}

TEST(Moments, GaussianClosedForms) {
  const CouplingVector zero;
  const QuadratureConfig q;
  EXPECT_EQ(moment_mu(2, 2, zero, q), 0.0);
  EXPECT_NEAR(moment_mu(0, 2, zero, q), 0.0, 1e-12);
  // orientation sgn(y - x) gives the positive sign
  EXPECT_NEAR(moment_mu(0, 1, zero, q), 2.0 * std::sqrt(kPi), 1e-10);
  EXPECT_EQ(moment_mu(1, 0, zero, q), -moment_mu(0, 1, zero, q));
  EXPECT_NEAR(2.0 * std::sqrt(kPi), 3.544908, 1e-6);
}

TEST(Moments, MatrixStructure) {
  const QuadratureConfig q;
  auto m1 = moment_matrix(1, CouplingVector{}, q);
  ASSERT_EQ(m1.dim, 2);
  EXPECT_EQ(m1.entries(0, 0), 0.0);
  EXPECT_NEAR(m1.entries(0, 1), 2.0 * std::sqrt(kPi), 1e-10);
  EXPECT_EQ(m1.entries(1, 0), -m1.entries(0, 1));

  CouplingVector ev;
  ev.even_only = true;
  ev = ev.with(2, -0.05).with(4, -0.01);
  auto m = moment_matrix(3, ev, q);
  Eigen::MatrixXd sum = m.entries + m.entries.transpose();
  EXPECT_EQ(sum.cwiseAbs().maxCoeff(), 0.0);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j)
      if ((i + j) % 2 == 0) EXPECT_NEAR(m.entries(i, j), 0.0, 1e-10) << i << "," << j;
}

TEST(Moments, AdaptiveSchemeAgrees) {
  QuadratureConfig a;
  a.scheme = QuadratureScheme::adaptive;
  a.nodes_per_axis = 40;
  EXPECT_NEAR(moment_mu(1, 2, CouplingVector{}.with(2, -0.05), a),
              moment_mu(1, 2, CouplingVector{}.with(2, -0.05), QuadratureConfig{}), 1e-9);
}

TEST(Moments, ConfigValidation) {
  QuadratureConfig q;
  q.nodes_per_axis = 4;
  EXPECT_THROW(moment_mu(0, 1, CouplingVector{}, q), InputError);
  q = QuadratureConfig{};
  q.domain_radius = -1.0;
  EXPECT_THROW(moment_mu(0, 1, CouplingVector{}, q), InputError);
}

TEST(Moments, NonConvergenceCarriesEstimates) {
  QuadratureConfig q;
  q.nodes_per_axis = 8;
  q.domain_radius = 60.0;
  try {
    moment_matrix(3, CouplingVector{}, q);
    FAIL() << "expected non-convergence";
  } catch (const QuadratureError& e) {
    EXPECT_NE(e.coarse, e.fine);
  }
}

TEST(Pfaffian, ClosedForms) {
  Eigen::MatrixXd a(2, 2);
  a << 0, 3, -3, 0;
  EXPECT_EQ(pfaffian(a), 3.0);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(4, 4);
  double up[6] = {1, 2, 3, 4, 5, 6};
  int c = 0;
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) {
      b(i, j) = up[c++];
      b(j, i) = -b(i, j);
    }
  EXPECT_EQ(pfaffian(b), 8.0);
  EXPECT_EQ(pfaffian_cofactor(b), 8.0);
  EXPECT_EQ(pfaffian(Eigen::MatrixXd(0, 0)), 1.0);
}

TEST(Pfaffian, DeterminantOracle) {
  std::mt19937_64 rng(11);
  for (int dim = 2; dim <= 12; dim += 2) {
    for (int rep = 0; rep < 10; ++rep) {
      auto m = random_skew(dim, rng);
      double pf = pfaffian(m);
      double det = m.determinant();
      EXPECT_NEAR(pf * pf, det, 1e-10 * std::abs(det)) << "dim " << dim;
      double ltl = pfaffian_ltl(m);
      EXPECT_NEAR(ltl * ltl, det, 1e-10 * std::abs(det)) << "dim " << dim;
      if (dim <= 8) EXPECT_NEAR(ltl, pfaffian_cofactor(m), 1e-12 * std::max(1.0, std::abs(ltl)));
    }
  }
}

TEST(Pfaffian, RowScaling) {
  std::mt19937_64 rng(5);
  auto m = random_skew(6, rng);
  double base = pfaffian(m);
  auto s = m;
  s.row(2) *= 1.75;
  s.col(2) *= 1.75;
  EXPECT_NEAR(pfaffian(s), 1.75 * base, 1e-13);
}

TEST(Pfaffian, InputErrors) {
  EXPECT_THROW(pfaffian(Eigen::MatrixXd::Zero(3, 3)), InputError);
  Eigen::MatrixXd a(2, 2);
  a << 0, 1, 1, 0;
  EXPECT_THROW(pfaffian(a), InputError);
}

TEST(Tau, EmptyAndTwoByTwo) {
  const QuadratureConfig q;
  EXPECT_EQ(tau_from_moments(0, CouplingVector{}, q), 1.0);
  EXPECT_NEAR(tau_from_moments(1, CouplingVector{}, q), moment_mu(0, 1, CouplingVector{}, q), 1e-14);
  EXPECT_GT(tau_from_moments(1, CouplingVector{}, q), 0.0);
}

TEST(Tau, SelbergRatioFromQuadrature) {
  const QuadratureConfig q;
  std::vector<double> tau;
  for (int n = 0; n <= 4; ++n) tau.push_back(tau_from_moments(n, CouplingVector{}, q));
  EXPECT_NEAR(tau[2] * tau[0] / (tau[1] * tau[1]), 0.5, 1e-6 * 0.5);
  for (int n = 1; n <= 3; ++n) {
    double ratio = tau[n + 1] * tau[n - 1] / (tau[n] * tau[n]);
    double expect = 0.25 * (2 * n) * (2 * n - 1);
    EXPECT_NEAR(ratio, expect, 1e-6 * expect) << "n=" << n;
  }
}

TEST(Selberg, ProductValues) {
  EXPECT_EQ(selberg_tau_zero(0), 1.0);
  EXPECT_NEAR(selberg_tau_zero(1), std::sqrt(kPi), 1e-15);
  EXPECT_NEAR(selberg_tau_zero(2), kPi / 2.0, 1e-14);
  EXPECT_NEAR(selberg_tau_zero(3), 0.75 * std::pow(kPi, 1.5), 1e-13);
  EXPECT_NEAR(selberg_tau_zero(1), 1.772454, 1e-6);
}

TEST(Selberg, RatioLaw) {
  for (int n = 1; n <= 10; ++n) {
    double r = selberg_tau_zero(n + 1) * selberg_tau_zero(n - 1) /
               (selberg_tau_zero(n) * selberg_tau_zero(n));
    double e = 0.25 * (2 * n) * (2 * n - 1);
    EXPECT_NEAR(r, e, 1e-12 * e);
  }
  EXPECT_THROW(selberg_tau_zero(200), InputError);
  EXPECT_TRUE(std::isfinite(log_selberg_tau_zero(200)));
}

TEST(MomentFlow, Residuals) {
  const QuadratureConfig q;
  auto t = CouplingVector{}.with(2, -0.05);
  EXPECT_LE(moment_flow_residual(2, 2, 1, t, 1e-3, q), 1e-12);
  CouplingVector ev;
  ev.even_only = true;
  ev = ev.with(2, -0.05);
  EXPECT_LE(moment_flow_residual(1, 3, 2, ev, 1e-3, q), 1e-9);
  EXPECT_THROW(moment_flow_residual(0, 1, 2, t, -1.0, q), InputError);
}

// At h = 1e-3 the (0,1,2) residual is 4.0e-5: pure central-difference
// truncation, so it quarters when h halves and vanishes under extrapolation.
TEST(MomentFlow, ResidualIsSecondOrderTruncation) {
  const QuadratureConfig q;
  auto t = CouplingVector{}.with(2, -0.05);
  const double r1 = moment_flow_residual(0, 1, 2, t, 1e-3, q);
  const double r2 = moment_flow_residual(0, 1, 2, t, 5e-4, q);
  EXPECT_GT(r1, 1e-5);
  EXPECT_NEAR(r1 / r2, 4.0, 0.05);
  EXPECT_LE(moment_flow_residual_extrapolated(0, 1, 2, t, 1e-3, q), 1e-8);
}
