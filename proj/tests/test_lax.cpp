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
#include <random>
#include <sstream>

#include "pfaffchain/lax.hpp"

using namespace pfc;

namespace {

using RB = LaxBands<Rational>;

// Number of interior (band, site) entries where a and b differ exactly.
int interior_mismatches(const CommutatorResult<Rational>& c, const RB& e, bool check_v = true) {
  int bad = 0;
  for (int n = 1; n <= e.sites; ++n) {
    if (!c.in_interior(n)) continue;
    for (int k = -e.depth; k <= e.depth; ++k) {
      if (c.d.w(k, n) != e.w(k, n)) ++bad;
      if (check_v && c.d.v(k, n) != e.v(k, n)) ++bad;
    }
  }
  return bad;
}

}  // namespace

TEST(Bands, ClosureAndEvenInvariant) {
  auto b = LaxBands<double>::zeros(5, 2);
  b.w_ref(1, 3) = 2.5;
  EXPECT_EQ(b.w(1, 3), 2.5);
  EXPECT_EQ(b.w(3, 3), 0.0);
  EXPECT_EQ(b.w(1, 0), 0.0);
  EXPECT_EQ(b.w(1, 6), 0.0);
  auto e = LaxBands<double>::zeros(5, 2, true);
  EXPECT_THROW(e.v_ref(0, 1), InputError);
  e.periodic = true;
  e.w_ref(0, 1) = 7.0;
  EXPECT_EQ(e.w(0, 6), 7.0);
  EXPECT_EQ(e.w(0, -4), 7.0);
}

TEST(Assemble, ZeroBandsGiveAlternatingSuperdiagonal) {
  auto b = LaxBands<double>::zeros(4, 2);
  auto L = assemble_lax(b, 8);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      const double expect = (j == i + 1 && i % 2 == 0) ? 1.0 : 0.0;
      EXPECT_EQ(L(i, j), expect) << i << "," << j;
    }
}

TEST(Assemble, PositionsAndRoundTrip) {
  std::mt19937_64 rng(3);
  auto b = random_bands<Rational>(6, 3, rng);
  auto L = assemble_lax(b, 12);
  EXPECT_EQ(L(1, 2), b.w(0, 1));   // w0 on the even-row superdiagonal
  EXPECT_EQ(L(1, 1), b.v(0, 1));   // v0 and -v0 on the diagonal
  EXPECT_EQ(L(2, 2), -b.v(0, 1));
  EXPECT_EQ(L(2, 1), b.w(1, 1));   // w^1 on the first lower diagonal
  EXPECT_EQ(L(3, 1), b.v(1, 1));   // v^1 on the second
  EXPECT_EQ(L(3, 2), b.w(-1, 2));  // w^-1 on the first lower diagonal
  EXPECT_EQ(L(4, 2), b.v(-1, 2));
  auto r = disassemble_lax(L, 6, 3);
  for (int n = 1; n <= 6; ++n)
    for (int k = -3; k <= 3; ++k) {
      const auto [wr, wc] = w_position(k, n);
      if (wr < 12 && wc < 12) EXPECT_EQ(r.w(k, n), b.w(k, n)) << "w " << k << "," << n;
      const auto [vr, vc] = v_position(k, n);
      if (vr < 12 && vc < 12) EXPECT_EQ(r.v(k, n), b.v(k, n)) << "v " << k << "," << n;
    }
}

TEST(Assemble, EvenPattern) {
  std::mt19937_64 rng(4);
  auto b = random_bands<Rational>(5, 3, rng, true);
  auto L = assemble_lax(b, 10);
  for (int i = 0; i < 10; ++i) {
    EXPECT_EQ(L(i, i), 0);
    for (int j = 0; j < i; ++j)
      if ((i - j) % 2 == 0) EXPECT_EQ(L(i, j), 0) << i << "," << j;
  }
}

TEST(Assemble, Errors) {
  auto b = LaxBands<double>::zeros(3, 1);
  EXPECT_THROW(assemble_lax(b, 5), InputError);
  EXPECT_THROW(assemble_lax(b, 8), InputError);
}

TEST(Projection, Identities) {
  Dense<Rational> I(4);
  for (int i = 0; i < 4; ++i) I(i, i) = 1;
  EXPECT_EQ(project_t(I), I);

  std::mt19937_64 rng(9);
  Dense<Rational> A(6);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) A(i, j) = random_rational(rng);
  auto P = project_t(A);
  EXPECT_EQ(project_t(P), P);
  auto X = A - P;
  EXPECT_EQ(X, jxtj(X));  // the complement is symplectic
  EXPECT_EQ(project_t(X), Dense<Rational>(6));
  EXPECT_EQ(P + X, A);
  EXPECT_THROW(project_t(Dense<Rational>(3)), InputError);
}

TEST(Projection, LowerQShapeIsFixed) {
  std::mt19937_64 rng(10);
  Dense<Rational> Q(6);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j <= i; ++j) Q(i, j) = random_rational(rng);
  for (int r = 0; r < 3; ++r) {
    Q(2 * r + 1, 2 * r) = 0;
    Q(2 * r + 1, 2 * r + 1) = Q(2 * r, 2 * r);
  }
  EXPECT_EQ(project_t(Q), Q);
}

TEST(Flows, T1PointOracles) {
  std::mt19937_64 rng(12);
  auto b = random_bands<Rational>(8, 4, rng);
  auto d = flow_t1_explicit(b);
  for (int n = 1; n <= 8; ++n) EXPECT_EQ(d.v(0, n), b.w(0, n) * b.w(1, n));
  auto g = random_bands<Rational>(8, 4, rng, true);
  auto dg = flow_t1_explicit(g);
  for (int n = 1; n <= 8; ++n) EXPECT_EQ(dg.w(0, n), 0);
  auto z = flow_t1_explicit(RB::zeros(6, 3));
  for (int n = 1; n <= 6; ++n)
    for (int k = -3; k <= 3; ++k) EXPECT_EQ(z.w(k, n), 0);
}

TEST(Flows, T2PointOracles) {
  std::mt19937_64 rng(13);
  auto b = random_bands<Rational>(8, 4, rng);
  auto d = flow_t2_explicit(b);
  for (int n = 1; n <= 8; ++n) EXPECT_EQ(d.v(0, n), b.w(0, n) * (b.v(1, n) + b.v(-1, n)));
}

TEST(Flows, CommutatorMatchesT1) {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 4; ++rep) {
    auto b = random_bands<Rational>(18, 4, rng);
    auto c = lax_rhs_commutator(b, 1, 36);
    EXPECT_EQ(interior_mismatches(c, flow_t1_explicit(b)), 0);
  }
}

TEST(Flows, CommutatorMatchesT2) {
  std::mt19937_64 rng(22);
  for (int rep = 0; rep < 4; ++rep) {
    auto b = random_bands<Rational>(20, 4, rng);
    auto c = lax_rhs_commutator(b, 2, 40);
    EXPECT_EQ(interior_mismatches(c, flow_t2_explicit(b)), 0);
  }
}

TEST(Flows, PrintedVariantsDifferFromCommutator) {
  std::mt19937_64 rng(23);
  auto b = random_bands<Rational>(20, 4, rng);
  auto c1 = lax_rhs_commutator(b, 1, 40);
  auto c2 = lax_rhs_commutator(b, 2, 40);
  EXPECT_GT(interior_mismatches(c1, flow_t1_explicit(b, FlowForm::printed)), 0);
  EXPECT_GT(interior_mismatches(c2, flow_t2_explicit(b, FlowForm::printed)), 0);
}

TEST(Flows, EvenReduction) {
  std::mt19937_64 rng(24);
  auto b = random_bands<Rational>(20, 4, rng, true);
  auto e = flow_t2_even_explicit(b);
  auto full = flow_t2_explicit(b);
  for (int n = 1; n <= 20; ++n)
    for (int k = -4; k <= 4; ++k) {
      EXPECT_EQ(e.w(k, n), full.w(k, n)) << k << "," << n;
      EXPECT_EQ(full.v(k, n), 0);
    }
  auto c = lax_rhs_commutator(b, 2, 40);
  EXPECT_EQ(interior_mismatches(c, e), 0);  // includes v == 0 on the interior
  EXPECT_THROW(flow_t2_even_explicit(random_bands<Rational>(6, 2, rng)), InputError);
}

TEST(Flows, HomogeneousEvenStateIsFixed) {
  auto b = RB::zeros(16, 3, true);
  for (int n = 1; n <= 16; ++n)
    for (int k = -3; k <= 3; ++k) b.w_ref(k, n) = Rational(k + 5, 3);
  b.periodic = true;
  auto e = flow_t2_even_explicit(b);
  for (int n = 1; n <= 16; ++n)
    for (int k = -3; k <= 3; ++k) EXPECT_EQ(e.w(k, n), 0) << k;
  b.periodic = false;
  auto c = lax_rhs_commutator(b, 2, 32);
  for (int n = 1; n <= 16; ++n)
    if (c.in_interior(n))
      for (int k = -3; k <= 3; ++k) EXPECT_EQ(c.d.w(k, n), 0);
}

TEST(Flows, TruncationTooTight) {
  auto b = RB::zeros(4, 3);
  EXPECT_THROW(lax_rhs_commutator(b, 2, 6), InputError);
  EXPECT_THROW(lax_rhs_commutator(b, 2, 8), InputError);  // empty interior
}

TEST(Factorize, TrivialCases) {
  Eigen::MatrixXd J = symplectic_j(6);
  auto f = skew_factorize(J);
  EXPECT_LE((f.Q - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-15);
  auto g = skew_factorize(4.0 * J);
  EXPECT_LE((g.Q - 0.5 * Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Factorize, MomentMatrixAndUniqueness) {
  auto m = moment_matrix(4, CouplingVector{}, QuadratureConfig{});
  auto f = skew_factorize(m);
  Eigen::MatrixXd J = symplectic_j(8);
  EXPECT_LE((f.Q * m.entries * f.Q.transpose() - J).cwiseAbs().maxCoeff(), 1e-9);
  for (int r = 0; r < 4; ++r) {
    EXPECT_GT(f.Q(2 * r, 2 * r), 0.0);
    EXPECT_EQ(f.Q(2 * r, 2 * r), f.Q(2 * r + 1, 2 * r + 1));
    EXPECT_EQ(f.Q(2 * r + 1, 2 * r), 0.0);
  }
  auto gs = skew_factorize_gram_schmidt(m.entries);
  EXPECT_LE((gs.Q - f.Q).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Factorize, SingularMinorNamed) {
  Eigen::MatrixXd m = symplectic_j(4);
  m(0, 1) = 0.0;
  m(1, 0) = 0.0;
  try {
    skew_factorize(m);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("2x2"), std::string::npos) << e.what();
  }
}

TEST(Gaussian, InitialBands) {
  auto b = initial_bands_gaussian(5, 3, QuadratureConfig{});
  EXPECT_TRUE(b.even_reduced);
  EXPECT_NEAR(b.w(0, 1), std::sqrt(2.0) / 2.0, 1e-9);
  for (int n = 1; n <= 4; ++n) {
    EXPECT_NEAR(b.w(0, n) * b.w(0, n), 2.0 * n * (2 * n - 1) / 4.0, 1e-8) << n;
    EXPECT_EQ(b.v(0, n), 0.0);
  }
}

TEST(Integrate, HomogeneousFixedPoint) {
  auto b = LaxBands<double>::zeros(12, 2, true);
  b.periodic = true;
  for (int n = 1; n <= 12; ++n)
    for (int k = -2; k <= 2; ++k) b.w_ref(k, n) = 0.25 * (k + 3);
  auto traj = integrate_flow(b, Flow{FlowKind::t2_even}, 0.01, 20);
  ASSERT_EQ(traj.size(), 21u);
  for (int n = 1; n <= 12; ++n)
    for (int k = -2; k <= 2; ++k) EXPECT_NEAR(traj.back().w(k, n), b.w(k, n), 1e-12);
}

TEST(Integrate, FirstOrderConsistency) {
  std::mt19937_64 rng(31);
  auto b = random_bands<double>(10, 3, rng);
  auto d = flow_t1_explicit(b);
  double prev = 0.0;
  for (double dt : {1e-3, 5e-4}) {
    auto traj = integrate_flow(b, Flow{FlowKind::t1}, dt, 1);
    double err = 0.0;
    for (int n = 1; n <= 10; ++n)
      for (int k = -3; k <= 3; ++k)
        err = std::max(err, std::abs((traj[1].w(k, n) - b.w(k, n)) / dt - d.w(k, n)));
    if (prev > 0.0) EXPECT_NEAR(prev / err, 2.0, 0.1);
    prev = err;
  }
  EXPECT_THROW(integrate_flow(b, Flow{FlowKind::t1}, -1.0, 1), InputError);
}

TEST(Integrate, NonFiniteReported) {
  auto b = LaxBands<double>::zeros(6, 2);
  b.w_ref(0, 3) = 1e200;
  b.w_ref(1, 3) = 1e200;
  EXPECT_THROW(integrate_flow(b, Flow{FlowKind::t1}, 1.0, 3), NumericalError);
}

TEST(Integrate, FlowsCommute) {
  std::mt19937_64 rng(32);
  auto b = random_bands<double>(24, 3, rng, true);
  for (int n = 1; n <= 24; ++n)
    for (int k = -3; k <= 3; ++k) b.w_ref(k, n) *= 0.2;
  auto defect = [&](double dt) {
    auto a = integrate_flow(b, Flow{FlowKind::commutator, 2}, dt, 1).back();
    a = integrate_flow(a, Flow{FlowKind::commutator, 4}, dt, 1).back();
    auto c = integrate_flow(b, Flow{FlowKind::commutator, 4}, dt, 1).back();
    c = integrate_flow(c, Flow{FlowKind::commutator, 2}, dt, 1).back();
    double e = 0.0;
    for (int n = 9; n <= 12; ++n)
      for (int k = -3; k <= 3; ++k) e = std::max(e, std::abs(a.w(k, n) - c.w(k, n)));
    return e;
  };
  const double e1 = defect(1e-2), e2 = defect(5e-3);
  EXPECT_LT(e2, e1 / 3.0);  // O(dt^2) or better
}

TEST(BandIo, JsonRoundTripAndCsv) {
  std::mt19937_64 rng(33);
  auto b = random_bands<double>(3, 1, rng);
  auto j = bands_to_json(b);
  EXPECT_EQ(j["N"], 3);
  EXPECT_EQ(j["K"], 1);
  auto r = bands_from_json(j);
  for (int n = 1; n <= 3; ++n)
    for (int k = -1; k <= 1; ++k) {
      EXPECT_EQ(r.w(k, n), b.w(k, n));
      EXPECT_EQ(r.v(k, n), b.v(k, n));
    }
  auto bad = j;
  bad["even"] = true;
  EXPECT_THROW(bands_from_json(bad), InputError);  // nonzero v in an even state
  std::ostringstream os;
  write_trajectory_csv(os, {b, b});
  EXPECT_EQ(os.str().substr(0, 23), "step,band,k,n,value\n0,w");
}
