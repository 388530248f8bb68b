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

#include <fstream>
#include <random>

#include "pfaffchain/chain.hpp"
#include "pfaffchain/integrability.hpp"

using namespace pfc;

namespace {

std::string data_path(const std::string& name) { return std::string(PFAFFCHAIN_DATA) + "/" + name; }

RationalPoint point(int W, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return RationalPoint::random(W, rng);
}

}  // namespace

// --- rational helpers ------------------------------------------------------

TEST(Rational, CanonicalAndParse) {
  Rational a(6, -4);
  a.canonicalize();
  EXPECT_EQ(to_string(a), "-3/2");
  EXPECT_GT(a.get_den(), 0);
  EXPECT_EQ(parse_rational("10/-4"), Rational(-5, 2));
  EXPECT_EQ(parse_rational("7"), Rational(7));
  EXPECT_THROW(parse_rational("1/0"), InputError);
  EXPECT_THROW(parse_rational("x"), InputError);
}

TEST(Rational, RandomRanges) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 500; ++t) {
    const Rational r = random_rational(rng);
    EXPECT_LE(abs(r), 9);
    EXPECT_LE(r.get_den(), 7);
    EXPECT_NE(random_nonzero_rational(rng), 0);
  }
}

TEST(RationalPoint, WindowAndNonzeroU0) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 200; ++t) {
    auto p = RationalPoint::random(4, rng);
    EXPECT_NE(p(0), 0);
    EXPECT_EQ(p.window, 4);
  }
  auto p = RationalPoint::random(4, rng);
  EXPECT_THROW(p(5), WindowTooSmall);
  EXPECT_NO_THROW(p(-4));
}

// --- specs -------------------------------------------------------------------

TEST(PfaffSpec, RowsMatchChainMatrix) {
  const auto spec = pfaff_chain_spec();
  const auto p = point(8, 5);
  for (int k = -6; k <= 6; ++k) {
    std::map<int, Rational> u;
    for (int j = -8; j <= 8; ++j) u[j] = p(j);
    const auto expect = chain_matrix_row(u, k);
    const auto got = spec.row(k, p);
    for (const auto& [j, v] : expect) {
      const auto it = got.find(j);
      EXPECT_EQ(it == got.end() ? Rational(0) : it->second, v) << "k=" << k << " j=" << j;
    }
    for (const auto& [j, v] : got) EXPECT_EQ(expect.count(j) ? expect.at(j) : Rational(0), v);
  }
}

TEST(PfaffSpec, PrintedPartials) {
  const auto spec = pfaff_chain_spec();
  const auto p = point(6, 9);
  EXPECT_EQ(spec.partial(0, 0, 0, p), p(1));
  EXPECT_EQ(spec.partial(0, 0, 1, p), p(0));
  for (int k : {-4, -2, 2, 4}) {
    for (int q = -6; q <= 6; ++q) EXPECT_EQ(spec.partial(k, k + 1, q, p), q == 0 ? 1 : 0) << k << " " << q;
  }
  // a^{-1}_0 = u^{-2} + 2u^0 + u^1 u^{-1}
  EXPECT_EQ(spec.partial(-1, 0, 0, p), 2);
  EXPECT_EQ(spec.partial(-1, 0, -1, p), p(1));
}

TEST(PfaffSpec, PartialsMatchFiniteDifferences) {
  const auto spec = pfaff_chain_spec();
  const auto p = point(8, 21);
  const double h = 1e-3;  // entries are at most quadratic: central differences are exact up to rounding
  for (int k = -5; k <= 5; ++k)
    for (int q = -7; q <= 7; ++q) {
      auto rowd = [&](double shift) {
        return detail::chain_row<double>(
            [&](int j) { return to_double(p(j)) + (j == q ? shift : 0.0); }, k);
      };
      const auto plus = rowd(h), minus = rowd(-h);
      for (const auto& [j, v] : plus) {
        const double fd = (v - minus.at(j)) / (2 * h);
        EXPECT_NEAR(to_double(spec.partial(k, j, q, p)), fd, 1e-9) << "k=" << k << " j=" << j << " q=" << q;
      }
    }
}

TEST(JsonSpec, PfaffTableAgreesWithHandCoded) {
  const auto table = load_spec(data_path("pfaff_chain.json"));
  const auto hand = pfaff_chain_spec();
  EXPECT_EQ(table.stencil, hand.stencil);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto p = point(9, 100 + s);
    for (int k = -6; k <= 6; ++k) {
      for (int j = -7; j <= 7; ++j) {
        const auto a = table.row(k, p), b = hand.row(k, p);
        EXPECT_EQ(a.count(j) ? a.at(j) : Rational(0), b.count(j) ? b.at(j) : Rational(0));
        for (int q = -8; q <= 8; ++q) EXPECT_EQ(table.partial(k, j, q, p), hand.partial(k, j, q, p));
      }
    }
  }
}

TEST(JsonSpec, Errors) {
  EXPECT_THROW(spec_from_json(nlohmann::json::parse(R"({"stencil":1})")), InputError);
  EXPECT_THROW(spec_from_json(nlohmann::json::parse(
                   R"({"name":"x","stencil":1,"rules":[{"rows":[null,null],"entries":[{"col":"k+3","terms":[{"coef":1,"vars":["0"]}]}]}]})"))
                   .row(2, point(8, 1)),
               InputError);
  EXPECT_THROW(spec_from_json(nlohmann::json::parse(
                   R"({"name":"x","stencil":1,"rules":[{"rows":[null,null],"entries":[{"col":"k","terms":[{"coef":"1/0","vars":[]}]}]}]})")),
               InputError);
  EXPECT_THROW(load_spec("no-such-spec"), InputError);
  EXPECT_NO_THROW(load_spec("pfaff"));
  EXPECT_NO_THROW(load_spec("diagonal"));
}

// --- Nijenhuis ---------------------------------------------------------------

TEST(Nijenhuis, Antisymmetric) {
  const auto spec = pfaff_chain_spec();
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> idx(-5, 5);
  for (int t = 0; t < 40; ++t) {
    const auto p = RationalPoint::random(8, rng);
    const int i = idx(rng), j = idx(rng), k = idx(rng);
    EXPECT_EQ(nijenhuis(spec, i, j, k, p) + nijenhuis(spec, i, k, j, p), 0);
  }
}

TEST(Nijenhuis, RowZeroVanishes) {
  const auto spec = pfaff_chain_spec();
  const auto p = point(10, 4);
  for (int j = -8; j <= 8; ++j)
    for (int k = -8; k <= 8; ++k) EXPECT_EQ(nijenhuis(spec, 0, j, k, p), 0) << j << "," << k;
}

TEST(Nijenhuis, PrintedSample) {
  const auto spec = pfaff_chain_spec();
  auto p = RationalPoint::zeros(6);
  p.at(0) = 1;
  EXPECT_EQ(nijenhuis(spec, 1, 0, 1, p), -4);
  p.at(2) = Rational(1, 3);
  EXPECT_EQ(nijenhuis(spec, 1, 0, 1, p), Rational(-14, 3));
}

TEST(Nijenhuis, WindowTooSmall) {
  const auto spec = pfaff_chain_spec();
  const auto p = point(4, 2);
  try {
    nijenhuis(spec, 3, 0, 1, p);
    FAIL();
  } catch (const WindowTooSmall& e) {
    EXPECT_EQ(e.required, 5);
  }
  EXPECT_EQ(nijenhuis_window(spec, 3, 0, 1), 5);
  EXPECT_EQ(haantjes_window(spec, 3, 0, 1), 7);
}

TEST(Nijenhuis, OracleTable) {
  for (std::uint64_t s = 0; s < 4; ++s) {
    const auto rep = nijenhuis_oracle_check(point(10, 40 + s));
    EXPECT_TRUE(rep.mismatches.empty()) << rep.mismatches.front().entry;
    EXPECT_GT(rep.entries_checked, 100);
    EXPECT_GT(rep.zeros_checked, 1000);
    EXPECT_EQ(rep.open_question.entry, "N^-1_{0,-1}");
    EXPECT_TRUE(rep.open_question.matches);
  }
  EXPECT_THROW(nijenhuis_oracle_check(point(9, 1)), InputError);
}

TEST(Nijenhuis, OracleSpotChecks) {
  const auto spec = pfaff_chain_spec();
  const auto p = point(10, 77);
  EXPECT_EQ(nijenhuis(spec, 3, 0, 3, p), -4 * p(0));
  EXPECT_EQ(nijenhuis(spec, -1, -1, 1, p), p(0) * p(-1));
  EXPECT_EQ(nijenhuis(spec, 2, 2, 3, p), 0);
}

TEST(Nijenhuis, OracleDetectsWrongTable) {
  // The oracle must have power: a mutated matrix produces mismatches.
  const auto mutated = load_spec(data_path("mutated_chain.json"));
  const auto rep = nijenhuis_oracle_check(point(10, 3), mutated);
  EXPECT_FALSE(rep.mismatches.empty());
}

// --- Haantjes ----------------------------------------------------------------

TEST(Haantjes, VanishesForPfaffChain) {
  const auto rep = haantjes_scan(pfaff_chain_spec(), 4, 3, 17);
  EXPECT_EQ(rep.window, 8);
  EXPECT_EQ(rep.points, 3);
  EXPECT_TRUE(rep.nonzero.empty());
}

TEST(Haantjes, AntisymmetricOnMutated) {
  const auto spec = load_spec(data_path("mutated_chain.json"));
  const auto p = point(10, 6);
  int nonzero = 0;
  for (int i = -3; i <= 3; ++i)
    for (int j = -3; j <= 3; ++j)
      for (int k = -3; k <= 3; ++k) {
        const Rational a = haantjes(spec, i, j, k, p);
        EXPECT_EQ(a + haantjes(spec, i, k, j, p), 0);
        nonzero += a != 0;
      }
  EXPECT_GT(nonzero, 0);
}

TEST(Haantjes, MutatedScanFlagsEntries) {
  const auto rep = haantjes_scan(load_spec(data_path("mutated_chain.json")), 3, 1, 5);
  EXPECT_FALSE(rep.nonzero.empty());
  const auto j = haantjes_scan_to_json(rep);
  EXPECT_EQ(j["nonzero_count"].get<int>(), static_cast<int>(rep.nonzero.size()));
  EXPECT_TRUE(j["haantjes_nonzero"].is_array());
}

TEST(Haantjes, ControlSpecsVanish) {
  for (const auto& spec : {diagonal_control_spec(), constant_control_spec()}) {
    const auto p = point(10, 12);
    for (int i = -3; i <= 3; ++i)
      for (int j = -3; j <= 3; ++j)
        for (int k = -3; k <= 3; ++k) {
          EXPECT_EQ(haantjes(spec, i, j, k, p), 0) << spec.name;
          if (spec.name == "constant") EXPECT_EQ(nijenhuis(spec, i, j, k, p), 0);
        }
  }
}

TEST(Haantjes, SparsityEnvelope) {
  // Outside {0, +-1, +-2, 3, i, i+-1, i+-2, i+-3} the chain components vanish
  // structurally; inside they vanish by cancellation.
  const auto spec = pfaff_chain_spec();
  const auto p = point(14, 31);
  TensorEngine eng(spec, p);
  for (int i : {-5, 5})
    for (int j = -9; j <= 9; ++j)
      for (int k = -9; k <= 9; ++k) EXPECT_EQ(eng.H(i, j, k), 0);
}

TEST(Haantjes, ScanJsonDeterministic) {
  const auto a = haantjes_scan_to_json(haantjes_scan(pfaff_chain_spec(), 3, 2, 9)).dump();
  const auto b = haantjes_scan_to_json(haantjes_scan(pfaff_chain_spec(), 3, 2, 9)).dump();
  EXPECT_EQ(a, b);
  EXPECT_NE(a.find("\"haantjes_nonzero\":[]"), std::string::npos);
}
