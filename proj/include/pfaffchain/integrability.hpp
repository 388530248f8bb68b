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

// Exact Nijenhuis and Haantjes tensors of chain-class matrices.
//
// Chain-class contract for a spec with stencil s: the nonzero columns of row i
// lie in {0, 1} U [i-s, i+s], and every entry of row i depends only on u^p with
// p in the same set. All repeated-index ranges below follow from that.

#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "pfaffchain/errors.hpp"
#include "pfaffchain/rational.hpp"

namespace pfc {

struct WindowTooSmall : InputError {
  int required;
  WindowTooSmall(const std::string& what, int need) : InputError(what), required(need) {}
};

// Values u^k for k in [-window, window].
struct RationalPoint {
  int window = 0;
  std::vector<Rational> values;

  static RationalPoint zeros(int W) {
    if (W < 0) throw InputError("window must be >= 0");
    RationalPoint p;
    p.window = W;
    p.values.assign(2 * W + 1, Rational(0));
    return p;
  }
  // Numerators in [-9, 9], denominators in [1, 7]; u^0 redrawn until nonzero.
  static RationalPoint random(int W, std::mt19937_64& rng) {
    auto p = zeros(W);
    for (int k = -W; k <= W; ++k) p.at(k) = k == 0 ? random_nonzero_rational(rng) : random_rational(rng);
    return p;
  }

  const Rational& operator()(int k) const {
    if (k < -window || k > window)
      throw WindowTooSmall(detail::cat("u^", k, " read outside the window [-", window, ", ", window, "]"),
                           std::abs(k));
    return values[k + window];
  }
  Rational& at(int k) {
    if (k < -window || k > window) throw InputError(detail::cat("u^", k, " outside the window"));
    return values[k + window];
  }
};

using SparseRow = std::map<int, Rational>;

struct ChainMatrixSpec {
  std::string name;
  int stencil = 1;
  std::function<SparseRow(int k, const RationalPoint&)> row;
  // d a^k_j / d u^p
  std::function<Rational(int k, int j, int p, const RationalPoint&)> partial;
};

// ---------------------------------------------------------------------------
// Built-in specs

inline ChainMatrixSpec pfaff_chain_spec() {
  ChainMatrixSpec s;
  s.name = "pfaff";
  s.stencil = 1;
  s.row = [](int k, const RationalPoint& u) {
    SparseRow r;
    const Rational& u0 = u(0);
    if (k == 0) {
      r[0] = u0 * u(1);
      r[1] = u0 * u0;
      r[-1] = u0;
      return r;
    }
    if (k == 1) {
      r[0] = 2 * u(2) - u(1) * u(1);
      r[1] = -u0 * u(1);
      r[2] = u0;
      return r;
    }
    const Rational uk = u(k);
    if (k < 0) {
      r[0] = (k + 2) * u(k + 1) - k * u(k - 1) + u(1) * uk;
      r[1] = u0 * uk;
    } else {
      r[0] = (k + 1) * u(k + 1) - (k - 1) * u(k - 1) - u(1) * uk;
      r[1] = -u0 * uk;
    }
    r[k - 1] += u0;
    r[k + 1] += u0;
    return r;
  };
  s.partial = [](int k, int j, int p, const RationalPoint& u) -> Rational {
    Rational d = 0;
    if (k == 0) {
      if (j == 0) d = p == 0 ? u(1) : p == 1 ? u(0) : Rational(0);
      if (j == 1 && p == 0) d = 2 * u(0);
      if (j == -1 && p == 0) d = 1;
      return d;
    }
    if (k == 1) {
      if (j == 0) d = p == 2 ? Rational(2) : p == 1 ? Rational(-2 * u(1)) : Rational(0);
      if (j == 1) d = p == 0 ? Rational(-u(1)) : p == 1 ? Rational(-u(0)) : Rational(0);
      if (j == 2 && p == 0) d = 1;
      return d;
    }
    const int sg = k < 0 ? 1 : -1;
    if (j == 0) {
      // a^k_0: k<0 (k+2)u^{k+1} - k u^{k-1} + u^1 u^k ; k>1 (k+1)u^{k+1} - (k-1)u^{k-1} - u^1 u^k
      if (p == k + 1) d += k < 0 ? k + 2 : k + 1;
      if (p == k - 1) d += k < 0 ? -k : -(k - 1);
      if (p == 1) d += sg * u(k);
      if (p == k) d += sg * u(1);
    }
    if (j == 1) {
      if (p == 0) d += sg * u(k);
      if (p == k) d += sg * u(0);
    }
    if ((j == k - 1 || j == k + 1) && p == 0) d += 1;
    return d;
  };
  return s;
}

// a^k_k = (u^k)^2 + k u^k: diagonal with distinct eigenvalue functions.
inline ChainMatrixSpec diagonal_control_spec() {
  ChainMatrixSpec s;
  s.name = "diagonal";
  s.stencil = 0;
  s.row = [](int k, const RationalPoint& u) {
    const Rational& x = u(k);
    return SparseRow{{k, x * x + k * x}};
  };
  s.partial = [](int k, int j, int p, const RationalPoint& u) -> Rational {
    return j == k && p == k ? Rational(2 * u(k) + k) : Rational(0);
  };
  return s;
}

// Constant coefficients: N and H vanish identically.
inline ChainMatrixSpec constant_control_spec() {
  ChainMatrixSpec s;
  s.name = "constant";
  s.stencil = 1;
  s.row = [](int k, const RationalPoint&) {
    SparseRow r;
    r[k - 1] += 2;
    r[k + 1] += 1;
    r[0] += Rational(k, 3);
    return r;
  };
  s.partial = [](int, int, int, const RationalPoint&) { return Rational(0); };
  return s;
}

// ---------------------------------------------------------------------------
// Polynomial coefficient tables
//
// {"name": str, "stencil": int, "rules": [
//    {"rows": [lo|null, hi|null],
//     "entries": [{"col": idx, "terms": [{"coef": c, "vars": [idx, ...]}]}]}]}
// idx is an integer, or a string "k", "k+d", "k-d" or "d"; c is an integer, a
// rational string "p/q", or an array [c0, c1, ...] meaning c0 + c1 k + ...
// The first rule whose row range contains k applies; entries sharing a column
// are summed.

namespace detail {

struct IndexExpr {
  bool relative = false;
  int offset = 0;
  int eval(int k) const { return relative ? k + offset : offset; }
};

inline IndexExpr parse_index(const nlohmann::json& j) {
  if (j.is_number_integer()) return {false, j.get<int>()};
  if (!j.is_string()) throw InputError(cat("index must be an integer or string, got ", j.dump()));
  std::string s = j.get<std::string>();
  s.erase(std::remove(s.begin(), s.end(), ' '), s.end());
  IndexExpr e;
  size_t pos = 0;
  if (!s.empty() && s[0] == 'k') {
    e.relative = true;
    pos = 1;
    if (pos == s.size()) return e;
    if (s[pos] != '+' && s[pos] != '-') throw InputError(cat("bad index expression '", s, "'"));
  }
  try {
    size_t used = 0;
    e.offset = std::stoi(s.substr(pos), &used);
    if (used != s.size() - pos) throw InputError("");
  } catch (const std::exception&) {
    throw InputError(cat("bad index expression '", s, "'"));
  }
  return e;
}

inline Rational parse_coef_scalar(const nlohmann::json& j) {
  if (j.is_number_integer()) return Rational(j.get<long>());
  if (j.is_string()) return parse_rational(j.get<std::string>());
  throw InputError(cat("coefficient must be an integer or rational string, got ", j.dump()));
}

struct PolyTerm {
  std::vector<Rational> coef;  // polynomial in k
  std::vector<IndexExpr> vars;
  Rational coef_at(int k) const {
    Rational c = 0, kp = 1;
    for (const auto& a : coef) {
      c += a * kp;
      kp *= k;
    }
    return c;
  }
};

struct PolyEntry {
  IndexExpr col;
  std::vector<PolyTerm> terms;
};

struct PolyRule {
  std::optional<int> lo, hi;
  std::vector<PolyEntry> entries;
  bool covers(int k) const { return (!lo || k >= *lo) && (!hi || k <= *hi); }
};

struct PolyTable {
  int stencil = 1;
  std::vector<PolyRule> rules;

  const PolyRule* rule(int k) const {
    for (const auto& r : rules)
      if (r.covers(k)) return &r;
    return nullptr;
  }
  void check_envelope(int k, int idx, const char* what) const {
    if (idx != 0 && idx != 1 && std::abs(idx - k) > stencil)
      throw InputError(cat("row ", k, ": ", what, " index ", idx, " violates the stencil bound ", stencil));
  }
  SparseRow row(int k, const RationalPoint& u) const {
    SparseRow r;
    const PolyRule* rl = rule(k);
    if (!rl) return r;
    for (const auto& e : rl->entries) {
      const int c = e.col.eval(k);
      check_envelope(k, c, "column");
      Rational v = 0;
      for (const auto& t : e.terms) {
        Rational m = t.coef_at(k);
        for (const auto& x : t.vars) {
          const int p = x.eval(k);
          check_envelope(k, p, "variable");
          m *= u(p);
        }
        v += m;
      }
      r[c] += v;
    }
    return r;
  }
  Rational partial(int k, int j, int p, const RationalPoint& u) const {
    Rational d = 0;
    const PolyRule* rl = rule(k);
    if (!rl) return d;
    for (const auto& e : rl->entries) {
      if (e.col.eval(k) != j) continue;
      for (const auto& t : e.terms) {
        for (size_t a = 0; a < t.vars.size(); ++a) {
          if (t.vars[a].eval(k) != p) continue;
          Rational m = t.coef_at(k);
          for (size_t b = 0; b < t.vars.size(); ++b)
            if (b != a) m *= u(t.vars[b].eval(k));
          d += m;
        }
      }
    }
    return d;
  }
};

inline std::optional<int> parse_bound(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  if (!j.is_number_integer()) throw InputError(cat("row bound must be an integer or null, got ", j.dump()));
  return j.get<int>();
}

}  // namespace detail

inline ChainMatrixSpec spec_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object() || !j.contains("name") || !j.contains("stencil") || !j.contains("rules"))
      throw InputError("chain spec needs \"name\", \"stencil\" and \"rules\"");
    auto table = std::make_shared<detail::PolyTable>();
    table->stencil = j.at("stencil").get<int>();
    if (table->stencil < 0) throw InputError("stencil must be >= 0");
    for (const auto& rj : j.at("rules")) {
      detail::PolyRule rule;
      const auto& rows = rj.at("rows");
      if (!rows.is_array() || rows.size() != 2) throw InputError("\"rows\" must be [lo, hi]");
      rule.lo = detail::parse_bound(rows[0]);
      rule.hi = detail::parse_bound(rows[1]);
      for (const auto& ej : rj.at("entries")) {
        detail::PolyEntry e;
        e.col = detail::parse_index(ej.at("col"));
        for (const auto& tj : ej.at("terms")) {
          detail::PolyTerm t;
          const auto& c = tj.at("coef");
          if (c.is_array())
            for (const auto& x : c) t.coef.push_back(detail::parse_coef_scalar(x));
          else
            t.coef.push_back(detail::parse_coef_scalar(c));
          for (const auto& v : tj.at("vars")) t.vars.push_back(detail::parse_index(v));
          e.terms.push_back(std::move(t));
        }
        rule.entries.push_back(std::move(e));
      }
      table->rules.push_back(std::move(rule));
    }
    ChainMatrixSpec s;
    s.name = j.at("name").get<std::string>();
    s.stencil = table->stencil;
    s.row = [table](int k, const RationalPoint& u) { return table->row(k, u); };
    s.partial = [table](int k, int jj, int p, const RationalPoint& u) { return table->partial(k, jj, p, u); };
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(detail::cat("malformed chain spec: ", e.what()));
  }
}

// Named specs, extendable at runtime.
inline std::map<std::string, std::function<ChainMatrixSpec()>>& spec_registry() {
  static std::map<std::string, std::function<ChainMatrixSpec()>> reg{
      {"pfaff", pfaff_chain_spec}, {"diagonal", diagonal_control_spec}, {"constant", constant_control_spec}};
  return reg;
}

inline void register_spec(const std::string& name, std::function<ChainMatrixSpec()> factory) {
  spec_registry()[name] = std::move(factory);
}

// A registered name, or a path to a JSON coefficient table.
inline ChainMatrixSpec load_spec(const std::string& name_or_path) {
  auto& reg = spec_registry();
  if (auto it = reg.find(name_or_path); it != reg.end()) return it->second();
  std::ifstream in(name_or_path);
  if (!in) throw InputError(detail::cat("unknown chain spec '", name_or_path, "' (not registered, not a file)"));
  try {
    return spec_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(detail::cat("cannot parse ", name_or_path, ": ", e.what()));
  }
}

// ---------------------------------------------------------------------------
// Tensor engine

inline int nijenhuis_window(const ChainMatrixSpec& s, int i, int j, int k) {
  return std::max({std::abs(i), std::abs(j), std::abs(k)}) + std::max(s.stencil + 1, 2 * s.stencil);
}
inline int haantjes_window(const ChainMatrixSpec& s, int i, int j, int k) {
  return std::max({std::abs(i), std::abs(j), std::abs(k)}) + std::max(2 * s.stencil + 2, 4 * s.stencil);
}

// Per-point evaluator with caches for rows, partials and N.
class TensorEngine {
 public:
  TensorEngine(ChainMatrixSpec spec, const RationalPoint& p) : spec_(std::move(spec)), p_(p) {}

  const RationalPoint& point() const { return p_; }
  const ChainMatrixSpec& spec() const { return spec_; }

  // Nonzero entries of row i.
  const SparseRow& row(int i) {
    auto it = rows_.find(i);
    if (it != rows_.end()) return it->second;
    SparseRow r = spec_.row(i, p_);
    for (auto e = r.begin(); e != r.end();) e = e->second == 0 ? r.erase(e) : std::next(e);
    return rows_.emplace(i, std::move(r)).first->second;
  }
  Rational a(int i, int j) {
    const auto& r = row(i);
    auto it = r.find(j);
    return it == r.end() ? Rational(0) : it->second;
  }
  const Rational& partial(int i, int j, int q) {
    const std::uint64_t key = pack(i, j, q);
    auto it = partials_.find(key);
    if (it != partials_.end()) return it->second;
    return partials_.emplace(key, spec_.partial(i, j, q, p_)).first->second;
  }

  // {0, 1} U [-s, 1+s] U [i-2s, i+2s]: every index that can carry a
  // nonzero N^i_{pr} or a dependency of row i.
  std::vector<int> envelope(int i) const {
    const int s = spec_.stencil;
    std::set<int> t{0, 1};
    for (int q = -s; q <= 1 + s; ++q) t.insert(q);
    for (int q = i - 2 * s; q <= i + 2 * s; ++q) t.insert(q);
    return {t.begin(), t.end()};
  }

  const Rational& N(int i, int j, int k) {
    const std::uint64_t key = pack(i, j, k);
    auto it = n_.find(key);
    if (it != n_.end()) return it->second;
    Rational v = 0;
    if (j != k) {
      const int s = spec_.stencil;
      // a^p_j d_p a^i_k - a^p_k d_p a^i_j over the dependencies of row i
      for (int q : deps(i, s)) {
        const Rational& dk = partial(i, k, q);
        if (dk != 0) v += a(q, j) * dk;
        const Rational& dj = partial(i, j, q);
        if (dj != 0) v -= a(q, k) * dj;
      }
      // - a^i_p (d_j a^p_k - d_k a^p_j) over the columns of row i
      for (const auto& [q, aiq] : row(i)) {
        const Rational t = partial(q, k, j) - partial(q, j, k);
        if (t != 0) v -= aiq * t;
      }
    }
    return n_.emplace(key, std::move(v)).first->second;
  }

  Rational H(int i, int j, int k) {
    Rational v = 0;
    if (j == k) return v;
    const auto Ti = envelope(i);
    // N^i_{pr} a^p_j a^r_k
    std::vector<std::pair<int, Rational>> pj, rk;
    for (int q : Ti) {
      if (auto x = a(q, j); x != 0) pj.emplace_back(q, std::move(x));
      if (auto x = a(q, k); x != 0) rk.emplace_back(q, std::move(x));
    }
    for (const auto& [p, apj] : pj)
      for (const auto& [r, ark] : rk) {
        const Rational& n = N(i, p, r);
        if (n != 0) v += n * apj * ark;
      }
    // - N^p_{jr} a^i_p a^r_k - N^p_{rk} a^i_p a^r_j
    const SparseRow ri = row(i);
    for (const auto& [p, aip] : ri)
      for (int r : envelope(p)) {
        if (auto ark = a(r, k); ark != 0) {
          const Rational& n = N(p, j, r);
          if (n != 0) v -= n * aip * ark;
        }
        if (auto arj = a(r, j); arj != 0) {
          const Rational& n = N(p, r, k);
          if (n != 0) v -= n * aip * arj;
        }
      }
    // + N^p_{jk} a^i_r a^r_p
    for (const auto& [r, air] : ri) {
      const SparseRow rr = row(r);
      for (const auto& [p, arp] : rr) {
        const Rational& n = N(p, j, k);
        if (n != 0) v += n * air * arp;
      }
    }
    return v;
  }

 private:
  static std::uint64_t pack(int a, int b, int c) {
    auto f = [](int x) { return static_cast<std::uint64_t>(static_cast<std::uint32_t>(x + (1 << 20)) & 0x1FFFFF); };
    return f(a) << 42 | f(b) << 21 | f(c);
  }
  static std::vector<int> deps(int i, int s) {
    std::set<int> t{0, 1};
    for (int q = i - s; q <= i + s; ++q) t.insert(q);
    return {t.begin(), t.end()};
  }

  ChainMatrixSpec spec_;
  RationalPoint p_;
  std::unordered_map<int, SparseRow> rows_;
  std::unordered_map<std::uint64_t, Rational> partials_, n_;
};

inline Rational nijenhuis(const ChainMatrixSpec& spec, int i, int j, int k, const RationalPoint& p) {
  const int need = nijenhuis_window(spec, i, j, k);
  if (p.window < need)
    throw WindowTooSmall(detail::cat("N^", i, "_{", j, ",", k, "} needs window >= ", need, ", have ", p.window),
                         need);
  return TensorEngine(spec, p).N(i, j, k);
}

inline Rational haantjes(const ChainMatrixSpec& spec, int i, int j, int k, const RationalPoint& p) {
  const int need = haantjes_window(spec, i, j, k);
  if (p.window < need)
    throw WindowTooSmall(detail::cat("H^", i, "_{", j, ",", k, "} needs window >= ", need, ", have ", p.window),
                         need);
  return TensorEngine(spec, p).H(i, j, k);
}

// ---------------------------------------------------------------------------
// Haantjes scan over |i|, |j|, |k| <= range at random points

struct TensorHit {
  int point, i, j, k;
  Rational value;
};

struct HaantjesScan {
  std::string spec;
  int range = 0;
  int window = 0;
  int points = 0;
  long evaluated = 0;
  std::vector<TensorHit> nonzero;
};

inline HaantjesScan haantjes_scan(const ChainMatrixSpec& spec, int range, int points, std::uint64_t seed,
                                  unsigned threads = 0) {
  if (range < 0 || points < 1) throw InputError("haantjes scan needs range >= 0 and points >= 1");
  HaantjesScan rep;
  rep.spec = spec.name;
  rep.range = range;
  rep.window = haantjes_window(spec, range, 0, 0);
  rep.points = points;
  std::mt19937_64 rng(seed);
  std::vector<RationalPoint> pts;
  for (int t = 0; t < points; ++t) pts.push_back(RationalPoint::random(rep.window, rng));

  std::vector<std::vector<TensorHit>> hits(points);
  auto work = [&](int t) {
    TensorEngine eng(spec, pts[t]);
    for (int i = -range; i <= range; ++i)
      for (int j = -range; j <= range; ++j)
        for (int k = -range; k <= range; ++k) {
          Rational h = eng.H(i, j, k);
          if (h != 0) hits[t].push_back({t, i, j, k, std::move(h)});
        }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(points));
  std::vector<std::thread> pool;
  std::mutex err_mu;
  std::exception_ptr err;
  for (unsigned w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      try {
        for (int t = static_cast<int>(w); t < points; t += static_cast<int>(threads)) work(t);
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mu);
        if (!err) err = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
  for (auto& h : hits)
    for (auto& x : h) rep.nonzero.push_back(std::move(x));
  const long side = 2L * range + 1;
  rep.evaluated = side * side * side * points;
  return rep;
}

inline nlohmann::ordered_json haantjes_scan_to_json(const HaantjesScan& r) {
  nlohmann::ordered_json j;
  j["spec"] = r.spec;
  j["window"] = r.range;  // index range |i|, |j|, |k| <= window
  j["point_window"] = r.window;
  j["points"] = r.points;
  j["evaluated"] = r.evaluated;
  j["nonzero_count"] = r.nonzero.size();
  auto arr = nlohmann::ordered_json::array();
  for (const auto& h : r.nonzero)
    arr.push_back({{"point", h.point}, {"i", h.i}, {"j", h.j}, {"k", h.k}, {"value", to_string(h.value)}});
  j["haantjes_nonzero"] = std::move(arr);
  return j;
}

// ---------------------------------------------------------------------------
// Reference table of nonzero Nijenhuis components

struct NijenhuisEntry {
  int i, j, k;
  std::string formula;
  std::function<Rational(const RationalPoint&)> value;
  std::string name() const { return detail::cat("N^", i, "_{", j, ",", k, "}"); }
};

// All printed entries with |i| <= imax (lower indices as printed).
inline std::vector<NijenhuisEntry> nijenhuis_table(int imax = 6) {
  std::vector<NijenhuisEntry> t;
  using P = const RationalPoint&;
  auto add = [&](int i, int j, int k, std::string f, std::function<Rational(P)> v) {
    t.push_back({i, j, k, std::move(f), std::move(v)});
  };
  for (int i = -imax; i <= imax; ++i) {
    if (std::abs(i) <= 2) continue;
    if (i > 2) {
      add(i, 0, 1, "u0((i-1)u^{i-1} - (i+1)u^{i+1})",
          [i](P u) { return Rational(u(0) * ((i - 1) * u(i - 1) - (i + 1) * u(i + 1))); });
      add(i, 0, -1, "(i-1)u^{i-1} + u1 u^i - (i+1)u^{i+1}",
          [i](P u) { return Rational((i - 1) * u(i - 1) + u(1) * u(i) - (i + 1) * u(i + 1)); });
    } else {
      add(i, 0, 1, "u0(i u^{i-1} - (i+2)u^{i+1})",
          [i](P u) { return Rational(u(0) * (i * u(i - 1) - (i + 2) * u(i + 1))); });
      add(i, 0, -1, "i u^{i-1} - u^i u1 - (i+2)u^{i+1}",
          [i](P u) { return Rational(i * u(i - 1) - u(i) * u(1) - (i + 2) * u(i + 1)); });
    }
    const int sg = i > 0 ? 1 : -1;
    add(i, -1, 1, "-sgn(i) u0 u^i", [i, sg](P u) { return Rational(-sg * u(0) * u(i)); });
    add(i, 0, i, "-4u0", [](P u) { return Rational(-4 * u(0)); });
    for (int d : {1, -1}) {
      add(i, 0, i + d, "u0 u1", [](P u) { return Rational(u(0) * u(1)); });
      add(i, 1, i + d, "(u0)^2", [](P u) { return Rational(u(0) * u(0)); });
      add(i, -1, i + d, "u0", [](P u) { return u(0); });
    }
  }
  if (imax >= 2) {
    add(2, 0, 1, "u0(2u1 - 3u3)", [](P u) { return Rational(u(0) * (2 * u(1) - 3 * u(3))); });
    add(2, 0, -1, "u1(1 + u2) - 3u3", [](P u) { return Rational(u(1) * (1 + u(2)) - 3 * u(3)); });
    add(2, -1, 1, "-u0(-1 + u2)", [](P u) { return Rational(-u(0) * (-1 + u(2))); });
    add(2, 0, 2, "-4u0", [](P u) { return Rational(-4 * u(0)); });
    add(2, 0, 3, "u0 u1", [](P u) { return Rational(u(0) * u(1)); });
    add(2, 1, 3, "(u0)^2", [](P u) { return Rational(u(0) * u(0)); });
    add(2, -1, 3, "u0", [](P u) { return u(0); });
  }
  if (imax >= 1) {
    add(1, 0, 1, "-2u0(2 + u2)", [](P u) { return Rational(-2 * u(0) * (2 + u(2))); });
    add(1, 0, 2, "u0 u1", [](P u) { return Rational(u(0) * u(1)); });
    add(1, 1, 2, "(u0)^2", [](P u) { return Rational(u(0) * u(0)); });
    add(1, -1, 0, "-(u1)^2 + 2u2", [](P u) { return Rational(-u(1) * u(1) + 2 * u(2)); });
    add(1, -1, 1, "-u0 u1", [](P u) { return Rational(-u(0) * u(1)); });
    add(1, -1, 2, "u0", [](P u) { return u(0); });
  }
  if (imax >= 2) {
    add(-2, 0, 1, "-2u^{-3} u0", [](P u) { return Rational(-2 * u(-3) * u(0)); });
    add(-2, 0, -1, "-2u^{-3} + (-u^{-2} + u0)u1", [](P u) { return Rational(-2 * u(-3) + (-u(-2) + u(0)) * u(1)); });
    add(-2, -1, 1, "(u^{-2} - u0)u0", [](P u) { return Rational((u(-2) - u(0)) * u(0)); });
    add(-2, 0, -2, "-4u0", [](P u) { return Rational(-4 * u(0)); });
    add(-2, 0, -3, "u0 u1", [](P u) { return Rational(u(0) * u(1)); });
    add(-2, 1, -3, "(u0)^2", [](P u) { return Rational(u(0) * u(0)); });
    add(-2, -1, -3, "u0", [](P u) { return u(0); });
  }
  if (imax >= 1) {
    add(-1, 0, 1, "-u0(u^{-2} + 2u0)", [](P u) { return Rational(-u(0) * (u(-2) + 2 * u(0))); });
    add(-1, 0, -1, "-u^{-2} - 6u0 - u^{-1} u1", [](P u) { return Rational(-u(-2) - 6 * u(0) - u(-1) * u(1)); });
    add(-1, 0, -2, "u0 u1", [](P u) { return Rational(u(0) * u(1)); });
    add(-1, 1, -2, "(u0)^2", [](P u) { return Rational(u(0) * u(0)); });
    add(-1, -1, -2, "u0", [](P u) { return u(0); });
    add(-1, -1, 1, "u0 u^{-1}", [](P u) { return Rational(u(0) * u(-1)); });
  }
  return t;
}

struct OracleMismatch {
  std::string entry, formula;  // formula empty for entries absent from the table
  Rational expected, got;
};

struct OracleReport {
  int window = 0;
  int index_range = 0;
  int entries_checked = 0;
  int zeros_checked = 0;
  std::vector<OracleMismatch> mismatches;
  struct {
    std::string entry, printed;
    Rational printed_value, engine_value;
    bool matches = false;
  } open_question;
  bool passed() const { return mismatches.empty(); }
};

// Every printed entry with |i| <= 6 against the engine, then every other
// component with |j|, |k| <= window - 2 must be exactly 0.
inline OracleReport nijenhuis_oracle_check(const RationalPoint& p, const ChainMatrixSpec& spec = pfaff_chain_spec()) {
  if (p.window < 10) throw InputError(detail::cat("oracle check needs window >= 10, have ", p.window));
  OracleReport rep;
  rep.window = p.window;
  const int imax = 6;
  const int jmax = p.window - std::max(spec.stencil + 1, 2 * spec.stencil);
  rep.index_range = jmax;
  TensorEngine eng(spec, p);
  std::set<std::tuple<int, int, int>> listed;
  for (const auto& e : nijenhuis_table(imax)) {
    const Rational want = e.value(p);
    const Rational got = eng.N(e.i, e.j, e.k);
    ++rep.entries_checked;
    listed.insert({e.i, std::min(e.j, e.k), std::max(e.j, e.k)});
    if (want != got) rep.mismatches.push_back({e.name(), e.formula, want, got});
    if (e.i == -1 && e.j == 0 && e.k == -1) {
      rep.open_question.entry = e.name();
      rep.open_question.printed = e.formula;
      rep.open_question.printed_value = want;
      rep.open_question.engine_value = got;
      rep.open_question.matches = want == got;
    }
  }
  for (int i = -imax; i <= imax; ++i)
    for (int j = -jmax; j <= jmax; ++j)
      for (int k = j; k <= jmax; ++k) {
        if (listed.count({i, j, k})) continue;
        ++rep.zeros_checked;
        const Rational got = eng.N(i, j, k);
        if (got != 0) rep.mismatches.push_back({detail::cat("N^", i, "_{", j, ",", k, "}"), "", Rational(0), got});
      }
  return rep;
}

inline nlohmann::ordered_json oracle_report_to_json(const OracleReport& r) {
  nlohmann::ordered_json j;
  j["window"] = r.window;
  j["index_range"] = r.index_range;
  j["entries_checked"] = r.entries_checked;
  j["zeros_checked"] = r.zeros_checked;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& m : r.mismatches)
    arr.push_back({{"entry", m.entry},
                   {"printed", m.formula.empty() ? "0 (not listed)" : m.formula},
                   {"expected", to_string(m.expected)},
                   {"got", to_string(m.got)}});
  j["nijenhuis_mismatches"] = std::move(arr);
  j["open_question"] = {{"entry", r.open_question.entry},
                        {"printed", r.open_question.printed},
                        {"printed_value", to_string(r.open_question.printed_value)},
                        {"engine_value", to_string(r.open_question.engine_value)},
                        {"matches", r.open_question.matches}};
  return j;
}

}  // namespace pfc
