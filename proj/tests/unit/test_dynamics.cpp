#include <doctest.h>

#include <cmath>

#include "dmm/dynamics.hpp"
#include "dmm/integrator.hpp"
#include "dmm/rng.hpp"

using namespace dmm;

namespace {

Clause cl(int a, int b, int c) {
  auto lit = [](int x) { return Literal{static_cast<std::uint32_t>(std::abs(x)), x < 0}; };
  return Clause{{lit(a), lit(b), lit(c)}};
}

using Real = long double;

// Term-by-term evaluation of the three equations, sharing no code with the
// library: literal values, C, G and R are recomputed here in long double.
struct Oracle {
  std::vector<Real> dv, dxs, dxl;
};

Oracle oracle(const CnfFormula& f, const DmmState& s, const DmmParams& p) {
  const std::size_t n = f.n_vars(), m = f.num_clauses();
  Oracle o;
  o.dv.assign(n, 0);
  o.dxs.resize(m);
  o.dxl.resize(m);
  std::vector<Real> c(m);
  std::vector<std::array<bool, 3>> top(m);
  for (std::size_t j = 0; j < m; ++j) {
    Real lit[3];
    for (int k = 0; k < 3; ++k) {
      const auto& l = f.clauses()[j].lits[k];
      lit[k] = l.negated ? 1.0L - s.v[l.var - 1] : Real(s.v[l.var - 1]);
    }
    const Real mx = std::max({lit[0], lit[1], lit[2]});
    c[j] = 1.0L - mx;
    for (int k = 0; k < 3; ++k) top[j][k] = mx - lit[k] <= Real(p.tie_tol);
    o.dxs[j] = Real(p.beta) * (s.xs[j] + Real(p.epsilon)) * (c[j] - p.gamma);
    o.dxl[j] = Real(p.alpha) * std::exp(-Real(s.xl[j])) * (c[j] - p.delta);
  }
  for (std::uint32_t var = 1; var <= n; ++var) {
    std::vector<std::size_t> ms;
    for (std::size_t j = 0; j < m; ++j)
      if (f.clauses()[j].contains(var)) ms.push_back(j);
    if (ms.empty()) continue;
    Real denom = 0;
    for (auto j : ms) denom += std::exp(Real(s.xl[j]));
    Real sum = 0;
    for (auto j : ms) {
      const Real w = std::exp(Real(s.xl[j])) / denom;
      int k = 0;
      while (f.clauses()[j].lits[k].var != var) ++k;
      const Real q = f.clauses()[j].lits[k].negated ? -1 : 1;
      const Real g = q * c[j];
      const Real r = top[j][k] ? q * c[j] : 0;
      sum += Real(p.eta_gain) * w * s.xs[j] * g + (1 + Real(p.zeta) * p.eta_gain * w) * (1 - Real(s.xs[j])) * r;
    }
    o.dv[var - 1] = sum;
  }
  return o;
}

CnfFormula random_formula(std::uint32_t n, std::size_t m, rng::Engine& eng) {
  std::vector<Clause> cs;
  for (std::size_t i = 0; i < m; ++i) {
    std::uint32_t v[3];
    v[0] = 1 + static_cast<std::uint32_t>(rng::below(eng, n));
    do v[1] = 1 + static_cast<std::uint32_t>(rng::below(eng, n)); while (v[1] == v[0]);
    do v[2] = 1 + static_cast<std::uint32_t>(rng::below(eng, n)); while (v[2] == v[0] || v[2] == v[1]);
    Clause c;
    for (int k = 0; k < 3; ++k) c.lits[k] = Literal{v[k], rng::below(eng, 2) == 1};
    cs.push_back(c);
  }
  return CnfFormula(n, cs);
}

DmmState random_state(const CnfFormula& f, rng::Engine& eng, double xl_max) {
  DmmState s;
  for (std::uint32_t i = 0; i < f.n_vars(); ++i) {
    const auto pick = rng::below(eng, 6);
    s.v.push_back(pick == 0 ? 0.0 : pick == 1 ? 1.0 : pick == 2 ? 0.5 : rng::uniform01(eng));
  }
  for (std::size_t j = 0; j < f.num_clauses(); ++j) {
    s.xs.push_back(rng::uniform01(eng));
    s.xl.push_back(std::min(xl_max, static_cast<double>(f.num_clauses())) * rng::uniform01(eng));
  }
  return s;
}

void check_close(double got, Real want, double rel) {
  const double w = static_cast<double>(want);
  const double scale = std::max(std::abs(w), 1e-300);
  CHECK(std::abs(got - w) <= rel * scale + 1e-300);
}

}  // namespace

TEST_CASE("literal values") {
  CHECK(literal_value(0.3, false) == 0.3);
  CHECK(literal_value(0.3, true) == 0.7);
  CHECK(literal_value(1.0, true) == 0.0);
}

TEST_CASE("clause values") {
  const std::vector<double> sat{1.0, 0.0, 0.0};
  CHECK(clause_value(cl(1, 2, 3), sat) == 0.0);
  const std::vector<double> ones{1.0, 1.0, 1.0};
  CHECK(clause_value(cl(-1, -2, -3), ones) == 1.0);
  const std::vector<double> v{0.3, 0.6, 0.2};
  CHECK(clause_value(cl(1, 2, 3), v) == doctest::Approx(0.4).epsilon(1e-15));
}

TEST_CASE("gradient and rigidity terms") {
  const std::vector<double> v{0.9, 0.2, 0.1};
  for (std::uint32_t n = 1; n <= 3; ++n)
    CHECK(gradient_term(cl(1, 2, 3), n, v) == doctest::Approx(0.1));
  CHECK(gradient_term(cl(1, -2, 3), 2, std::vector<double>{0.9, 0.8, 0.1}) == doctest::Approx(-0.1));
  CHECK(rigidity_term(cl(1, 2, 3), 1, v) == doctest::Approx(0.1));
  CHECK(rigidity_term(cl(1, 2, 3), 2, v) == 0.0);
  CHECK(rigidity_term(cl(1, 2, 3), 3, v) == 0.0);
  const std::vector<double> tie{0.4, 0.4, 0.1};
  CHECK(rigidity_term(cl(1, 2, 3), 1, tie) == doctest::Approx(0.6));
  CHECK(rigidity_term(cl(1, 2, 3), 2, tie) == doctest::Approx(0.6));
  CHECK(rigidity_term(cl(1, 2, 3), 3, tie) == 0.0);
  const std::vector<double> sat{1.0, 0.0, 0.0};
  for (std::uint32_t n = 1; n <= 3; ++n) {
    CHECK(gradient_term(cl(1, 2, 3), n, sat) == 0.0);
    CHECK(rigidity_term(cl(1, 2, 3), n, sat) == 0.0);
  }
  CHECK_THROWS_AS(gradient_term(cl(1, 2, 3), 4, std::vector<double>{0, 0, 0, 0}), DynamicsError);
  CHECK_THROWS_AS(rigidity_term(cl(1, 2, 3), 4, std::vector<double>{0, 0, 0, 0}), DynamicsError);
}

TEST_CASE("softmax weights") {
  for (double c : {-5.0, 0.0, 700.0}) {
    const std::vector<double> z{c, c, c};
    for (double w : softmax_weights(z)) CHECK(w == doctest::Approx(1.0 / 3.0));
  }
  const auto w = softmax_weights(std::vector<double>{0.0, std::log(3.0)});
  CHECK(w[0] == doctest::Approx(0.25));
  CHECK(w[1] == doctest::Approx(0.75));
  CHECK(softmax_weights(std::vector<double>{42.0}) == std::vector<double>{1.0});
  CHECK_THROWS(softmax_weights(std::vector<double>{}));
}

TEST_CASE("softmax normalization and shift invariance") {
  rng::Engine eng(3);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> z(1 + rng::below(eng, 20));
    for (auto& x : z) x = 50.0 * rng::uniform01(eng);
    const auto w = softmax_weights(z);
    double sum = 0;
    for (double x : w) sum += x;
    CHECK(std::abs(sum - 1.0) < 1e-12);
    auto shifted = z;
    for (auto& x : shifted) x += 17.0;
    const auto w2 = softmax_weights(shifted);
    for (std::size_t i = 0; i < w.size(); ++i) CHECK(std::abs(w[i] - w2[i]) < 1e-12);
  }
}

TEST_CASE("memory derivative examples") {
  DmmParams p;
  const CnfFormula f(3, {cl(1, 2, 3)});
  // C = 0.25 = gamma.
  auto d = derivatives(f, {{0.75, 0.0, 0.0}, {0.5}, {0.0}}, p);
  CHECK(d.dxs[0] == 0.0);
  d = derivatives(f, {{0.0, 0.0, 0.0}, {0.0}, {0.0}}, p);
  CHECK(d.dxs[0] == doctest::Approx(0.015).epsilon(1e-14));
  CHECK(d.dxl[0] == doctest::Approx(4.75).epsilon(1e-14));
}

TEST_CASE("voltage derivative example") {
  DmmParams p;
  const CnfFormula f(3, {cl(1, 2, 3)});
  const auto d = derivatives(f, {{0.2, 0.3, 0.4}, {0.5}, {0.0}}, p);
  CHECK(d.dv[0] == doctest::Approx(900.0).epsilon(1e-14));
  CHECK(d.dv[1] == doctest::Approx(900.0).epsilon(1e-14));
  // Variable 3 also receives the rigidity push (1 + zeta eta) * 0.5 * 0.6.
  CHECK(d.dv[2] == doctest::Approx(900.0 + (1.0 + p.zeta * 3000.0) * 0.3).epsilon(1e-14));
}

TEST_CASE("isolated variables do not move") {
  DmmParams p;
  const CnfFormula f(5, {cl(1, 2, 3)});
  const auto d = derivatives(f, {{0.2, 0.3, 0.4, 0.1, 0.9}, {0.5}, {0.0}}, p);
  CHECK(d.dv[3] == 0.0);
  CHECK(d.dv[4] == 0.0);
}

TEST_CASE("derivatives match an independent transliteration") {
  rng::Engine eng(17);
  double worst = 0;
  for (int t = 0; t < 20; ++t) {
    const std::uint32_t n = 3 + static_cast<std::uint32_t>(rng::below(eng, 6));
    const auto f = random_formula(n, 1 + rng::below(eng, 30), eng);
    const auto s = random_state(f, eng, 25.0);
    DmmParams p;
    p.zeta = 1e-3 * (1 + t);
    const auto d = derivatives(f, s, p);
    const auto o = oracle(f, s, p);
    for (std::size_t i = 0; i < n; ++i) {
      check_close(d.dv[i], o.dv[i], 1e-12);
      if (o.dv[i] != 0) worst = std::max(worst, static_cast<double>(std::abs((d.dv[i] - o.dv[i]) / o.dv[i])));
    }
    for (std::size_t j = 0; j < f.num_clauses(); ++j) {
      check_close(d.dxs[j], o.dxs[j], 1e-12);
      check_close(d.dxl[j], o.dxl[j], 1e-12);
    }
  }
  MESSAGE("worst dv relative error " << worst);
}

TEST_CASE("transliteration agreement at larger sizes and with wide memory spread") {
  rng::Engine eng(23);
  for (int t = 0; t < 6; ++t) {
    const auto inst = generate_planted(40 + 10 * t, 4.3, kDefaultP0, t);
    auto s = random_state(inst.formula, eng, 100.0);
    if (t % 2) s.xl[0] = 150.0;
    DmmParams p;
    const auto d = derivatives(inst.formula, s, p);
    const auto o = oracle(inst.formula, s, p);
    for (std::size_t i = 0; i < d.dv.size(); ++i) check_close(d.dv[i], o.dv[i], 1e-11);
  }
}

TEST_CASE("transliteration agreement with per-variable shifts") {
  rng::Engine eng(29);
  const auto inst = generate_planted(150, 4.3, kDefaultP0, 77);
  auto s = random_state(inst.formula, eng, 30.0);
  s.xl[0] = 640.0;
  s.xl[1] = 620.0;
  REQUIRE_FALSE(global_softmax_shift(s.xl).has_value());
  DmmParams p;
  const auto d = derivatives(inst.formula, s, p);
  const auto o = oracle(inst.formula, s, p);
  for (std::size_t i = 0; i < d.dv.size(); ++i) check_close(d.dv[i], o.dv[i], 1e-11);
}

TEST_CASE("global shift") {
  CHECK(global_softmax_shift(std::vector<double>{}) == 0.0);
  CHECK(global_softmax_shift(std::vector<double>{1.0, 5.0, 3.0}) == 5.0);
  CHECK_FALSE(global_softmax_shift(std::vector<double>{0.0, 601.0}).has_value());
}

TEST_CASE("satisfied states are fixed points of the voltages") {
  rng::Engine eng(31);
  DmmParams p;
  for (int t = 0; t < 200; ++t) {
    const auto inst = generate_planted(10 + rng::below(eng, 40), 4.3, kDefaultP0, 500 + t);
    const auto& f = inst.formula;
    auto s = random_state(f, eng, 30.0);
    // Plant values at the rails.
    for (std::uint32_t v = 1; v <= f.n_vars(); ++v) s.v[v - 1] = inst.plant[v] ? 1.0 : 0.0;
    // Others may leave the rails when every clause keeps one full literal.
    for (std::uint32_t v = 1; v <= f.n_vars(); ++v)
      if (rng::below(eng, 4) == 0) {
        auto trial = s;
        trial.v[v - 1] = rng::uniform01(eng);
        bool ok = true;
        for (const auto& c : f.clauses()) ok = ok && clause_value(c, trial.v) == 0.0;
        if (ok) s = trial;
      }
    const auto d = derivatives(f, s, p);
    for (double x : d.dv) REQUIRE(x == 0.0);
    for (double x : d.dxs) REQUIRE(x < 0.0);
    for (double x : d.dxl) REQUIRE(x < 0.0);
  }
}

TEST_CASE("rigidity support and sign rule") {
  rng::Engine eng(41);
  for (int t = 0; t < 200; ++t) {
    const auto f = random_formula(6, 10, eng);
    const auto s = random_state(f, eng, 5.0);
    for (const auto& c : f.clauses()) {
      const double cv = clause_value(c, s.v);
      int nonzero = 0;
      for (const auto& l : c.lits) {
        const double r = rigidity_term(c, l.var, s.v);
        const double g = gradient_term(c, l.var, s.v);
        if (r != 0.0) {
          ++nonzero;
          CHECK(literal_value(s.v[l.var - 1], l.negated) == 1.0 - cv);
        }
        if (cv > 0) CHECK((g > 0) == (l.polarity() > 0));
      }
      if (cv > 0) CHECK(nonzero >= 1);
      CHECK(nonzero <= 3);
    }
  }
}

TEST_CASE("voltage derivatives respect the a-priori bound") {
  rng::Engine eng(43);
  DmmParams p;
  for (int t = 0; t < 50; ++t) {
    const auto inst = generate_planted(30, 4.3, kDefaultP0, t);
    const auto s = random_state(inst.formula, eng, 40.0);
    const auto d = derivatives(inst.formula, s, p);
    for (std::uint32_t v = 1; v <= 30; ++v)
      CHECK(std::abs(d.dv[v - 1]) <= dv_bound(inst.formula.degree(v), p));
  }
}

TEST_CASE("state and parameter validation") {
  const CnfFormula f(3, {cl(1, 2, 3)});
  DmmParams p;
  CHECK_THROWS_AS(derivatives(f, {{0.0, 0.0}, {0.0}, {0.0}}, p), DynamicsError);
  CHECK_THROWS_AS(derivatives(f, {{0.0, 0.0, 1.5}, {0.0}, {0.0}}, p), DynamicsError);
  CHECK_THROWS_AS(derivatives(f, {{0.0, 0.0, 0.0}, {-0.1}, {0.0}}, p), DynamicsError);
  CHECK_THROWS_AS(derivatives(f, {{0.0, 0.0, 0.0}, {0.0}, {2.0}}, p), DynamicsError);
  CHECK_NOTHROW(p.validate());
  auto bad = p;
  bad.gamma = 1.0;
  CHECK_THROWS(bad.validate());
  bad = p;
  bad.alpha = 0.0;
  CHECK_THROWS(bad.validate());
  bad = p;
  bad.dt = std::nan("");
  CHECK_THROWS(bad.validate());
}

TEST_CASE("evaluator reuse gives identical results") {
  const auto inst = generate_planted(60, 4.3, kDefaultP0, 9);
  rng::Engine eng(1);
  VectorField field(inst.formula);
  DmmParams p;
  for (int t = 0; t < 5; ++t) {
    const auto s = random_state(inst.formula, eng, 20.0);
    Derivatives a;
    field.evaluate(s, p, a);
    CHECK(a == derivatives(inst.formula, s, p));
  }
}
