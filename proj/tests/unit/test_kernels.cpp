#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

#include "dmm/dynamics.hpp"
#include "dmm/integrator.hpp"
#include "dmm/rng.hpp"
#include "dmm/simd/kernels.hpp"

using namespace dmm;
using namespace dmm::simd;

namespace {

bool same_bits(double a, double b) {
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!same_bits(a[i], b[i])) return false;
  return true;
}

// Random clause data with sizes that exercise vector tails.
struct ClauseData {
  std::size_t n, m;
  std::array<std::vector<std::int32_t>, 3> var;
  std::array<std::vector<std::uint64_t>, 3> neg;
  std::vector<double> v, xs, xl;

  ClauseData(std::size_t n_, std::size_t m_, std::uint64_t seed) : n(n_), m(m_) {
    rng::Engine eng(seed);
    for (int k = 0; k < 3; ++k) {
      var[k].resize(m);
      neg[k].resize(m);
      for (std::size_t i = 0; i < m; ++i) {
        var[k][i] = static_cast<std::int32_t>(rng::below(eng, n));
        neg[k][i] = rng::below(eng, 2) ? ~0ULL : 0ULL;
      }
    }
    v.resize(n);
    for (auto& x : v) {
      // Lattice values produce exact ties between literals.
      x = rng::below(eng, 3) == 0 ? static_cast<double>(rng::below(eng, 5)) / 4.0 : rng::uniform01(eng);
    }
    xs.resize(m);
    xl.resize(m);
    for (auto& x : xs) x = rng::uniform01(eng);
    for (auto& x : xl) x = 40.0 * rng::uniform01(eng);
  }

  ClauseInputs inputs() const {
    ClauseInputs in;
    in.count = m;
    for (int k = 0; k < 3; ++k) {
      in.var[k] = var[k].data();
      in.negated[k] = neg[k].data();
    }
    in.v = v.data();
    in.xs = xs.data();
    in.xl = xl.data();
    return in;
  }
};

struct ClauseOut {
  std::vector<double> c, flag[3], grad, rigid, dxs, dxl, expo;
  explicit ClauseOut(std::size_t m)
      : c(m), flag{std::vector<double>(m), std::vector<double>(m), std::vector<double>(m)},
        grad(m), rigid(m), dxs(m), dxl(m), expo(m) {}
  ClauseTerms terms() {
    return {c.data(), {flag[0].data(), flag[1].data(), flag[2].data()}, grad.data(),
            rigid.data(), dxs.data(), dxl.data(), expo.data()};
  }
};

const ClauseConstants kConst{5.0, 20.0, 0.25, 0.05, 1e-3, 1e-9, 40.0};

}  // namespace

TEST_CASE("exp_ref matches a long-double reference") {
  rng::Engine eng(5);
  double worst = 0.0;
  for (int i = 0; i < 200000; ++i) {
    const double x = -708.0 + 1417.0 * rng::uniform01(eng);
    const long double ref = std::exp(static_cast<long double>(x));
    const double err = static_cast<double>(std::fabs((exp_ref(x) - ref) / ref));
    worst = std::max(worst, err);
  }
  for (double x = -2.0; x <= 2.0; x += 1.0 / 1024.0) {
    const long double ref = std::exp(static_cast<long double>(x));
    worst = std::max(worst, static_cast<double>(std::fabs((exp_ref(x) - ref) / ref)));
  }
  MESSAGE("worst relative error " << worst);
  CHECK(worst < 1e-15);
}

TEST_CASE("exp_ref special values") {
  CHECK(exp_ref(0.0) == 1.0);
  CHECK(exp_ref(-1000.0) == 0.0);
  CHECK(exp_ref(-std::numeric_limits<double>::infinity()) == 0.0);
  CHECK(std::isinf(exp_ref(1000.0)));
  CHECK(std::isinf(exp_ref(std::numeric_limits<double>::infinity())));
  CHECK(std::isnan(exp_ref(std::numeric_limits<double>::quiet_NaN())));
  // Monotone across the reduction boundaries.
  for (int k = -20; k <= 20; ++k) {
    const double x = (k + 0.5) * std::log(2.0);
    CHECK(exp_ref(std::nextafter(x, -1e9)) <= exp_ref(x));
    CHECK(exp_ref(x) <= exp_ref(std::nextafter(x, 1e9)));
  }
}

TEST_CASE("scalar table is always available and listed first") {
  const auto all = available_kernels();
  REQUIRE_FALSE(all.empty());
  CHECK(all.front() == &scalar_kernels());
  CHECK(all.front()->name == "scalar");
  bool found = false;
  for (const auto* t : all) found = found || t == &active_kernels();
  CHECK(found);
}

TEST_CASE("exp kernels are bit-identical to exp_ref") {
  rng::Engine eng(6);
  std::vector<double> x(1027);
  for (auto& xi : x) xi = -800.0 + 1600.0 * rng::uniform01(eng);
  x[0] = std::numeric_limits<double>::quiet_NaN();
  x[1] = std::numeric_limits<double>::infinity();
  x[2] = -std::numeric_limits<double>::infinity();
  x[3] = 0.0;
  x[4] = -0.0;
  x[5] = 709.7;
  x[6] = -708.3;
  for (const auto* t : available_kernels()) {
    CAPTURE(t->name);
    std::vector<double> out(x.size());
    t->exp(x, out);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double ref = exp_ref(x[i]);
      if (std::isnan(ref))
        CHECK(std::isnan(out[i]));
      else
        CHECK(same_bits(out[i], ref));
    }
  }
}

TEST_CASE("clause pass variants agree bit for bit") {
  for (std::size_t m : {0u, 1u, 3u, 4u, 5u, 17u, 1000u}) {
    const ClauseData d(37, m, 100 + m);
    ClauseOut ref(m);
    scalar_kernels().clause_pass(d.inputs(), kConst, ref.terms());
    for (const auto* t : available_kernels()) {
      CAPTURE(t->name);
      CAPTURE(m);
      ClauseOut out(m);
      t->clause_pass(d.inputs(), kConst, out.terms());
      CHECK(same_bits(out.c, ref.c));
      for (int k = 0; k < 3; ++k) CHECK(same_bits(out.flag[k], ref.flag[k]));
      CHECK(same_bits(out.grad, ref.grad));
      CHECK(same_bits(out.rigid, ref.rigid));
      CHECK(same_bits(out.dxs, ref.dxs));
      CHECK(same_bits(out.dxl, ref.dxl));
      CHECK(same_bits(out.expo, ref.expo));
    }
  }
}

TEST_CASE("scalar clause pass matches its definition") {
  const ClauseData d(11, 200, 3);
  ClauseOut out(200);
  scalar_kernels().clause_pass(d.inputs(), kConst, out.terms());
  for (std::size_t i = 0; i < 200; ++i) {
    double lit[3];
    for (int k = 0; k < 3; ++k) {
      const double v = d.v[d.var[k][i]];
      lit[k] = d.neg[k][i] ? 1.0 - v : v;
    }
    const double top = std::max({lit[0], lit[1], lit[2]});
    CHECK(out.c[i] == 1.0 - top);
    for (int k = 0; k < 3; ++k) CHECK(out.flag[k][i] == (lit[k] == top ? 1.0 : 0.0));
    CHECK(out.dxs[i] == doctest::Approx(20.0 * (d.xs[i] + 1e-3) * (out.c[i] - 0.25)));
    CHECK(out.dxl[i] == doctest::Approx(5.0 * std::exp(-d.xl[i]) * (out.c[i] - 0.05)).epsilon(1e-13));
    CHECK(out.expo[i] == doctest::Approx(std::exp(d.xl[i] - 40.0)).epsilon(1e-13));
  }
}

TEST_CASE("occurrence pass variants agree bit for bit") {
  for (std::size_t m : {1u, 2u, 4u, 7u, 513u}) {
    const ClauseData d(29, m, 200 + m);
    ClauseOut co(m);
    scalar_kernels().clause_pass(d.inputs(), kConst, co.terms());
    std::vector<double> inv(d.n);
    rng::Engine eng(m);
    for (auto& x : inv) x = rng::below(eng, 5) == 0 ? 0.0 : rng::uniform01(eng);
    OccurrenceInputs in;
    in.count = m;
    for (int k = 0; k < 3; ++k) {
      in.var[k] = d.var[k].data();
      in.negated[k] = d.neg[k].data();
      in.flag[k] = co.flag[k].data();
    }
    in.inv_denom = inv.data();
    in.expo = co.expo.data();
    in.grad = co.grad.data();
    in.rigid = co.rigid.data();
    in.eta_gain = 3000.0;
    in.zeta = 3e-3;

    std::vector<double> ref[3] = {std::vector<double>(m), std::vector<double>(m), std::vector<double>(m)};
    double* const rp[3] = {ref[0].data(), ref[1].data(), ref[2].data()};
    scalar_kernels().occurrence_pass(in, rp);
    for (const auto* t : available_kernels()) {
      CAPTURE(t->name);
      std::vector<double> out[3] = {std::vector<double>(m), std::vector<double>(m), std::vector<double>(m)};
      double* const op[3] = {out[0].data(), out[1].data(), out[2].data()};
      t->occurrence_pass(in, op);
      for (int k = 0; k < 3; ++k) CHECK(same_bits(out[k], ref[k]));
    }
  }
}

TEST_CASE("euler clamp variants agree and report non-finite input") {
  rng::Engine eng(9);
  for (std::size_t n : {0u, 1u, 3u, 4u, 9u, 1001u}) {
    std::vector<double> x0(n), dx(n);
    for (auto& x : x0) x = rng::uniform01(eng);
    for (auto& d : dx) d = 40.0 * (rng::uniform01(eng) - 0.5);
    std::vector<double> ref = x0;
    CHECK(scalar_kernels().euler_clamp(ref, dx, 0.1, 0.0, 1.0));
    for (double r : ref) CHECK((r >= 0.0 && r <= 1.0));
    for (const auto* t : available_kernels()) {
      CAPTURE(t->name);
      std::vector<double> x = x0;
      CHECK(t->euler_clamp(x, dx, 0.1, 0.0, 1.0));
      CHECK(same_bits(x, ref));
      if (n > 0) {
        auto bad = dx;
        bad[n - 1] = std::numeric_limits<double>::quiet_NaN();
        auto y = x0;
        CHECK_FALSE(t->euler_clamp(y, bad, 0.1, 0.0, 1.0));
        bad[n - 1] = std::numeric_limits<double>::infinity();
        y = x0;
        CHECK_FALSE(t->euler_clamp(y, bad, 0.1, 0.0, 1.0));
      }
    }
  }
}

TEST_CASE("full field and trajectories are identical across variants") {
  const auto inst = generate_planted(157, 4.3, kDefaultP0, 3);
  const auto& f = inst.formula;
  const auto p = scheduled_params(157);
  DmmState s0 = init_state(f, 4);
  rng::Engine eng(8);
  for (auto& x : s0.xs) x = rng::uniform01(eng);
  for (auto& x : s0.xl) x = 30.0 * rng::uniform01(eng);

  VectorField ref_field(f, scalar_kernels());
  Derivatives ref;
  ref_field.evaluate(s0, p, ref);
  for (const auto* t : available_kernels()) {
    CAPTURE(t->name);
    VectorField field(f, *t);
    Derivatives d;
    field.evaluate(s0, p, d);
    CHECK(same_bits(d.dv, ref.dv));
    CHECK(same_bits(d.dxs, ref.dxs));
    CHECK(same_bits(d.dxl, ref.dxl));

    // A wide xl spread switches to per-variable shifts.
    DmmState wide = s0;
    wide.xl[0] = 650.0;
    Derivatives a, b;
    ref_field.evaluate(wide, p, a);
    field.evaluate(wide, p, b);
    CHECK(same_bits(a.dv, b.dv));

    Integrator ia(f, p, std::nullopt, scalar_kernels());
    Integrator ib(f, p, std::nullopt, *t);
    DmmState sa = init_state(f, 4), sb = sa;
    for (std::uint64_t k = 0; k < 300; ++k) {
      ia.step(sa, k);
      ib.step(sb, k);
    }
    CHECK(sa == sb);
  }
}
