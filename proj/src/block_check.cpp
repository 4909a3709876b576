#include <cmath>
#include <ostream>

#include "dmm/circuit_blocks.hpp"
#include "dmm/integrator.hpp"
#include "dmm/rng.hpp"

namespace dmm::circuit {

namespace {

using Real = long double;

double clip_ref(Real x, const BlockConstants& k) {
  return static_cast<double>(std::fmin(std::fmax(x, -static_cast<Real>(k.rail)), static_cast<Real>(k.rail)));
}

class Recorder {
 public:
  explicit Recorder(CheckReport& r) : r_(r) {}

  void relative(const std::string& suite, const std::string& q, std::size_t i, double value,
                double ref, double tol) {
    const double err = value == ref ? 0.0 : std::abs(value - ref) / std::abs(ref);
    add(suite, q, i, value, ref, err, err <= tol);
  }

  // Relative error, switching to absolute below `floor`.
  void mixed(const std::string& suite, const std::string& q, std::size_t i, double value,
             double ref, double rel_tol, double floor) {
    const double diff = std::abs(value - ref);
    const bool small = std::abs(ref) * rel_tol < floor;
    const double err = small ? diff : diff / std::abs(ref);
    add(suite, q, i, value, ref, err, small ? diff <= floor : err <= rel_tol);
  }

 private:
  void add(const std::string& suite, const std::string& q, std::size_t i, double value, double ref,
           double err, bool pass) {
    if (!std::isfinite(err)) pass = false;
    r_.rows.push_back({suite, q, i, value, ref, err, pass});
    auto& worst = r_.worst_error[suite];
    worst = std::max(worst, err);
    if (!pass) ++r_.failures;
  }
  CheckReport& r_;
};

// i-th of n points spread over [lo, hi].
double grid(std::size_t i, std::size_t n, double lo, double hi) {
  return n < 2 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
}

// A second coordinate decorrelated from the first.
double scrambled(std::size_t i, std::size_t n, double lo, double hi) {
  return grid((i * 7919 + 13) % n, n, lo, hi);
}

void block_suites(Recorder& rec, const CheckOptions& opt, const BlockConstants& k) {
  const std::size_t n = opt.grid_points;
  const double tol = opt.block_rel_tol;
  for (std::size_t i = 0; i < n; ++i) {
    // Ranges run past the rails so saturation is exercised too.
    const double a = grid(i, n, -4.0, 4.0);
    const double b = scrambled(i, n, -4.0, 4.0);
    rec.relative("adder", "out", i, adder(a, b, k), clip_ref(Real(a) + b, k), tol);
    rec.relative("subtractor", "out", i, subtractor(a, b, k), clip_ref(Real(a) - b, k), tol);
    rec.relative("multiplier", "out", i, multiplier(a, b, k),
                 clip_ref(Real(a) * b / k.multiplier_unit, k), tol);

    const double current = std::pow(10.0, grid(i, n, -12.0, -1.0));
    rec.relative("log_amp", "out", i, log_amp(current, k),
                 clip_ref(Real(k.log_gain) * std::log10(Real(current) / k.log_ref_current), k), tol);

    const double v = grid(i, n, -0.15, 1.0);
    rec.relative("antilog_amp", "out", i, antilog_amp(v, k),
                 clip_ref(Real(k.antilog_scale) * std::exp(-Real(v) / k.antilog_scale), k), tol);

    const std::size_t width = 1 + i % 8;
    std::vector<double> x(width);
    for (std::size_t j = 0; j < width; ++j) x[j] = scrambled(i * 8 + j, 8 * n, -0.2, 0.2);
    const auto y = softmax_block(x, k);
    Real sum = 0;
    for (double xj : x) sum += std::exp(Real(xj) / k.v_thermal);
    for (std::size_t j = 0; j < width; ++j)
      rec.relative("softmax", "y" + std::to_string(j + 1), i, y[j],
                   static_cast<double>(k.multiplier_unit * std::exp(Real(x[j]) / k.v_thermal) / sum),
                   tol);

    // Comparator inputs on a coarse lattice so exact ties occur.
    const double c1 = std::round(grid(i, n, 0.0, 1.0) * 8.0) / 8.0;
    const double c2 = std::round(scrambled(i, n, 0.0, 1.0) * 8.0) / 8.0;
    const double c3 = std::round(scrambled(i + 500, n, 0.0, 1.0) * 8.0) / 8.0;
    const auto cmp = comparator3(c1, c2, c3, k);
    const double top = std::max({c1, c2, c3});
    rec.relative("comparator3", "vmax", i, cmp.v_max, top, tol);
    const double cv[3] = {c1, c2, c3};
    for (int j = 0; j < 3; ++j)
      rec.relative("comparator3", "b" + std::to_string(j + 1), i, cmp.b[j],
                   cv[j] == top ? top + k.v_diode : -k.rail, tol);

    const double ctrl_p = (i / 2) % 2 ? k.rail : -k.rail;
    const double ctrl_m = i % 2 ? k.rail : -k.rail;
    const double pass = (a >= 0.0 && ctrl_p > 0.0) || (a < 0.0 && ctrl_m > 0.0) ? a : 0.0;
    rec.relative("switch", "out", i, bidirectional_switch(a, ctrl_p, ctrl_m, k), clip_ref(pass, k),
                 tol);
  }
}

void clause_suites(Recorder& rec, const BlockGraph& graph, const CheckOptions& opt,
                   const BlockConstants& k) {
  rng::Engine eng(opt.seed);
  const DmmParams p = scheduled_params(100);
  const double xl_max = std::min(20.0, k.rail * std::log(10.0) / -k.log_gain);
  const double rel = opt.clause_rel_tol, floor = opt.clause_abs_tol;
  for (std::size_t i = 0; i < opt.clause_samples; ++i) {
    std::array<double, 3> lits{};
    for (auto& l : lits) l = rng::uniform01(eng);
    // Satisfied clauses and exact ties.
    if (i % 5 == 0) lits[i % 3] = 1.0;
    if (i % 7 == 0) lits[(i + 1) % 3] = lits[(i + 2) % 3];
    const double xs = rng::uniform01(eng);
    const double xl = xl_max * rng::uniform01(eng);

    const auto mod = clause_module(lits, xs, xl, p, k);
    const auto ref = clause_reference(lits, xs, xl, p);
    rec.mixed("clause_module", "c", i, mod.c, ref.c, rel, floor);
    rec.mixed("clause_module", "dxs", i, mod.dxs, ref.dxs, rel, floor);
    rec.mixed("clause_module", "dxl", i, mod.dxl, ref.dxl, rel, floor);
    for (int j = 0; j < 3; ++j) {
      rec.mixed("clause_module", "dv1_" + std::to_string(j + 1), i, mod.dv1[j], ref.dv1[j], rel, floor);
      rec.mixed("clause_module", "dv2_" + std::to_string(j + 1), i, mod.dv2[j], ref.dv2[j], rel, floor);
    }

    const auto g = run_clause_graph(graph, lits, xs, xl, p.zeta);
    rec.mixed("clause_graph", "dxs", i, g.dxs, mod.dxs, rel, floor);
    rec.mixed("clause_graph", "dxl", i, g.dxl, mod.dxl, rel, floor);
    for (int j = 0; j < 3; ++j) {
      rec.mixed("clause_graph", "dv1_" + std::to_string(j + 1), i, g.dv1[j], mod.dv1[j], rel, floor);
      rec.mixed("clause_graph", "dv2_" + std::to_string(j + 1), i, g.dv2[j], mod.dv2[j], rel, floor);
    }
  }

  // Log-space rate against the direct form at the stated clause values.
  const double cs[] = {0.0, 0.05, 0.5, 1.0};
  std::size_t idx = 0;
  for (double c : cs)
    for (int t = 0; t <= 20; ++t) {
      const double xl = grid(t, 21, 0.0, xl_max);
      const Real lam = p.lambda_shift;
      const Real log_form =
          Real(p.alpha) * (std::exp(std::log(Real(c) + lam) - xl) - std::exp(std::log(Real(p.delta) + lam) - xl));
      const Real direct = Real(p.alpha) * std::exp(-Real(xl)) * (Real(c) - p.delta);
      rec.relative("log_identity", "closed_form", idx, static_cast<double>(log_form),
                   static_cast<double>(direct), 1e-12);
      const auto mod = clause_module({1.0 - c, 0.0, 0.0}, 0.5, xl, p, k);
      rec.mixed("log_identity", "pipeline", idx, mod.dxl, static_cast<double>(direct), rel, floor);
      ++idx;
    }
}

}  // namespace

CheckReport run_block_checks(const BlockGraph& graph, const CheckOptions& opt,
                             const BlockConstants& k) {
  k.validate();
  CheckReport report;
  Recorder rec(report);
  block_suites(rec, opt, k);
  clause_suites(rec, graph, opt, k);
  return report;
}

void write_check_csv(std::ostream& os, const CheckReport& report) {
  const auto old = os.precision(17);
  os << "suite,quantity,index,value,reference,error,pass\n";
  for (const auto& r : report.rows)
    os << r.suite << ',' << r.quantity << ',' << r.index << ',' << r.value << ',' << r.reference
       << ',' << r.error << ',' << (r.pass ? 1 : 0) << '\n';
  os.precision(old);
}

}  // namespace dmm::circuit
