#include "dmm/circuit_blocks.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dmm::circuit {

void BlockConstants::validate() const {
  if (!(rail > 0.0)) throw BlockError("rail must be positive");
  if (!(v_thermal > 0.0)) throw BlockError("thermal voltage must be positive");
  if (!(log_ref_current > 0.0) || !(log_transconductance > 0.0))
    throw BlockError("log amplifier reference current and transconductance must be positive");
  if (!(antilog_scale > 0.0)) throw BlockError("antilog scale must be positive");
  if (!(multiplier_unit > 0.0)) throw BlockError("multiplier unit must be positive");
  if (!(time_units_per_second > 0.0)) throw BlockError("time scale must be positive");
}

double clip(double x, const BlockConstants& k) { return std::clamp(x, -k.rail, k.rail); }

double adder(double v1, double v2, const BlockConstants& k) { return clip(v1 + v2, k); }

double subtractor(double vp, double vm, const BlockConstants& k) { return clip(vp - vm, k); }

double multiplier(double x, double y, const BlockConstants& k) {
  return clip(x * y / k.multiplier_unit, k);
}

double gain(double v, double g, const BlockConstants& k) { return clip(g * v, k); }

double log_amp(double i_in, const BlockConstants& k) {
  if (!(i_in > 0.0)) throw BlockError("log amplifier needs a positive input current");
  return clip(k.log_gain * std::log10(i_in / k.log_ref_current), k);
}

double antilog_amp(double v_in, const BlockConstants& k) {
  return clip(k.antilog_scale * std::exp(-v_in / k.antilog_scale), k);
}

std::vector<double> softmax_block(std::span<const double> x, const BlockConstants& k) {
  if (x.empty()) throw BlockError("softmax block needs at least one input");
  double top = x[0] / k.v_thermal;
  for (double xi : x) top = std::max(top, xi / k.v_thermal);
  std::vector<double> y(x.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = std::exp(x[i] / k.v_thermal - top);
    sum += y[i];
  }
  for (auto& yi : y) yi = clip(k.multiplier_unit * (yi / sum), k);
  return y;
}

ComparatorOut comparator3(double v1, double v2, double v3, const BlockConstants& k,
                          double tie_tol) {
  ComparatorOut out;
  const double v[3] = {v1, v2, v3};
  out.v_max = clip(std::max(std::max(v1, v2), v3), k);
  for (int i = 0; i < 3; ++i)
    out.b[i] = out.v_max - v[i] <= tie_tol ? clip(out.v_max + k.v_diode, k) : -k.rail;
  return out;
}

namespace {
double gate(double v, double ctrl_plus, double ctrl_minus) {
  if (v >= 0.0) return ctrl_plus > 0.0 ? v : 0.0;
  return ctrl_minus > 0.0 ? v : 0.0;
}
}  // namespace

double bidirectional_switch(double v_in, double ctrl_plus, double ctrl_minus,
                            const BlockConstants& k) {
  return clip(gate(v_in, ctrl_plus, ctrl_minus), k);
}

double integrator_cell(double x, double dx, double dt_seconds, double lo, double hi,
                       const BlockConstants& k) {
  const double ctrl_plus = x < hi ? k.rail : -k.rail;
  const double ctrl_minus = x > lo ? k.rail : -k.rail;
  const double dt = dt_seconds * k.time_units_per_second;
  return std::min(std::max(x + dt * gate(dx, ctrl_plus, ctrl_minus), lo), hi);
}

namespace {

double xl_volts_per_unit(const BlockConstants& k) { return -k.log_gain / std::log(10.0); }

// One arm of the log-sum-exp path: 0.03 * z * exp(-xl).
double lse_arm(double z, double xl_cap, double kf, const BlockConstants& k) {
  const double l = log_amp(k.log_transconductance * z, k);
  const double s = adder(l, xl_cap, k);
  return antilog_amp(gain(s, k.antilog_scale / kf, k), k);
}

}  // namespace

ClauseModuleOut clause_module(const std::array<double, 3>& lits, double xs, double xl,
                              const DmmParams& p, const BlockConstants& k) {
  auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  for (double v : lits)
    if (!in_unit(v)) throw BlockError("literal voltage outside [0, 1]");
  if (!in_unit(xs)) throw BlockError("short-term memory outside [0, 1]");
  const double kf = xl_volts_per_unit(k);
  if (!(xl >= 0.0 && kf * xl <= k.rail))
    throw BlockError("long-term memory outside the capacitor's range [0, " +
                     std::to_string(k.rail / kf) + "]");

  ClauseModuleOut out;
  out.cmp = comparator3(lits[0], lits[1], lits[2], k, p.tie_tol);
  const double c = subtractor(1.0, out.cmp.v_max, k);
  out.c = c;

  const double shaped = multiplier(adder(xs, p.epsilon, k), subtractor(c, p.gamma, k), k);
  out.dxs = 4.0 * gain(shaped, p.beta / 4.0, k);

  const double xl_cap = clip(kf * xl, k);
  const double arm_c = lse_arm(adder(c, p.lambda_shift, k), xl_cap, kf, k);
  const double arm_d = lse_arm(adder(p.delta, p.lambda_shift, k), xl_cap, kf, k);
  out.dxl = gain(subtractor(arm_c, arm_d, k), p.alpha / k.antilog_scale, k);

  const double one_minus_xs = subtractor(1.0, xs, k);
  const double xs_c = multiplier(xs, c, k);
  for (int i = 0; i < 3; ++i) {
    const double r = bidirectional_switch(c, out.cmp.b[i], out.cmp.b[i], k);
    out.dv2[i] = multiplier(one_minus_xs, r, k);
    out.dv1[i] = adder(xs_c, multiplier(p.zeta, out.dv2[i], k), k);
  }
  return out;
}

// Reads the dynamics module on a one-clause, three-variable formula whose
// voltages are the literal values.
ClauseReference clause_reference(const std::array<double, 3>& lits, double xs, double xl,
                                 const DmmParams& p) {
  const Clause clause{{Literal{1, false}, Literal{2, false}, Literal{3, false}}};
  const CnfFormula f(3, {clause});
  const DmmState s{{lits[0], lits[1], lits[2]}, {xs}, {xl}};
  VectorField field(f, simd::scalar_kernels());
  Derivatives d;
  field.evaluate(s, p, d);
  ClauseReference r{};
  r.c = clause_value(clause, s.v);
  r.dxs = d.dxs[0];
  r.dxl = d.dxl[0];
  for (std::uint32_t i = 0; i < 3; ++i) {
    const double g = gradient_term(clause, i + 1, s.v);
    const double rig = rigidity_term(clause, i + 1, s.v, p.tie_tol);
    r.dv1[i] = xs * g + p.zeta * (1.0 - xs) * rig;
    r.dv2[i] = (1.0 - xs) * rig;
  }
  return r;
}

std::vector<double> variable_module(const CnfFormula& f, const DmmState& s, const DmmParams& p,
                                    const BlockConstants& k) {
  check_state(f, s);
  std::vector<ClauseModuleOut> mods;
  mods.reserve(f.num_clauses());
  for (std::size_t m = 0; m < f.num_clauses(); ++m) {
    std::array<double, 3> lits{};
    for (int j = 0; j < 3; ++j) {
      const auto& lit = f.clause(m).lits[j];
      lits[j] = literal_value(s.v[lit.var - 1], lit.negated);
    }
    mods.push_back(clause_module(lits, s.xs[m], s.xl[m], p, k));
  }
  std::vector<double> dv(f.n_vars(), 0.0);
  std::vector<double> x;
  for (std::uint32_t n = 1; n <= f.n_vars(); ++n) {
    const auto occ = f.incidence(n);
    if (occ.empty()) continue;
    x.clear();
    for (const auto& o : occ) x.push_back(k.v_thermal * s.xl[o.clause]);
    const auto w = softmax_block(x, k);
    double acc = 0.0;
    for (std::size_t i = 0; i < occ.size(); ++i) {
      const auto& mod = mods[occ[i].clause];
      const double q = f.clause(occ[i].clause).lits[occ[i].slot].polarity();
      acc += q * (p.eta_gain * (w[i] / k.multiplier_unit) * mod.dv1[occ[i].slot] +
                  mod.dv2[occ[i].slot]);
    }
    dv[n - 1] = acc;
  }
  return dv;
}

}  // namespace dmm::circuit
