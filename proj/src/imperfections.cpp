#include "dmm/imperfections.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dmm {

ImperfectionModel ImperfectionModel::leakage_only(double kappa, std::uint64_t seed) {
  ImperfectionModel m;
  m.eta_tol = 0.0;
  m.kappa = kappa;
  m.white_noise_level = 0.0;
  m.seed = seed;
  return m;
}

ImperfectionModel ImperfectionModel::none(std::uint64_t seed) {
  ImperfectionModel m = leakage_only(0.0, seed);
  return m;
}

void ImperfectionModel::validate() const {
  if (!(eta_tol >= 0.0 && eta_tol < 1.0)) throw std::invalid_argument("eta_tol must lie in [0, 1)");
  if (!(kappa >= 0.0 && kappa < 1.0)) throw std::invalid_argument("kappa must lie in [0, 1)");
  if (!(white_noise_level >= 0.0) || !std::isfinite(white_noise_level))
    throw std::invalid_argument("white noise level must be finite and non-negative");
}

double site_factor(const ImperfectionModel& model, std::uint64_t step_key,
                   std::uint64_t site_index) {
  const auto key = rng::derive(model.seed, step_key, site_index);
  if (model.distribution == ToleranceDistribution::uniform)
    return 1.0 + model.eta_tol * (2.0 * rng::to_unit(key) - 1.0);
  const double g = rng::normal_from(key, rng::mix64(key));
  return 1.0 + std::clamp(0.5 * model.eta_tol * g, -model.eta_tol, model.eta_tol);
}

ToleranceSites::ToleranceSites(const CnfFormula& f, const ImperfectionModel& model)
    : model_(model),
      clause_(f.num_clauses() * site::kClauseCount, 1.0),
      occurrence_(f.num_clauses() * 3 * site::kOccurrenceCount, 1.0) {
  model_.validate();
  if (model_.has_tolerance()) fill(kStaticStepKey);
}

void ToleranceSites::prepare(std::uint64_t step) {
  if (model_.has_tolerance() && model_.tol_mode == ToleranceMode::resample_per_step) fill(step);
}

void ToleranceSites::fill(std::uint64_t step_key) {
  for (std::size_t i = 0; i < clause_.size(); ++i) clause_[i] = site_factor(model_, step_key, i);
  const std::uint64_t base = clause_.size();
  for (std::size_t i = 0; i < occurrence_.size(); ++i)
    occurrence_[i] = site_factor(model_, step_key, base + i);
}

void apply_leakage(const DmmState& s, double kappa, Derivatives& d) {
  for (std::size_t i = 0; i < d.dv.size(); ++i) d.dv[i] = d.dv[i] - kappa * s.v[i];
  for (std::size_t i = 0; i < d.dxs.size(); ++i) d.dxs[i] = d.dxs[i] - kappa * s.xs[i];
  for (std::size_t i = 0; i < d.dxl.size(); ++i) d.dxl[i] = d.dxl[i] - kappa * s.xl[i];
}

PerturbedField::PerturbedField(const CnfFormula& f, const ImperfectionModel& model,
                               const simd::KernelTable& kernels)
    : model_(model), clean_(f, kernels), sites_(f, model) {
  scratch_.resize(f.n_vars(), f.num_clauses());
}

void PerturbedField::evaluate(const DmmState& s, const DmmParams& p, std::uint64_t step,
                              Derivatives& out) {
  if (!model_.has_tolerance()) {
    clean_.evaluate(s, p, out);
    if (model_.kappa > 0.0) apply_leakage(s, model_.kappa, out);
    return;
  }
  evaluate_sites(s, p, step, out);
}

// Same operation order as VectorField::evaluate and the scalar clause kernel,
// with each result scaled by its site factor; unit factors reproduce the
// clean derivatives exactly.
void PerturbedField::evaluate_sites(const DmmState& s, const DmmParams& p, std::uint64_t step,
                                    Derivatives& out) {
  const auto& lay = clean_.layout();
  const std::size_t n = lay.n_vars;
  const std::size_t m = lay.n_clauses;
  if (s.v.size() != n || s.xs.size() != m || s.xl.size() != m)
    throw DynamicsError("state size does not match formula");
  out.dv.resize(n);
  out.dxs.resize(m);
  out.dxl.resize(m);
  sites_.prepare(step);

  for (std::size_t j = 0; j < m; ++j) {
    double lit[3];
    for (int k = 0; k < 3; ++k) {
      const double v = s.v[lay.var[k][j]];
      lit[k] = lay.negated[k][j] ? 1.0 - v : v;
    }
    const double vmax = std::max(std::max(lit[0], lit[1]), lit[2]);
    for (int k = 0; k < 3; ++k) scratch_.flag[k][j] = (vmax - lit[k]) <= p.tie_tol ? 1.0 : 0.0;

    auto f = [&](site::Clause id) { return sites_.clause(j, id); };
    const double c = (1.0 - vmax) * f(site::kClauseValue);
    const double xs = s.xs[j];
    scratch_.c[j] = c;
    scratch_.grad[j] = (xs * c) * f(site::kGradProduct);
    const double one_minus_xs = (1.0 - xs) * f(site::kOneMinusShort);
    scratch_.rigid[j] = (one_minus_xs * c) * f(site::kRigidProduct);

    const double xs_eps = (xs + p.epsilon) * f(site::kShortPlusEps);
    const double beta_term = (p.beta * xs_eps) * f(site::kBetaProduct);
    const double c_gamma = (c - p.gamma) * f(site::kShortMinusGamma);
    out.dxs[j] = (beta_term * c_gamma) * f(site::kShortProduct);

    const double alpha_term = (p.alpha * simd::exp_ref(-s.xl[j])) * f(site::kAlphaProduct);
    const double c_delta = (c - p.delta) * f(site::kLongMinusDelta);
    out.dxl[j] = (alpha_term * c_delta) * f(site::kLongProduct);
  }

  const auto global = global_softmax_shift(s.xl);
  if (global)
    for (std::size_t j = 0; j < m; ++j) scratch_.expo[j] = simd::exp_ref(s.xl[j] - *global);
  const auto& off = lay.inc_offsets;
  for (std::size_t v = 0; v < n; ++v) {
    const auto b = off[v], e = off[v + 1];
    if (b == e) {
      out.dv[v] = 0.0;
      continue;
    }
    local_.resize(e - b);
    if (global) {
      for (auto i = b; i < e; ++i) local_[i - b] = scratch_.expo[lay.inc_clause[i]];
    } else {
      double shift = s.xl[lay.inc_clause[b]];
      for (auto i = b; i < e; ++i) shift = std::max(shift, s.xl[lay.inc_clause[i]]);
      for (auto i = b; i < e; ++i) local_[i - b] = simd::exp_ref(s.xl[lay.inc_clause[i]] - shift);
    }
    double denom = 0.0;
    for (auto i = b; i < e; ++i) denom += local_[i - b];
    const double inv = 1.0 / denom;
    double acc = 0.0;
    for (auto i = b; i < e; ++i) {
      const auto c = lay.inc_clause[i];
      auto f = [&](site::Occurrence id) { return sites_.occurrence(i, id); };
      const double w = (local_[i - b] * inv) * f(site::kWeightApply);
      const double gw = (p.eta_gain * w) * f(site::kGainProduct);
      const double rigid = scratch_.rigid[c] * scratch_.flag[lay.inc_slot[i]][c];
      const double grad_part = (gw * scratch_.grad[c]) * f(site::kGradientProduct);
      const double zeta_gw = (p.zeta * gw) * f(site::kZetaProduct);
      const double mix = (1.0 + zeta_gw) * f(site::kOnePlusZeta);
      const double rigid_part = (mix * rigid) * f(site::kRigidityProduct);
      const double term = (grad_part + rigid_part) * f(site::kTermSum);
      acc = (acc + (lay.inc_negated[i] ? -term : term)) * f(site::kAccumulate);
    }
    out.dv[v] = acc;
  }

  if (model_.kappa > 0.0) apply_leakage(s, model_.kappa, out);
}

Derivatives perturbed_derivatives(const CnfFormula& f, const DmmState& s, const DmmParams& p,
                                  const ImperfectionModel& model, std::uint64_t step) {
  check_state(f, s);
  PerturbedField field(f, model);
  Derivatives d;
  field.evaluate(s, p, step, d);
  return d;
}

namespace {

DmmParams scale_noisy(const DmmParams& p, double level, double g_gamma, double g_delta,
                      double g_eps) {
  DmmParams q = p;
  q.gamma = std::max(p.gamma * (1.0 + level * g_gamma), kParamFloor);
  q.delta = std::max(p.delta * (1.0 + level * g_delta), kParamFloor);
  q.epsilon = std::max(p.epsilon * (1.0 + level * g_eps), kParamFloor);
  return q;
}

}  // namespace

DmmParams perturb_params(const DmmParams& p, double level, rng::Engine& step_rng) {
  if (!(level >= 0.0)) throw std::invalid_argument("noise level must be non-negative");
  if (level == 0.0) return p;
  const double g1 = rng::normal(step_rng);
  const double g2 = rng::normal(step_rng);
  const double g3 = rng::normal(step_rng);
  return scale_noisy(p, level, g1, g2, g3);
}

DmmParams perturb_params(const DmmParams& p, double level, std::uint64_t seed,
                         std::uint64_t step) {
  if (!(level >= 0.0)) throw std::invalid_argument("noise level must be non-negative");
  if (level == 0.0) return p;
  std::array<double, 3> g{};
  for (std::uint64_t k = 0; k < 3; ++k) {
    const auto key = rng::derive(seed, step, 0x6e6f697365ULL + k);
    g[k] = rng::normal_from(key, rng::mix64(key));
  }
  return scale_noisy(p, level, g[0], g[1], g[2]);
}

}  // namespace dmm
