#include "dmm/integrator.hpp"

#include <cmath>
#include <string>

#include "dmm/rng.hpp"

namespace dmm {

double default_dt(std::uint32_t n) {
  if (n < 1) throw std::invalid_argument("default_dt needs n >= 1");
  return 0.230 * std::pow(static_cast<double>(n), -0.069);
}

double default_zeta(std::uint32_t n) {
  if (n < 2) throw std::invalid_argument("default_zeta needs n >= 2");
  const double ln_n = std::log(static_cast<double>(n));
  return std::exp(6.83 * std::pow(ln_n, -1.10) - 6.53);
}

DmmParams scheduled_params(std::uint32_t n, std::optional<double> dt, std::optional<double> zeta) {
  DmmParams p;
  p.dt = dt ? *dt : default_dt(n);
  p.zeta = zeta ? *zeta : default_zeta(std::max<std::uint32_t>(n, 2));
  p.validate();
  return p;
}

double time_scale_seconds(double units) {
  if (!(units >= 0.0)) throw std::invalid_argument("time must be non-negative");
  return units / kTimeUnitsPerSecond;
}

DmmState init_state(const CnfFormula& f, std::uint64_t seed) {
  rng::Engine eng(seed);
  DmmState s;
  s.v.resize(f.n_vars());
  for (auto& x : s.v) x = rng::uniform01(eng);
  s.xs.assign(f.num_clauses(), 0.0);
  s.xl.assign(f.num_clauses(), 0.0);
  return s;
}

Integrator::Integrator(const CnfFormula& f, const DmmParams& p,
                       std::optional<ImperfectionModel> model, const simd::KernelTable& kernels)
    : params_(p),
      model_(std::move(model)),
      xl_max_(static_cast<double>(f.num_clauses())),
      kernels_(&kernels),
      clean_(f, kernels) {
  params_.validate();
  if (model_) {
    model_->validate();
    perturbed_.emplace(f, *model_, kernels);
  }
  deriv_.resize(f.n_vars(), f.num_clauses());
}

void Integrator::step(DmmState& s, std::uint64_t step_index) {
  if (perturbed_) {
    const DmmParams p = model_->white_noise_level > 0.0
                            ? perturb_params(params_, model_->white_noise_level, model_->seed, step_index)
                            : params_;
    perturbed_->evaluate(s, p, step_index, deriv_);
  } else {
    clean_.evaluate(s, params_, deriv_);
  }
  const double dt = params_.dt;
  bool ok = kernels_->euler_clamp(s.v, deriv_.dv, dt, 0.0, 1.0);
  ok &= kernels_->euler_clamp(s.xs, deriv_.dxs, dt, 0.0, 1.0);
  ok &= kernels_->euler_clamp(s.xl, deriv_.dxl, dt, 0.0, xl_max_);
  if (!ok)
    throw NumericalError("non-finite derivative at step " + std::to_string(step_index) +
                         "; check parameters and imperfection settings");
}

DmmState step(const CnfFormula& f, const DmmState& s, const DmmParams& p,
              const ImperfectionModel* model, std::uint64_t step_index) {
  check_state(f, s);
  Integrator integ(f, p, model ? std::optional<ImperfectionModel>(*model) : std::nullopt);
  DmmState next = s;
  integ.step(next, step_index);
  return next;
}

void SolverConfig::validate() const {
  if (max_steps < 1) throw std::invalid_argument("max_steps must be at least 1");
  if (check_interval < 1) throw std::invalid_argument("check_interval must be at least 1");
  if (imperfections) imperfections->validate();
}

Assignment threshold(std::span<const double> v) {
  Assignment a(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) a.values[i] = v[i] > 0.5 ? 1 : 0;
  return a;
}

SolveSession::SolveSession(const CnfFormula& f, const SolverConfig& config)
    : formula_(&f),
      config_(config),
      integrator_(f, scheduled_params(f.n_vars(), config.dt_override, config.zeta_override),
                  config.imperfections),
      state_(init_state(f, config.seed)) {
  config_.validate();
  result_.seed = config_.seed;
}

bool SolveSession::check() {
  // Cheap rejection first: any clause with every literal at or below 0.5 is
  // false under the read-out.
  for (const auto& c : formula_->clauses()) {
    bool any = false;
    for (const auto& lit : c.lits) {
      const double v = state_.v[lit.var - 1];
      if (lit.negated ? !(v > 0.5) : v > 0.5) {
        any = true;
        break;
      }
    }
    if (!any) return false;
  }
  auto a = threshold(state_.v);
  if (!evaluate(*formula_, a).satisfied) return false;
  result_.solved = true;
  result_.assignment = std::move(a);
  return true;
}

const RunResult& SolveSession::run_until(std::uint64_t horizon) {
  horizon = std::min(horizon, config_.max_steps);
  const double dt = integrator_.params().dt;
  auto record = [&] {
    if (config_.trace_interval && result_.steps % config_.trace_interval == 0)
      result_.trajectory.push_back({result_.integrated_time, state_.v});
  };
  if (!checked_initial_) {
    checked_initial_ = true;
    record();
    if (check()) return result_;
  }
  while (!result_.solved && result_.steps < horizon) {
    integrator_.step(state_, result_.steps);
    ++result_.steps;
    result_.integrated_time = static_cast<double>(result_.steps) * dt;
    record();
    if (result_.steps % config_.check_interval == 0 && check()) break;
  }
  return result_;
}

RunResult solve(const CnfFormula& f, const SolverConfig& config) {
  SolveSession session(f, config);
  return session.run();
}

}  // namespace dmm
