#pragma once

// Clamped forward-Euler integration of the vector field, size-dependent
// parameter schedules, and the solve loop with a thresholded SAT read-out.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "dmm/dynamics.hpp"
#include "dmm/imperfections.hpp"
#include "dmm/sat_core.hpp"

namespace dmm {

inline constexpr std::uint64_t kDefaultMaxSteps = 2'000'000;
inline constexpr double kTimeUnitsPerSecond = 100.0;

/// Tuned Euler step as a function of problem size: 0.230 N^-0.069.
double default_dt(std::uint32_t n);

/// Tuned rigidity mixing: exp(6.83 (ln N)^-1.10 - 6.53). Requires n >= 2.
double default_zeta(std::uint32_t n);

/// Default constants with dt and zeta taken from the schedules unless overridden.
DmmParams scheduled_params(std::uint32_t n, std::optional<double> dt = std::nullopt,
                           std::optional<double> zeta = std::nullopt);

/// Projected hardware seconds for a span of integration time.
double time_scale_seconds(double units);

/// v uniform in [0, 1) from the seeded engine; both memories at zero.
DmmState init_state(const CnfFormula& f, std::uint64_t seed);

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Stateful integrator for one formula: owns its buffers and the optional
/// imperfection model. step() advances one clamped Euler step.
class Integrator {
 public:
  Integrator(const CnfFormula& f, const DmmParams& p,
             std::optional<ImperfectionModel> model = std::nullopt,
             const simd::KernelTable& kernels = simd::active_kernels());

  /// Advances `s` in place. `step_index` keys the per-step random streams.
  /// Throws NumericalError on a non-finite derivative.
  void step(DmmState& s, std::uint64_t step_index);

  const DmmParams& params() const noexcept { return params_; }
  const Derivatives& last_derivatives() const noexcept { return deriv_; }

 private:
  DmmParams params_;
  std::optional<ImperfectionModel> model_;
  double xl_max_;
  const simd::KernelTable* kernels_;
  VectorField clean_;
  std::optional<PerturbedField> perturbed_;
  Derivatives deriv_;
};

/// Pure single step: clamp(s + dt D) with D the (optionally perturbed) derivatives.
DmmState step(const CnfFormula& f, const DmmState& s, const DmmParams& p,
              const ImperfectionModel* model = nullptr, std::uint64_t step_index = 0);

struct TraceSample {
  double time = 0.0;
  std::vector<double> v;
};

struct SolverConfig {
  std::uint64_t max_steps = kDefaultMaxSteps;
  std::optional<double> dt_override;
  std::optional<double> zeta_override;
  std::uint64_t check_interval = 1;
  std::uint64_t seed = 0;
  std::optional<ImperfectionModel> imperfections;
  /// Record v every this many steps (0 disables the trajectory sample).
  std::uint64_t trace_interval = 0;

  void validate() const;
};

struct RunResult {
  bool solved = false;
  std::uint64_t steps = 0;
  double integrated_time = 0.0;
  std::optional<Assignment> assignment;
  std::uint64_t seed = 0;
  std::vector<TraceSample> trajectory;
};

/// Digital read-out: variable true iff v > 0.5.
Assignment threshold(std::span<const double> v);

/// Resumable solve: advance until solved or a step horizon is reached.
class SolveSession {
 public:
  SolveSession(const CnfFormula& f, const SolverConfig& config);

  /// Runs until solved or `steps() == horizon` (capped at max_steps).
  const RunResult& run_until(std::uint64_t horizon);
  const RunResult& run() { return run_until(config_.max_steps); }

  bool finished() const noexcept { return result_.solved || result_.steps >= config_.max_steps; }
  const RunResult& result() const noexcept { return result_; }
  const DmmState& state() const noexcept { return state_; }
  const DmmParams& params() const noexcept { return integrator_.params(); }

 private:
  bool check();

  const CnfFormula* formula_;
  SolverConfig config_;
  Integrator integrator_;
  DmmState state_;
  RunResult result_;
  bool checked_initial_ = false;
};

RunResult solve(const CnfFormula& f, const SolverConfig& config);

}  // namespace dmm
