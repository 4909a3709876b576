#pragma once

// Physical non-idealities of an analog realization of the vector field:
// multiplicative tolerance on every arithmetic site, capacitor leakage, and
// white noise on the voltage sources that set gamma, delta and epsilon.

#include <cstdint>
#include <span>
#include <vector>

#include "dmm/dynamics.hpp"
#include "dmm/rng.hpp"
#include "dmm/sat_core.hpp"

namespace dmm {

enum class ToleranceMode {
  static_per_site,    // one factor per site for the whole run (resistor spread)
  resample_per_step,  // factors redrawn every step (temperature drift)
};

enum class ToleranceDistribution { uniform, gaussian };

struct ImperfectionModel {
  double eta_tol = 0.0;
  ToleranceMode tol_mode = ToleranceMode::static_per_site;
  ToleranceDistribution distribution = ToleranceDistribution::uniform;
  double kappa = 1e-3;
  double white_noise_level = 0.0;
  std::uint64_t seed = 0;

  /// Leakage at rate `kappa` and nothing else.
  static ImperfectionModel leakage_only(double kappa = 1e-3, std::uint64_t seed = 0);
  /// Every effect disabled.
  static ImperfectionModel none(std::uint64_t seed = 0);

  void validate() const;
  bool has_tolerance() const noexcept { return eta_tol > 0.0; }
};

/// Site map of the perturbed evaluation. Each clause carries the sites of the
/// clause function and both memory equations; each (variable, clause)
/// occurrence carries the sites of its contribution to dv. Comparators,
/// exponentials and the softmax denominator are not arithmetic sites; the
/// softmax counts once, where its weight is applied.
///
///   clause site          operation
///   kClauseValue         C = 1 - vmax
///   kShortPlusEps        xs + eps
///   kShortMinusGamma     C - gamma
///   kBetaProduct         beta * (xs + eps)
///   kShortProduct        (...) * (C - gamma)             -> dxs
///   kLongMinusDelta      C - delta
///   kAlphaProduct        alpha * exp(-xl)
///   kLongProduct         (...) * (C - delta)             -> dxl
///   kOneMinusShort       1 - xs
///   kGradProduct         xs * C
///   kRigidProduct        (1 - xs) * C
///
///   occurrence site      operation
///   kWeightApply         softmax weight w
///   kGainProduct         eta * w
///   kGradientProduct     (eta w) * xs C
///   kZetaProduct         zeta * (eta w)
///   kOnePlusZeta         1 + zeta eta w
///   kRigidityProduct     (1 + zeta eta w) * (1 - xs) R
///   kTermSum             gradient part + rigidity part
///   kAccumulate          running sum over the variable's clauses
namespace site {
enum Clause : unsigned {
  kClauseValue,
  kShortPlusEps,
  kShortMinusGamma,
  kBetaProduct,
  kShortProduct,
  kLongMinusDelta,
  kAlphaProduct,
  kLongProduct,
  kOneMinusShort,
  kGradProduct,
  kRigidProduct,
  kClauseCount
};
enum Occurrence : unsigned {
  kWeightApply,
  kGainProduct,
  kGradientProduct,
  kZetaProduct,
  kOnePlusZeta,
  kRigidityProduct,
  kTermSum,
  kAccumulate,
  kOccurrenceCount
};
}  // namespace site

/// Factor for one site, drawn from (seed, step key, site index) alone so the
/// result does not depend on evaluation order.
double site_factor(const ImperfectionModel& model, std::uint64_t step_key, std::uint64_t site_index);

/// Step key used for static_per_site draws.
inline constexpr std::uint64_t kStaticStepKey = ~std::uint64_t{0};

/// Multiplier per arithmetic site, every factor in [1 - eta_tol, 1 + eta_tol].
class ToleranceSites {
 public:
  ToleranceSites(const CnfFormula& f, const ImperfectionModel& model);

  /// Redraws the factors for `step` in resample_per_step mode; no-op otherwise.
  void prepare(std::uint64_t step);

  double clause(std::size_t m, site::Clause s) const noexcept {
    return clause_[m * site::kClauseCount + s];
  }
  double occurrence(std::size_t e, site::Occurrence s) const noexcept {
    return occurrence_[e * site::kOccurrenceCount + s];
  }
  std::span<const double> clause_factors() const noexcept { return clause_; }
  std::span<const double> occurrence_factors() const noexcept { return occurrence_; }

 private:
  void fill(std::uint64_t step_key);

  ImperfectionModel model_;
  std::vector<double> clause_;
  std::vector<double> occurrence_;
};

/// dv -= kappa v, dxs -= kappa xs, dxl -= kappa xl.
void apply_leakage(const DmmState& s, double kappa, Derivatives& d);

/// Vector field with tolerance factors and leakage applied. Falls back to the
/// clean bulk evaluator when eta_tol is zero (the result is bit-identical).
class PerturbedField {
 public:
  PerturbedField(const CnfFormula& f, const ImperfectionModel& model,
                 const simd::KernelTable& kernels = simd::active_kernels());

  void evaluate(const DmmState& s, const DmmParams& p, std::uint64_t step, Derivatives& out);

  /// Always takes the per-site path, even with eta_tol == 0.
  void evaluate_sites(const DmmState& s, const DmmParams& p, std::uint64_t step,
                      Derivatives& out);

  const ImperfectionModel& model() const noexcept { return model_; }

 private:
  ImperfectionModel model_;
  VectorField clean_;
  ToleranceSites sites_;
  ClauseScratch scratch_;
  std::vector<double> local_;
};

Derivatives perturbed_derivatives(const CnfFormula& f, const DmmState& s, const DmmParams& p,
                                  const ImperfectionModel& model, std::uint64_t step = 0);

/// gamma, delta, epsilon each scaled by (1 + level g), g standard normal,
/// floored at kParamFloor.
inline constexpr double kParamFloor = 1e-6;
DmmParams perturb_params(const DmmParams& p, double level, rng::Engine& step_rng);
/// Counter-based variant: the draws depend only on (seed, step).
DmmParams perturb_params(const DmmParams& p, double level, std::uint64_t seed, std::uint64_t step);

}  // namespace dmm
