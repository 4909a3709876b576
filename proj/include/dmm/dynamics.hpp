#pragma once

// The memory-augmented vector field for 3-SAT: clause functions, gradient-like
// and rigidity terms, per-variable softmax over long-term memories, and the
// time derivatives of the voltages and both memory families.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "dmm/sat_core.hpp"
#include "dmm/simd/kernels.hpp"

namespace dmm {

struct DmmParams {
  double alpha = 5.0;         // long-term memory rate
  double beta = 20.0;         // short-term memory rate
  double gamma = 0.25;        // short-term threshold
  double delta = 0.05;        // long-term threshold
  double epsilon = 1e-3;      // short-term floor
  double eta_gain = 3000.0;   // gradient gain
  double zeta = 3e-3;         // rigidity mixing; usually set from the size schedule
  double lambda_shift = 0.1;  // positive shift of the log-space long-term channel
  double dt = 0.14;           // Euler step; usually set from the size schedule
  double tie_tol = 1e-9;      // literals this close to the clause maximum count as maximal

  /// Throws std::invalid_argument when any constant is out of its domain.
  void validate() const;
};

/// Voltages v[N] in [0, 1], short-term memories xs[M] in [0, 1], long-term
/// memories xl[M] in [0, M].
struct DmmState {
  std::vector<double> v;
  std::vector<double> xs;
  std::vector<double> xl;

  friend bool operator==(const DmmState&, const DmmState&) = default;
};

struct Derivatives {
  std::vector<double> dv;
  std::vector<double> dxs;
  std::vector<double> dxl;

  void resize(std::size_t n, std::size_t m) {
    dv.assign(n, 0.0);
    dxs.assign(m, 0.0);
    dxl.assign(m, 0.0);
  }
  friend bool operator==(const Derivatives&, const Derivatives&) = default;
};

class DynamicsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Checks sizes against `f` and that every component lies within its bounds.
void check_state(const CnfFormula& f, const DmmState& s);

// Scalar building blocks. These are the readable definitions; VectorField
// evaluates the same quantities in bulk.

constexpr double literal_value(double v, bool negated) noexcept { return negated ? 1.0 - v : v; }

/// C = 1 - max of the clause's literal values.
double clause_value(const Clause& clause, std::span<const double> v);

/// G = q * C for member variable `var`; throws DynamicsError otherwise.
double gradient_term(const Clause& clause, std::uint32_t var, std::span<const double> v);

/// R = q * C when `var`'s literal attains the clause maximum (within
/// tie_tol), else 0.
double rigidity_term(const Clause& clause, std::uint32_t var, std::span<const double> v,
                     double tie_tol = 1e-9);

/// Numerically stable softmax (max subtracted before exponentiation).
std::vector<double> softmax_weights(std::span<const double> z);

/// Structure-of-arrays copy of a formula, laid out for the bulk kernels.
struct ClauseLayout {
  explicit ClauseLayout(const CnfFormula& f);

  std::size_t n_vars = 0;
  std::size_t n_clauses = 0;
  std::array<std::vector<std::int32_t>, 3> var;       // 0-based
  std::array<std::vector<std::uint64_t>, 3> negated;  // all-ones mask when negated
  std::vector<std::uint32_t> inc_offsets;             // N + 1
  std::vector<std::uint32_t> inc_clause;
  std::vector<std::uint8_t> inc_slot;
  std::vector<std::uint8_t> inc_negated;
};

/// Per-clause intermediates of one evaluation.
struct ClauseScratch {
  std::vector<double> c, grad, rigid;
  std::array<std::vector<double>, 3> flag;
  std::vector<double> expo;  // softmax numerators exp(xl_m - shift)
  std::vector<double> inv_denom;  // per variable
  std::array<std::vector<double>, 3> contrib;

  void resize(std::size_t n, std::size_t m);
};

/// Shift shared by every variable's softmax: max(xl). Empty when the spread of
/// xl is so wide that exp(xl - max) could underflow for a whole incidence set;
/// per-variable shifts are used then.
std::optional<double> global_softmax_shift(std::span<const double> xl);

/// Reusable evaluator of the vector field for one formula. Not thread-safe;
/// use one instance per run.
class VectorField {
 public:
  explicit VectorField(const CnfFormula& f,
                       const simd::KernelTable& kernels = simd::active_kernels());

  void evaluate(const DmmState& s, const DmmParams& p, Derivatives& out);

  const ClauseLayout& layout() const noexcept { return layout_; }
  const ClauseScratch& scratch() const noexcept { return scratch_; }
  const simd::KernelTable& kernels() const noexcept { return *kernels_; }

 private:
  ClauseLayout layout_;
  const simd::KernelTable* kernels_;
  ClauseScratch scratch_;

  void accumulate_local(const DmmState& s, const DmmParams& p, Derivatives& out);
};

/// One-shot evaluation of all derivatives.
Derivatives derivatives(const CnfFormula& f, const DmmState& s, const DmmParams& p);

/// A-priori bound on |dv_n| for a variable of the given degree.
double dv_bound(std::size_t degree, const DmmParams& p);

}  // namespace dmm
