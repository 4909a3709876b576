#pragma once

// Data-parallel inner loops of the vector field and the clamped Euler update.
//
// Every kernel has a scalar reference and, where the target supports it, a
// vectorized variant. Variants evaluate the same operations in the same order
// without fused multiply-add (the project builds with -ffp-contract=off), so
// their results are bit-identical; the active table is picked once from the
// CPU features and can be pinned with DMM_KERNELS=scalar|avx2.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace dmm::simd {

/// exp(x) by Cody-Waite reduction and a degree-13 polynomial; the reference
/// every variant reproduces bit for bit. Relative error below 1e-15 on
/// [-708, 709]; smaller arguments flush to 0, larger ones give +inf.
double exp_ref(double x) noexcept;

/// Structure-of-arrays view of the clauses. `negated[k][m]` is an all-ones
/// mask when literal k of clause m is negated, zero otherwise.
struct ClauseInputs {
  std::size_t count = 0;
  const std::int32_t* var[3] = {};
  const std::uint64_t* negated[3] = {};
  const double* v = nullptr;   // per variable, gathered through var[k]
  const double* xs = nullptr;  // per clause
  const double* xl = nullptr;  // per clause
};

struct ClauseConstants {
  double alpha;
  double beta;
  double gamma;
  double delta;
  double epsilon;
  double tie_tol;
  double softmax_shift;  // subtracted from xl before exponentiation
};

/// Per-clause outputs:
///   c      = 1 - max_k lit_k
///   flag_k = 1.0 if max - lit_k <= tie_tol else 0.0
///   grad   = xs * c
///   rigid  = (1 - xs) * c
///   dxs    = (beta * (xs + eps)) * (c - gamma)
///   dxl    = (alpha * exp(-xl)) * (c - delta)
///   expo   = exp(xl - softmax_shift)
struct ClauseTerms {
  double* c = nullptr;
  double* flag[3] = {};
  double* grad = nullptr;
  double* rigid = nullptr;
  double* dxs = nullptr;
  double* dxl = nullptr;
  double* expo = nullptr;
};

/// Signed contribution of each literal slot to its variable's dv:
///   w = expo * inv_denom[var]; gw = eta * w
///   term = gw * grad + (1 + zeta * gw) * (rigid * flag_k)
///   contrib_k = negated ? -term : term
struct OccurrenceInputs {
  std::size_t count = 0;
  const std::int32_t* var[3] = {};
  const std::uint64_t* negated[3] = {};
  const double* inv_denom = nullptr;  // per variable
  const double* expo = nullptr;
  const double* grad = nullptr;
  const double* rigid = nullptr;
  const double* flag[3] = {};
  double eta_gain = 0.0;
  double zeta = 0.0;
};

using ClausePassFn = void (*)(const ClauseInputs&, const ClauseConstants&, const ClauseTerms&);
using OccurrencePassFn = void (*)(const OccurrenceInputs&, double* const contrib[3]);

/// x <- min(max(x + dt * dx, lo), hi). Returns false if any dx is not finite;
/// x is updated regardless.
using EulerClampFn = bool (*)(std::span<double> x, std::span<const double> dx, double dt,
                              double lo, double hi);

/// out[i] = exp_ref(x[i]).
using ExpFn = void (*)(std::span<const double> x, std::span<double> out);

struct KernelTable {
  std::string_view name;
  ClausePassFn clause_pass;
  OccurrencePassFn occurrence_pass;
  EulerClampFn euler_clamp;
  ExpFn exp;
};

const KernelTable& scalar_kernels() noexcept;

/// nullptr when the build has no AVX2 variant or the CPU lacks AVX2.
const KernelTable* avx2_kernels() noexcept;

/// All variants usable on this machine, scalar first.
std::vector<const KernelTable*> available_kernels();

/// Runtime-selected table (best available unless DMM_KERNELS says otherwise).
const KernelTable& active_kernels();

}  // namespace dmm::simd
