#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "dmm/simd/kernels.hpp"
#include "exp_constants.hpp"

namespace dmm::simd {

double exp_ref(double x) noexcept {
  using namespace exp_detail;
  if (x != x) return x;
  if (x < kMinArg) return 0.0;
  if (x > kMaxArg) return std::numeric_limits<double>::infinity();
  const double k = std::floor(x * kLog2e + 0.5);
  const double r = (x - k * kLn2Hi) - k * kLn2Lo;
  double p = kCoeff[0];
#pragma GCC unroll 16
  for (std::size_t i = 1; i < kCoeff.size(); ++i) p = p * r + kCoeff[i];
  // k + 1023 lands in the low mantissa bits of (k + 2^52 + 1023).
  const auto biased = std::bit_cast<std::uint64_t>(k + kBiasMagic) << 52;
  return p * std::bit_cast<double>(biased);
}

namespace {

void clause_pass_scalar(const ClauseInputs& in, const ClauseConstants& k, const ClauseTerms& out) {
  for (std::size_t m = 0; m < in.count; ++m) {
    double lit[3];
    for (int j = 0; j < 3; ++j) {
      const double v = in.v[in.var[j][m]];
      lit[j] = in.negated[j][m] ? 1.0 - v : v;
    }
    const double vmax = std::max(std::max(lit[0], lit[1]), lit[2]);
    const double c = 1.0 - vmax;
    for (int j = 0; j < 3; ++j) out.flag[j][m] = (vmax - lit[j]) <= k.tie_tol ? 1.0 : 0.0;
    const double xs = in.xs[m];
    const double xl = in.xl[m];
    out.c[m] = c;
    out.grad[m] = xs * c;
    out.rigid[m] = (1.0 - xs) * c;
    out.dxs[m] = (k.beta * (xs + k.epsilon)) * (c - k.gamma);
    out.dxl[m] = (k.alpha * exp_ref(-xl)) * (c - k.delta);
    out.expo[m] = exp_ref(xl - k.softmax_shift);
  }
}

void occurrence_pass_scalar(const OccurrenceInputs& in, double* const contrib[3]) {
  for (std::size_t m = 0; m < in.count; ++m) {
    for (int j = 0; j < 3; ++j) {
      const double w = in.expo[m] * in.inv_denom[in.var[j][m]];
      const double gw = in.eta_gain * w;
      const double term = gw * in.grad[m] + (1.0 + in.zeta * gw) * (in.rigid[m] * in.flag[j][m]);
      contrib[j][m] = in.negated[j][m] ? -term : term;
    }
  }
}

bool euler_clamp_scalar(std::span<double> x, std::span<const double> dx, double dt, double lo,
                        double hi) {
  bool finite = true;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = dx[i];
    finite &= (d - d) == 0.0;
    x[i] = std::min(std::max(x[i] + dt * d, lo), hi);
  }
  return finite;
}

void exp_scalar(std::span<const double> x, std::span<double> out) {
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = exp_ref(x[i]);
}

}  // namespace

const KernelTable& scalar_kernels() noexcept {
  static const KernelTable table{"scalar", &clause_pass_scalar, &occurrence_pass_scalar,
                                 &euler_clamp_scalar, &exp_scalar};
  return table;
}

}  // namespace dmm::simd
