// AVX2 variants, compiled with -mavx2 (no FMA). Reached only through the
// dispatch table after a CPU feature check.

#include <immintrin.h>

#include <algorithm>

#include "dmm/simd/kernels.hpp"
#include "exp_constants.hpp"

namespace dmm::simd {
namespace {

inline __m256d load_mask(const std::uint64_t* p) {
  return _mm256_castsi256_pd(_mm256_loadu_si256(reinterpret_cast<const __m256i*>(p)));
}

inline __m128i load_idx(const std::int32_t* p) {
  return _mm_loadu_si128(reinterpret_cast<const __m128i*>(p));
}

// Lane-wise exp_ref.
inline __m256d exp4(__m256d x) {
  using namespace exp_detail;
  const __m256d lo = _mm256_set1_pd(kMinArg);
  const __m256d hi = _mm256_set1_pd(kMaxArg);
  const __m256d nan_mask = _mm256_cmp_pd(x, x, _CMP_UNORD_Q);
  const __m256d under = _mm256_cmp_pd(x, lo, _CMP_LT_OQ);
  const __m256d over = _mm256_cmp_pd(x, hi, _CMP_GT_OQ);
  // Keep the reduction well defined in lanes that get overridden below.
  const __m256d xc = _mm256_blendv_pd(x, _mm256_setzero_pd(), _mm256_or_pd(nan_mask, _mm256_or_pd(under, over)));

  const __m256d k = _mm256_floor_pd(_mm256_add_pd(_mm256_mul_pd(xc, _mm256_set1_pd(kLog2e)),
                                                  _mm256_set1_pd(0.5)));
  const __m256d r = _mm256_sub_pd(_mm256_sub_pd(xc, _mm256_mul_pd(k, _mm256_set1_pd(kLn2Hi))),
                                  _mm256_mul_pd(k, _mm256_set1_pd(kLn2Lo)));
  __m256d p = _mm256_set1_pd(kCoeff[0]);
#pragma GCC unroll 16
  for (std::size_t i = 1; i < kCoeff.size(); ++i)
    p = _mm256_add_pd(_mm256_mul_pd(p, r), _mm256_set1_pd(kCoeff[i]));
  const __m256i biased =
      _mm256_slli_epi64(_mm256_castpd_si256(_mm256_add_pd(k, _mm256_set1_pd(kBiasMagic))), 52);
  __m256d y = _mm256_mul_pd(p, _mm256_castsi256_pd(biased));

  y = _mm256_blendv_pd(y, _mm256_setzero_pd(), under);
  y = _mm256_blendv_pd(y, _mm256_set1_pd(__builtin_inf()), over);
  return _mm256_blendv_pd(y, x, nan_mask);
}

void clause_pass_avx2(const ClauseInputs& in, const ClauseConstants& k, const ClauseTerms& out) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d alpha = _mm256_set1_pd(k.alpha);
  const __m256d beta = _mm256_set1_pd(k.beta);
  const __m256d gamma = _mm256_set1_pd(k.gamma);
  const __m256d delta = _mm256_set1_pd(k.delta);
  const __m256d eps = _mm256_set1_pd(k.epsilon);
  const __m256d tol = _mm256_set1_pd(k.tie_tol);
  const __m256d shift = _mm256_set1_pd(k.softmax_shift);
  const __m256d sign = _mm256_set1_pd(-0.0);

  std::size_t m = 0;
  for (; m + 4 <= in.count; m += 4) {
    __m256d lit[3];
    for (int j = 0; j < 3; ++j) {
      const __m256d v = _mm256_i32gather_pd(in.v, load_idx(in.var[j] + m), 8);
      lit[j] = _mm256_blendv_pd(v, _mm256_sub_pd(one, v), load_mask(in.negated[j] + m));
    }
    // _mm256_max_pd(b, a) == std::max(a, b), including which zero survives a tie.
    const __m256d vmax = _mm256_max_pd(lit[2], _mm256_max_pd(lit[1], lit[0]));
    const __m256d c = _mm256_sub_pd(one, vmax);
    for (int j = 0; j < 3; ++j) {
      const __m256d hit = _mm256_cmp_pd(_mm256_sub_pd(vmax, lit[j]), tol, _CMP_LE_OQ);
      _mm256_storeu_pd(out.flag[j] + m, _mm256_and_pd(hit, one));
    }
    const __m256d xs = _mm256_loadu_pd(in.xs + m);
    const __m256d xl = _mm256_loadu_pd(in.xl + m);
    _mm256_storeu_pd(out.c + m, c);
    _mm256_storeu_pd(out.grad + m, _mm256_mul_pd(xs, c));
    _mm256_storeu_pd(out.rigid + m, _mm256_mul_pd(_mm256_sub_pd(one, xs), c));
    _mm256_storeu_pd(out.dxs + m, _mm256_mul_pd(_mm256_mul_pd(beta, _mm256_add_pd(xs, eps)),
                                                _mm256_sub_pd(c, gamma)));
    _mm256_storeu_pd(out.dxl + m, _mm256_mul_pd(_mm256_mul_pd(alpha, exp4(_mm256_xor_pd(xl, sign))),
                                                _mm256_sub_pd(c, delta)));
    _mm256_storeu_pd(out.expo + m, exp4(_mm256_sub_pd(xl, shift)));
  }
  if (m < in.count) {
    ClauseInputs tail = in;
    tail.count = in.count - m;
    for (int j = 0; j < 3; ++j) {
      tail.var[j] += m;
      tail.negated[j] += m;
    }
    tail.xs += m;
    tail.xl += m;
    ClauseTerms t = out;
    t.c += m;
    t.grad += m;
    t.rigid += m;
    t.dxs += m;
    t.dxl += m;
    t.expo += m;
    for (int j = 0; j < 3; ++j) t.flag[j] += m;
    scalar_kernels().clause_pass(tail, k, t);
  }
}

void occurrence_pass_avx2(const OccurrenceInputs& in, double* const contrib[3]) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d eta = _mm256_set1_pd(in.eta_gain);
  const __m256d zeta = _mm256_set1_pd(in.zeta);
  const __m256d sign = _mm256_set1_pd(-0.0);
  std::size_t m = 0;
  for (; m + 4 <= in.count; m += 4) {
    const __m256d expo = _mm256_loadu_pd(in.expo + m);
    const __m256d grad = _mm256_loadu_pd(in.grad + m);
    const __m256d rigid = _mm256_loadu_pd(in.rigid + m);
    for (int j = 0; j < 3; ++j) {
      const __m256d inv = _mm256_i32gather_pd(in.inv_denom, load_idx(in.var[j] + m), 8);
      const __m256d gw = _mm256_mul_pd(eta, _mm256_mul_pd(expo, inv));
      const __m256d held = _mm256_mul_pd(rigid, _mm256_loadu_pd(in.flag[j] + m));
      const __m256d term = _mm256_add_pd(
          _mm256_mul_pd(gw, grad),
          _mm256_mul_pd(_mm256_add_pd(one, _mm256_mul_pd(zeta, gw)), held));
      const __m256d flip = _mm256_and_pd(load_mask(in.negated[j] + m), sign);
      _mm256_storeu_pd(contrib[j] + m, _mm256_xor_pd(term, flip));
    }
  }
  if (m < in.count) {
    OccurrenceInputs tail = in;
    tail.count = in.count - m;
    for (int j = 0; j < 3; ++j) {
      tail.var[j] += m;
      tail.negated[j] += m;
      tail.flag[j] += m;
    }
    tail.expo += m;
    tail.grad += m;
    tail.rigid += m;
    double* const shifted[3] = {contrib[0] + m, contrib[1] + m, contrib[2] + m};
    scalar_kernels().occurrence_pass(tail, shifted);
  }
}

bool euler_clamp_avx2(std::span<double> x, std::span<const double> dx, double dt, double lo,
                      double hi) {
  const __m256d vdt = _mm256_set1_pd(dt);
  const __m256d vlo = _mm256_set1_pd(lo);
  const __m256d vhi = _mm256_set1_pd(hi);
  const __m256d zero = _mm256_setzero_pd();
  __m256d bad = zero;
  std::size_t i = 0;
  const std::size_t n = x.size();
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_loadu_pd(dx.data() + i);
    bad = _mm256_or_pd(bad, _mm256_cmp_pd(_mm256_sub_pd(d, d), zero, _CMP_NEQ_UQ));
    const __m256d y = _mm256_add_pd(_mm256_loadu_pd(x.data() + i), _mm256_mul_pd(vdt, d));
    // Operand order mirrors std::min(std::max(y, lo), hi).
    _mm256_storeu_pd(x.data() + i, _mm256_min_pd(vhi, _mm256_max_pd(vlo, y)));
  }
  bool finite = _mm256_movemask_pd(bad) == 0;
  if (i < n) finite &= scalar_kernels().euler_clamp(x.subspan(i), dx.subspan(i), dt, lo, hi);
  return finite;
}

void exp_avx2(std::span<const double> x, std::span<double> out) {
  std::size_t i = 0;
  for (; i + 4 <= x.size(); i += 4) _mm256_storeu_pd(out.data() + i, exp4(_mm256_loadu_pd(x.data() + i)));
  for (; i < x.size(); ++i) out[i] = exp_ref(x[i]);
}

}  // namespace

const KernelTable* avx2_kernels_impl() noexcept {
  static const KernelTable table{"avx2", &clause_pass_avx2, &occurrence_pass_avx2,
                                 &euler_clamp_avx2, &exp_avx2};
  return &table;
}

}  // namespace dmm::simd
