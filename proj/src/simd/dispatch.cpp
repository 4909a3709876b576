#include <cstdlib>
#include <stdexcept>
#include <string>

#include "dmm/simd/kernels.hpp"

namespace dmm::simd {

#if defined(DMM_HAVE_AVX2)
const KernelTable* avx2_kernels_impl() noexcept;
#endif

const KernelTable* avx2_kernels() noexcept {
#if defined(DMM_HAVE_AVX2)
  static const bool supported = __builtin_cpu_supports("avx2");
  return supported ? avx2_kernels_impl() : nullptr;
#else
  return nullptr;
#endif
}

std::vector<const KernelTable*> available_kernels() {
  std::vector<const KernelTable*> out{&scalar_kernels()};
  if (const auto* t = avx2_kernels()) out.push_back(t);
  return out;
}

namespace {

const KernelTable& select_kernels() {
  const char* env = std::getenv("DMM_KERNELS");
  const std::string want = env ? env : "";
  if (want == "scalar") return scalar_kernels();
  if (want == "avx2") {
    if (const auto* t = avx2_kernels()) return *t;
    throw std::runtime_error("DMM_KERNELS=avx2 requested but AVX2 is unavailable");
  }
  if (!want.empty() && want != "auto")
    throw std::runtime_error("unknown DMM_KERNELS value '" + want + "'");
  if (const auto* t = avx2_kernels()) return *t;
  return scalar_kernels();
}

}  // namespace

const KernelTable& active_kernels() {
  static const KernelTable& table = select_kernels();
  return table;
}

}  // namespace dmm::simd
