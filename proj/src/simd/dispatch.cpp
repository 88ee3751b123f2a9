#include <atomic>
#include <cstdlib>
#include <string_view>

#include <spdlog/spdlog.h>

#include "ecam/simd/kernels.hpp"

namespace ecam::simd {

#if defined(ECAM_HAVE_AVX2)
const KernelTable& avx2_kernel_table();
#endif
#if defined(ECAM_HAVE_NEON)
const KernelTable& neon_kernel_table();
#endif

namespace {

#if defined(ECAM_HAVE_AVX2)
bool cpu_has_avx2_fma() {
#if defined(__GNUC__) || defined(__clang__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}
#endif

const KernelTable* best_available() {
  if (const auto* t = avx2_kernels()) return t;
  if (const auto* t = neon_kernels()) return t;
  return &scalar_kernels();
}

const KernelTable* resolve() {
  const char* env = std::getenv("ECAM_SIMD");
  std::string_view want = env != nullptr ? env : "auto";
  if (want == "scalar") return &scalar_kernels();
  if (want == "avx2" || want == "neon") {
    const KernelTable* t = want == "avx2" ? avx2_kernels() : neon_kernels();
    if (t != nullptr) return t;
    spdlog::warn("ECAM_SIMD={} not available on this machine, using auto selection", want);
  } else if (want != "auto") {
    spdlog::warn("unknown ECAM_SIMD value '{}', using auto selection", want);
  }
  return best_available();
}

std::atomic<const KernelTable*> g_active{nullptr};

}  // namespace

const KernelTable* avx2_kernels() {
#if defined(ECAM_HAVE_AVX2)
  static const bool ok = cpu_has_avx2_fma();
  return ok ? &avx2_kernel_table() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable* neon_kernels() {
#if defined(ECAM_HAVE_NEON)
  return &neon_kernel_table();
#else
  return nullptr;
#endif
}

std::vector<const KernelTable*> available_kernels() {
  std::vector<const KernelTable*> out{&scalar_kernels()};
  if (const auto* t = avx2_kernels()) out.push_back(t);
  if (const auto* t = neon_kernels()) out.push_back(t);
  return out;
}

const KernelTable& active() {
  const KernelTable* t = g_active.load(std::memory_order_acquire);
  if (t == nullptr) {
    const KernelTable* resolved = resolve();
    // Racing first callers resolve to the same table; keep whichever won.
    if (g_active.compare_exchange_strong(t, resolved, std::memory_order_acq_rel)) t = resolved;
    spdlog::debug("ecam kernels: {}", t->name);
  }
  return *t;
}

void set_active(const KernelTable* table) { g_active.store(table, std::memory_order_release); }

}  // namespace ecam::simd
