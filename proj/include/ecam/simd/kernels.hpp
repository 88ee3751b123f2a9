#pragma once

// Flat double-precision kernels behind every tensor reduction and product.
//
// One table per instruction set. The scalar table is the reference; the
// vector tables must agree with it to within reassociation error for the
// reductions (dot, sum, axpy under FMA) and bit-for-bit for the elementwise
// ops (relu, max, divide). The active table is picked once per process from
// CPU features, overridable with ECAM_SIMD=scalar|avx2|neon|auto.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace ecam::simd {

struct KernelTable {
  std::string_view name;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // sum_i x[i]
  double (*sum)(const double* x, std::size_t n);
  // max_i x[i], n >= 1
  double (*max)(const double* x, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // out[i] = x[i] > 0 ? x[i] : +0.0
  void (*relu)(const double* x, double* out, std::size_t n);
  // out[i] = x[i] / divisor
  void (*divide)(const double* x, double divisor, double* out, std::size_t n);
};

const KernelTable& scalar_kernels();

// nullptr when the variant was not compiled in or the CPU lacks the feature.
const KernelTable* avx2_kernels();
const KernelTable* neon_kernels();

// Every table usable on this machine, scalar first.
std::vector<const KernelTable*> available_kernels();

// Table used by the library. Resolved on first call.
const KernelTable& active();

// Pin the active table (tests, benchmarks). Pass nullptr to return to
// automatic selection.
void set_active(const KernelTable* table);

}  // namespace ecam::simd
