// NEON (AArch64, float64x2_t) variants.

#include "ecam/simd/kernels.hpp"

#if defined(__aarch64__)
#include <arm_neon.h>

namespace ecam::simd {
namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double acc = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum_neon(const double* x, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vaddq_f64(acc0, vld1q_f64(x + i));
    acc1 = vaddq_f64(acc1, vld1q_f64(x + i + 2));
  }
  double acc = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) acc += x[i];
  return acc;
}

double max_neon(const double* x, std::size_t n) {
  if (n < 2) return x[0];
  float64x2_t m2 = vld1q_f64(x);
  std::size_t i = 2;
  for (; i + 2 <= n; i += 2) m2 = vmaxq_f64(m2, vld1q_f64(x + i));
  double m = vmaxvq_f64(m2);
  for (; i < n; ++i) m = x[i] > m ? x[i] : m;
  return m;
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t a = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), a, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void relu_neon(const double* x, double* out, std::size_t n) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  std::size_t i = 0;
  // Select instead of vmaxq so that -0.0 maps to +0.0 like the scalar path.
  for (; i + 2 <= n; i += 2) {
    float64x2_t v = vld1q_f64(x + i);
    uint64x2_t positive = vcgtq_f64(v, zero);
    vst1q_f64(out + i, vbslq_f64(positive, v, zero));
  }
  for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void divide_neon(const double* x, double divisor, double* out, std::size_t n) {
  const float64x2_t d = vdupq_n_f64(divisor);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vdivq_f64(vld1q_f64(x + i), d));
  for (; i < n; ++i) out[i] = x[i] / divisor;
}

}  // namespace

const KernelTable& neon_kernel_table() {
  static const KernelTable table{
      "neon",    dot_neon,  sum_neon,   max_neon,
      axpy_neon, relu_neon, divide_neon,
  };
  return table;
}

}  // namespace ecam::simd
#endif
