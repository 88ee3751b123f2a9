#include "ecam/simd/kernels.hpp"

namespace ecam::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum_scalar(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

double max_scalar(const double* x, std::size_t n) {
  double m = x[0];
  for (std::size_t i = 1; i < n; ++i) m = x[i] > m ? x[i] : m;
  return m;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void relu_scalar(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void divide_scalar(const double* x, double divisor, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] / divisor;
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{
      "scalar",    dot_scalar,  sum_scalar,   max_scalar,
      axpy_scalar, relu_scalar, divide_scalar,
  };
  return table;
}

}  // namespace ecam::simd
