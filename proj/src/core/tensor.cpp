#include "ecam/tensor.hpp"

#include <cmath>
#include <numeric>
#include <utility>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "ecam/error.hpp"
#include "ecam/simd/kernels.hpp"

namespace ecam {

std::size_t shape_product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) { return fmt::format("{}", fmt::join(shape, "x")); }

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(std::move(values)) {
  if (shape_.empty()) throw DimensionError("tensor shape must have at least one dimension");
  for (std::size_t d : shape_) {
    if (d == 0) throw DimensionError(fmt::format("tensor shape {} has a zero dimension", shape_to_string(shape_)));
  }
  if (shape_product(shape_) != values_.size()) {
    throw DimensionError(fmt::format("shape {} needs {} elements, got {}", shape_to_string(shape_),
                                     shape_product(shape_), values_.size()));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) throw NonFiniteError(fmt::format("non-finite element at flat index {}", i));
  }
}

Tensor Tensor::zeros(Shape shape) { return filled(std::move(shape), 0.0); }

Tensor Tensor::filled(Shape shape, double value) {
  const std::size_t n = shape_product(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::vector(std::vector<double> values) {
  Shape s{values.size()};
  return Tensor(std::move(s), std::move(values));
}

Tensor Tensor::vector(std::initializer_list<double> values) { return vector(std::vector<double>(values)); }

double Tensor::at(std::size_t i) const {
  if (rank() != 1 || i >= shape_[0]) throw DimensionError("rank-1 index out of range");
  return values_[i];
}

double Tensor::at(std::size_t i, std::size_t j) const {
  if (rank() != 2 || i >= shape_[0] || j >= shape_[1]) throw DimensionError("rank-2 index out of range");
  return values_[i * shape_[1] + j];
}

double Tensor::at(std::size_t i, std::size_t j, std::size_t k) const {
  if (rank() != 3 || i >= shape_[0] || j >= shape_[1] || k >= shape_[2]) {
    throw DimensionError("rank-3 index out of range");
  }
  return values_[(i * shape_[1] + j) * shape_[2] + k];
}

Tensor Tensor::reshaped(Shape shape) const { return Tensor(std::move(shape), values_); }

namespace {

void require_vector(const Tensor& t, const char* what) {
  if (t.rank() != 1) throw DimensionError(fmt::format("{} expects a rank-1 tensor, got {}", what, shape_to_string(t.shape())));
}

}  // namespace

double dot(const Tensor& a, const Tensor& b) {
  require_vector(a, "dot");
  require_vector(b, "dot");
  if (a.size() != b.size()) throw DimensionError(fmt::format("dot: lengths {} and {} differ", a.size(), b.size()));
  return simd::active().dot(a.data(), b.data(), a.size());
}

double l2_norm(const Tensor& v) {
  require_vector(v, "l2_norm");
  return std::sqrt(simd::active().dot(v.data(), v.data(), v.size()));
}

Tensor l2_normalize(const Tensor& v) {
  const double norm = l2_norm(v);
  if (!(norm > 0.0)) throw DegenerateInputError("l2_normalize: zero vector");
  std::vector<double> out(v.size());
  simd::active().divide(v.data(), norm, out.data(), v.size());
  return Tensor::vector(std::move(out));
}

Tensor spatial_mean(const Tensor& t) {
  if (t.rank() != 3) throw DimensionError(fmt::format("spatial_mean expects K x H x W, got {}", shape_to_string(t.shape())));
  const std::size_t channels = t.dim(0);
  const std::size_t z = t.dim(1) * t.dim(2);
  const auto& k = simd::active();
  std::vector<double> out(channels);
  for (std::size_t c = 0; c < channels; ++c) out[c] = k.sum(t.data() + c * z, z) / static_cast<double>(z);
  return Tensor::vector(std::move(out));
}

Tensor matvec(const Tensor& w, const Tensor& v, Transpose transpose) {
  if (w.rank() != 2) throw DimensionError(fmt::format("matvec expects a matrix, got {}", shape_to_string(w.shape())));
  require_vector(v, "matvec");
  const std::size_t rows = w.dim(0);
  const std::size_t cols = w.dim(1);
  const auto& k = simd::active();
  if (transpose == Transpose::no) {
    if (v.size() != cols) throw DimensionError(fmt::format("matvec: {} matrix times length-{} vector", shape_to_string(w.shape()), v.size()));
    std::vector<double> out(rows);
    for (std::size_t r = 0; r < rows; ++r) out[r] = k.dot(w.data() + r * cols, v.data(), cols);
    return Tensor::vector(std::move(out));
  }
  if (v.size() != rows) throw DimensionError(fmt::format("matvec: transposed {} matrix times length-{} vector", shape_to_string(w.shape()), v.size()));
  std::vector<double> out(cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) k.axpy(v[r], w.data() + r * cols, out.data(), cols);
  return Tensor::vector(std::move(out));
}

Tensor relu(const Tensor& t) {
  std::vector<double> out(t.size());
  simd::active().relu(t.data(), out.data(), t.size());
  return Tensor(t.shape(), std::move(out));
}

Tensor bilinear_upsample(const Tensor& h, std::size_t target_h, std::size_t target_w) {
  if (h.rank() != 2) throw DimensionError(fmt::format("bilinear_upsample expects H x W, got {}", shape_to_string(h.shape())));
  const std::size_t src_h = h.dim(0);
  const std::size_t src_w = h.dim(1);
  if (target_h < src_h || target_w < src_w) {
    throw InvalidArgumentError(fmt::format("bilinear_upsample: target {}x{} smaller than source {}x{}", target_h,
                                           target_w, src_h, src_w));
  }

  struct Sample {
    std::size_t lo, hi;
    double frac;
  };
  auto axis = [](std::size_t src, std::size_t dst) {
    std::vector<Sample> samples(dst);
    for (std::size_t i = 0; i < dst; ++i) {
      if (dst == 1 || src == 1) {
        samples[i] = {0, 0, 0.0};
        continue;
      }
      // Exact rational position i (src-1) / (dst-1), split into integer and
      // fractional parts without accumulating rounding.
      const std::size_t num = i * (src - 1);
      const std::size_t den = dst - 1;
      const std::size_t lo = num / den;
      const std::size_t rem = num % den;
      const std::size_t hi = rem == 0 ? lo : lo + 1;
      samples[i] = {lo, hi, static_cast<double>(rem) / static_cast<double>(den)};
    }
    return samples;
  };
  const auto rows = axis(src_h, target_h);
  const auto cols = axis(src_w, target_w);

  std::vector<double> out(target_h * target_w);
  for (std::size_t r = 0; r < target_h; ++r) {
    const Sample& sr = rows[r];
    for (std::size_t c = 0; c < target_w; ++c) {
      const Sample& sc = cols[c];
      const double top = std::lerp(h[sr.lo * src_w + sc.lo], h[sr.lo * src_w + sc.hi], sc.frac);
      const double bottom = std::lerp(h[sr.hi * src_w + sc.lo], h[sr.hi * src_w + sc.hi], sc.frac);
      out[r * target_w + c] = std::lerp(top, bottom, sr.frac);
    }
  }
  return Tensor({target_h, target_w}, std::move(out));
}

}  // namespace ecam
