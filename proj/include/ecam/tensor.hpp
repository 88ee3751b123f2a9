#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace ecam {

using Shape = std::vector<std::size_t>;

std::size_t shape_product(const Shape& shape);
std::string shape_to_string(const Shape& shape);

// Dense row-major array of doubles. Immutable once constructed; every
// constructor validates that dimensions are positive, that the buffer length
// matches the shape and that all values are finite.
class Tensor {
 public:
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(Shape shape);
  static Tensor filled(Shape shape, double value);
  static Tensor vector(std::vector<double> values);
  static Tensor vector(std::initializer_list<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return values_.size(); }

  std::span<const double> values() const { return values_; }
  const double* data() const { return values_.data(); }

  double operator[](std::size_t flat) const { return values_[flat]; }
  double at(std::size_t i) const;
  double at(std::size_t i, std::size_t j) const;
  double at(std::size_t i, std::size_t j, std::size_t k) const;

  // Same buffer, new shape with the same element count.
  Tensor reshaped(Shape shape) const;

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<double> values_;
};

enum class Transpose { no, yes };

// sum_i a_i b_i over two rank-1 tensors of equal length.
double dot(const Tensor& a, const Tensor& b);

double l2_norm(const Tensor& v);

// v / ||v||. Throws DegenerateInputError for a zero vector.
Tensor l2_normalize(const Tensor& v);

// Per-channel mean over the H x W plane of a K x H x W tensor.
Tensor spatial_mean(const Tensor& t);

// w is rows x cols. Transpose::no computes w v (v has length cols);
// Transpose::yes computes w^T v (v has length rows).
Tensor matvec(const Tensor& w, const Tensor& v, Transpose transpose);

Tensor relu(const Tensor& t);

// Corner-aligned bilinear resampling of an H x W grid onto a larger grid:
// output pixel (r, c) samples source coordinate (r (H-1)/(th-1), c (W-1)/(tw-1)),
// or 0 along an axis whose target length is 1. Interpolation uses std::lerp,
// so constant inputs stay exactly constant.
Tensor bilinear_upsample(const Tensor& h, std::size_t target_h, std::size_t target_w);

}  // namespace ecam
