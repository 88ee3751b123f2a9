#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace ecam {

struct ImageDims {
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t pixels() const { return height * width; }
  bool operator==(const ImageDims&) const = default;
};

// Half-open pixel box [x, x + width) x [y, y + height).
struct BoundingBox {
  long x = 0;
  long y = 0;
  long width = 0;
  long height = 0;

  long x_end() const { return x + width; }
  long y_end() const { return y + height; }
  long area() const { return width * height; }
  bool contains(long col, long row) const { return col >= x && col < x_end() && row >= y && row < y_end(); }

  bool operator==(const BoundingBox&) const = default;
};

// Row-major grid of 0/1 cells.
class BinaryGrid {
 public:
  BinaryGrid() = default;
  BinaryGrid(std::size_t rows, std::size_t cols, bool value = false)
      : rows_(rows), cols_(cols), cells_(rows * cols, value ? 1 : 0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return cells_.size(); }

  bool get(std::size_t r, std::size_t c) const { return cells_[r * cols_ + c] != 0; }
  void set(std::size_t r, std::size_t c, bool v) { cells_[r * cols_ + c] = v ? 1 : 0; }
  bool operator[](std::size_t flat) const { return cells_[flat] != 0; }

  std::size_t count() const;
  bool any() const { return count() > 0; }

  bool operator==(const BinaryGrid&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> cells_;
};

// Foreground mask at image resolution.
struct SegmentationMask {
  BinaryGrid grid;

  ImageDims dims() const { return {grid.rows(), grid.cols()}; }
};

}  // namespace ecam
