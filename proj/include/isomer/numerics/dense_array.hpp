#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace isomer {

using Shape = std::vector<std::size_t>;

inline constexpr std::size_t kMaxRank = 4;

/// Thrown when operand shapes do not satisfy an operation's contract.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a computation produces NaN or Inf.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::size_t shape_product(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Rank <= 4 row-major array of doubles. The last axis is contiguous.
class DenseArray {
 public:
  DenseArray() : shape_{0} {}
  explicit DenseArray(Shape shape);
  DenseArray(Shape shape, std::vector<double> data);

  static DenseArray zeros(Shape shape) { return DenseArray(std::move(shape)); }
  static DenseArray full(Shape shape, double value);
  static DenseArray identity(std::size_t n);
  /// Builds a 2-D array from nested rows; every row must have the same length.
  static DenseArray from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static DenseArray vector(std::initializer_list<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // 2-D conveniences; only valid on rank-2 arrays.
  std::size_t rows() const { return dim(0); }
  std::size_t cols() const { return dim(1); }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }

  std::span<const double> row(std::size_t i) const;
  std::span<double> row(std::size_t i);

  /// Same values under a new shape with equal element count.
  DenseArray reshaped(Shape shape) const;

  bool all_finite() const;

  /// Bitwise-meaningful equality: identical shape and identical values.
  friend bool operator==(const DenseArray& a, const DenseArray& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Throws NumericError naming `where` if any entry is NaN or Inf.
void require_finite(const DenseArray& a, const char* where);

double max_abs_diff(const DenseArray& a, const DenseArray& b);

}  // namespace isomer
