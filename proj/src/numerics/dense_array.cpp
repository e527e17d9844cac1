#include "isomer/numerics/dense_array.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace isomer {

std::size_t shape_product(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void check_rank(const Shape& shape) {
  if (shape.size() > kMaxRank) {
    throw DimensionError("DenseArray: rank " + std::to_string(shape.size()) + " exceeds " +
                         std::to_string(kMaxRank));
  }
}

}  // namespace

DenseArray::DenseArray(Shape shape) : shape_(std::move(shape)) {
  check_rank(shape_);
  data_.assign(shape_product(shape_), 0.0);
}

DenseArray::DenseArray(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_rank(shape_);
  if (shape_product(shape_) != data_.size()) {
    throw DimensionError("DenseArray: shape " + shape_to_string(shape_) + " needs " +
                         std::to_string(shape_product(shape_)) + " values, got " +
                         std::to_string(data_.size()));
  }
}

DenseArray DenseArray::full(Shape shape, double value) {
  DenseArray a(std::move(shape));
  std::fill(a.data_.begin(), a.data_.end(), value);
  return a;
}

DenseArray DenseArray::identity(std::size_t n) {
  DenseArray a({n, n});
  for (std::size_t i = 0; i < n; ++i) a(i, i) = 1.0;
  return a;
}

DenseArray DenseArray::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t m = rows.size();
  const std::size_t n = m ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(m * n);
  for (const auto& r : rows) {
    if (r.size() != n) throw DimensionError("from_rows: ragged rows");
    data.insert(data.end(), r.begin(), r.end());
  }
  return DenseArray({m, n}, std::move(data));
}

DenseArray DenseArray::vector(std::initializer_list<double> values) {
  return DenseArray({values.size()}, std::vector<double>(values));
}

std::size_t DenseArray::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw DimensionError("dim: axis " + std::to_string(axis) + " out of range for shape " +
                         shape_to_string(shape_));
  }
  return shape_[axis];
}

std::span<const double> DenseArray::row(std::size_t i) const {
  const std::size_t n = shape_.back();
  return std::span<const double>(data_).subspan(i * n, n);
}

std::span<double> DenseArray::row(std::size_t i) {
  const std::size_t n = shape_.back();
  return std::span<double>(data_).subspan(i * n, n);
}

DenseArray DenseArray::reshaped(Shape shape) const {
  if (shape_product(shape) != data_.size()) {
    throw DimensionError("reshape " + shape_to_string(shape_) + " -> " + shape_to_string(shape));
  }
  return DenseArray(std::move(shape), data_);
}

bool DenseArray::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void require_finite(const DenseArray& a, const char* where) {
  const auto values = a.data();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw NumericError(std::string(where) + ": non-finite value at flat index " +
                         std::to_string(i));
    }
  }
}

double max_abs_diff(const DenseArray& a, const DenseArray& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("max_abs_diff: " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace isomer
