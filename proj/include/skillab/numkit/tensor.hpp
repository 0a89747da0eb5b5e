#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace skillab::numkit {

/// Raised when operand shapes are incompatible; thrown before any numeric work.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an operation is used outside its contract (e.g. backward on a non-scalar).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);

/**
 * Dense row-major tensor of 64-bit reals.
 *
 * Any rank is representable, but the arithmetic in this library works on
 * rank-2 tensors (rows x cols); vectors are carried as 1 x n or n x 1.
 */
class Tensor {
 public:
  Tensor() : shape_{0, 0} {}
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(std::size_t rows, std::size_t cols) { return Tensor({rows, cols}); }
  static Tensor filled(std::size_t rows, std::size_t cols, double v) { return Tensor({rows, cols}, v); }
  static Tensor scalar(double v) { return Tensor({1, 1}, v); }
  static Tensor row(std::span<const double> values);
  static Tensor column(std::span<const double> values);
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor identity(std::size_t n);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t rows() const;
  std::size_t cols() const;
  bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double item() const;

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<const double> row_span(std::size_t r) const { return {data_.data() + r * cols(), cols()}; }
  std::span<double> row_span(std::size_t r) { return {data_.data() + r * cols(), cols()}; }

  void fill(double v);
  bool all_finite() const noexcept;
  Tensor transpose() const;
  Tensor reshaped(Shape shape) const;

  Tensor& operator+=(const Tensor& other);
  Tensor& operator-=(const Tensor& other);
  Tensor& operator*=(double s);

 private:
  Shape shape_;
  std::vector<double> data_;
};

Tensor operator+(Tensor a, const Tensor& b);
Tensor operator-(Tensor a, const Tensor& b);
Tensor operator*(Tensor a, double s);
Tensor operator*(double s, Tensor a);

/// Plain matrix product, no tape.
Tensor matmul(const Tensor& a, const Tensor& b);
/// Horizontal concatenation of rank-2 tensors with equal row counts.
Tensor hcat(const Tensor& a, const Tensor& b);
/// Columns [start, start + count).
Tensor cols_slice(const Tensor& a, std::size_t start, std::size_t count);
/// Rows selected by index, in order.
Tensor gather_rows(const Tensor& a, std::span<const std::size_t> rows);

double max_abs_diff(const Tensor& a, const Tensor& b);
double frobenius_norm(const Tensor& a);

}  // namespace skillab::numkit
