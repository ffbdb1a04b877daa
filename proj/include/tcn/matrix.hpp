#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace tcn {

/// Dense row-major matrix of doubles. Batches are stored as rows.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix row_vector(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  bool same_shape(const Matrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  std::string shape_string() const;

  /// True if every entry is finite.
  bool all_finite() const noexcept;

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

enum class BinaryOp { Add, Sub, Mul };

/// Entrywise binary operation; shapes must match exactly.
Matrix elementwise(BinaryOp op, const Matrix& a, const Matrix& b);
Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double factor);
Matrix map(const Matrix& a, const std::function<double(double)>& fn);

/// Adds a 1×cols row to every row of `a`.
Matrix add_row_broadcast(const Matrix& a, const Matrix& row);
/// 1×cols matrix of per-column sums.
Matrix column_sums(const Matrix& a);

/// Copies the listed rows, in order, into a new matrix.
Matrix gather_rows(const Matrix& a, std::span<const std::size_t> indices);
/// Concatenates matrices with equal row counts side by side.
Matrix hconcat(const Matrix& left, const Matrix& right);

double max_abs_difference(const Matrix& a, const Matrix& b);

}  // namespace tcn
