#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace ibkd {

/// Dense row-major matrix of doubles. Rows are samples, columns dimensions.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix zeros(std::size_t rows, std::size_t cols) { return Matrix(rows, cols); }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  std::string shape_str() const;

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

namespace linalg {

/// a·b. Parallel over output rows; each entry accumulates in a fixed order,
/// so the result is bit-identical for any thread count.
Matrix matmul(const Matrix& a, const Matrix& b);
/// a·bᵀ without materializing the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);
/// aᵀ·b without materializing the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);
/// a += s·b in place.
void axpy(Matrix& a, double s, const Matrix& b);

double dot(std::span<const double> a, std::span<const double> b);
double squared_distance(std::span<const double> a, std::span<const double> b);
double frobenius_sq(const Matrix& a);
double sum(const Matrix& a);
double trace(const Matrix& a);

bool all_finite(const Matrix& a);
void require_finite(const Matrix& a, const char* what);
void require_same_shape(const Matrix& a, const Matrix& b, const char* what);

/// Rows of `a` selected by `index`, in order.
Matrix gather_rows(const Matrix& a, std::span<const std::size_t> index);
/// Vertical concatenation; all blocks must share a column count.
Matrix vstack(std::span<const Matrix> blocks);

/// Symmetric eigenvalues in ascending order (cyclic Jacobi). Test and
/// diagnostic use only; O(n³) per sweep.
std::vector<double> symmetric_eigenvalues(const Matrix& a);

/// Central-difference gradient of a scalar function:
/// entry (i,j) = (f(x + h·e_ij) − f(x − h·e_ij)) / 2h.
Matrix finite_diff_grad(const std::function<double(const Matrix&)>& f, const Matrix& x, double h = 1e-5);

/// max|a−b| / max(max|a|, max|b|); 0 when both are zero.
double max_rel_error(const Matrix& a, const Matrix& b);

}  // namespace linalg
}  // namespace ibkd
