#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace fedsim {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> entries);

  static DenseMatrix identity(std::size_t n);
  /// (1/n) 11^T
  static DenseMatrix averaging(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  Vector column(std::size_t c) const;
  void set_column(std::size_t c, std::span<const double> values);

  std::span<const double> entries() const noexcept { return data_; }
  std::span<double> entries() noexcept { return data_; }

  DenseMatrix transpose() const;
  double frobenius_norm_squared() const;
  bool all_finite() const;

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix operator+(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix operator*(double s, const DenseMatrix& a);
double max_abs_difference(const DenseMatrix& a, const DenseMatrix& b);
bool is_symmetric(const DenseMatrix& m, double tol);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double squared_distance(std::span<const double> a, std::span<const double> b);
/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

/// Mean of the columns of m as a shifted sum: c0 + (1/n) sum (c_i - c0).
/// Returns c0 bit-exactly when all columns agree.
Vector column_mean(const DenseMatrix& m);
/// Shifted column mean over a subset of columns (ids must be non-empty).
Vector column_mean(const DenseMatrix& m, std::span<const std::size_t> ids);

/// Largest eigenvalue of M - (1/m)11^T for symmetric doubly stochastic M,
/// i.e. the second eigenvalue of M when lambda_1 = 1 belongs to the all-ones
/// vector. Deflated power iteration with repeated-squaring acceleration.
double second_eigenvalue_sym(const DenseMatrix& m);

struct EigenSolverOptions {
  double tolerance = 1e-12;
  std::size_t max_iterations = 100000;
};
double second_eigenvalue_sym(const DenseMatrix& m, const EigenSolverOptions& options);

/// A linear factor a + b*s.
struct LinearFactor {
  double a;
  double b;
};

/// Coefficients (ascending powers of s) of prod_k (a_k + b_k s).
std::vector<double> expand_linear_product(std::span<const LinearFactor> factors);

/// Quotient of an exact multiple of (a + b s) by that factor. The recurrence
/// runs from whichever end keeps its multiplier at most 1 in magnitude.
std::vector<double> deflate_linear_factor(std::span<const double> poly, LinearFactor factor);

/// Exact value of int_0^1 s^w prod_k (a_k + b_k s) ds.
double integrate_weighted_product(std::span<const LinearFactor> factors, unsigned weight_power = 0);

/// Sum of values in fixed pairwise order; result independent of thread count.
double pairwise_sum(std::span<const double> values);

}  // namespace fedsim

namespace fedsim {

/// Shortest-safe text form of a real: printf "%.17g" (exact round-trip).
std::string format_real(double value);

}  // namespace fedsim
