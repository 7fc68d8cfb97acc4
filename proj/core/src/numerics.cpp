#include "fedsim/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "fedsim/errors.hpp"
#include "fedsim/random.hpp"

namespace fedsim {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
    : rows_(rows), cols_(cols), data_(std::move(entries)) {
  if (data_.size() != rows * cols) {
    throw ContractViolation("DenseMatrix: entry count " + std::to_string(data_.size()) +
                            " does not match " + std::to_string(rows) + "x" +
                            std::to_string(cols));
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::averaging(std::size_t n) {
  return DenseMatrix(n, n, n == 0 ? 0.0 : 1.0 / static_cast<double>(n));
}

Vector DenseMatrix::column(std::size_t c) const {
  Vector out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

void DenseMatrix::set_column(std::size_t c, std::span<const double> values) {
  if (values.size() != rows_) throw ContractViolation("DenseMatrix::set_column: length mismatch");
  for (std::size_t r = 0; r < rows_; ++r) (*this)(r, c) = values[r];
}

DenseMatrix DenseMatrix::transpose() const {
  DenseMatrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

double DenseMatrix::frobenius_norm_squared() const {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return s;
}

bool DenseMatrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw ContractViolation("multiply: inner dimensions differ");
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      axpy(aik, b.row(k), dst);
    }
  }
  return out;
}

namespace {
void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ContractViolation(std::string(op) + ": shape mismatch");
}
}  // namespace

DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "operator-");
  DenseMatrix out = a;
  auto o = out.entries();
  auto bv = b.entries();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
  return out;
}

DenseMatrix operator+(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "operator+");
  DenseMatrix out = a;
  auto o = out.entries();
  auto bv = b.entries();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
  return out;
}

DenseMatrix operator*(double s, const DenseMatrix& a) {
  DenseMatrix out = a;
  for (double& v : out.entries()) v *= s;
  return out;
}

double max_abs_difference(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "max_abs_difference");
  double worst = 0.0;
  auto av = a.entries();
  auto bv = b.entries();
  for (std::size_t i = 0; i < av.size(); ++i) worst = std::max(worst, std::abs(av[i] - bv[i]));
  return worst;
}

bool is_symmetric(const DenseMatrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.cols(); ++j)
      if (std::abs(m(i, j) - m(j, i)) > tol) return false;
  return true;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ContractViolation("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ContractViolation("squared_distance: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw ContractViolation("axpy: length mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

Vector column_mean(const DenseMatrix& m, std::span<const std::size_t> ids) {
  if (ids.empty()) throw ContractViolation("column_mean: empty column set");
  const std::size_t d = m.rows();
  Vector mean(d);
  const std::size_t c0 = ids.front();
  const double inv = 1.0 / static_cast<double>(ids.size());
  for (std::size_t r = 0; r < d; ++r) {
    const auto row = m.row(r);
    const double base = row[c0];
    double shift = 0.0;
    for (std::size_t id : ids) shift += row[id] - base;
    mean[r] = base + shift * inv;
  }
  return mean;
}

Vector column_mean(const DenseMatrix& m) {
  std::vector<std::size_t> ids(m.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  return column_mean(m, ids);
}

namespace {

void remove_mean(std::span<double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  const double mean = s / static_cast<double>(v.size());
  for (double& x : v) x -= mean;
}

double normalize(std::span<double> v) {
  const double n = norm2(v);
  if (n > 0.0)
    for (double& x : v) x /= n;
  return n;
}

Vector mat_vec(const DenseMatrix& a, std::span<const double> v) {
  Vector out(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) out[i] = dot(a.row(i), v);
  return out;
}

void validate_doubly_stochastic(const DenseMatrix& m) {
  if (m.rows() == 0 || m.rows() != m.cols())
    throw ContractViolation("second_eigenvalue_sym: expected a non-empty square matrix");
  if (!m.all_finite()) throw ContractViolation("second_eigenvalue_sym: non-finite entry");
  if (!is_symmetric(m, 1e-12)) throw ContractViolation("second_eigenvalue_sym: matrix is not symmetric");
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    for (double v : m.row(i)) s += v;
    if (std::abs(s - 1.0) > 1e-12)
      throw ContractViolation("second_eigenvalue_sym: row " + std::to_string(i) +
                              " sums to " + std::to_string(s));
  }
}

}  // namespace

double second_eigenvalue_sym(const DenseMatrix& m) { return second_eigenvalue_sym(m, {}); }

double second_eigenvalue_sym(const DenseMatrix& m, const EigenSolverOptions& options) {
  validate_doubly_stochastic(m);
  const std::size_t n = m.rows();
  if (n == 1) return 0.0;

  // Shifted, deflated operator A = (M - J) + (I - J). Since M1 = 1 exactly,
  // A kills the all-ones direction and maps each other eigenvalue l to 1 + l,
  // which is non-negative for stochastic M, so the dominant eigenpair of A is
  // (1 + lambda_2, v_2).
  DenseMatrix power(n, n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      power(i, j) = m(i, j) + (i == j ? 1.0 : 0.0) - 2.0 * inv_n;

  Vector v(n);
  for (std::size_t i = 0; i < n; ++i)
    v[i] = static_cast<double>(mix64(i + 0x243f6a8885a308d3ULL) >> 11) * 0x1.0p-53 - 0.5;
  remove_mean(v);
  normalize(v);

  // Plain power steps first; if they stall, square the operator so that each
  // further step doubles the effective power.
  constexpr std::size_t kPlainSteps = 64;
  constexpr std::size_t kMaxSquarings = 60;
  std::size_t squarings = 0;
  double residual = 0.0;
  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    Vector w = mat_vec(power, v);
    remove_mean(w);
    if (normalize(w) == 0.0) {
      // Start vector annihilated: every non-trivial eigenvalue of M is -1.
      return -1.0;
    }
    v = std::move(w);

    const Vector mv = mat_vec(m, v);
    const double mu = dot(v, mv);
    double r2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = mv[i] - mu * v[i];
      r2 += e * e;
    }
    residual = std::sqrt(r2);
    if (residual <= options.tolerance) return std::clamp(mu, -1.0, 1.0);

    if (it >= kPlainSteps && squarings < kMaxSquarings) {
      DenseMatrix sq = multiply(power, power);
      double scale = 0.0;
      for (double x : sq.entries()) scale = std::max(scale, std::abs(x));
      if (scale > 0.0) power = (1.0 / scale) * sq;
      ++squarings;
    }
  }
  throw SolverError("second_eigenvalue_sym: no convergence after " +
                        std::to_string(options.max_iterations) +
                        " iterations (residual " + std::to_string(residual) + ")",
                    residual);
}

std::vector<double> expand_linear_product(std::span<const LinearFactor> factors) {
  std::vector<double> coeffs(factors.size() + 1, 0.0);
  coeffs[0] = 1.0;
  std::size_t degree = 0;
  for (const auto& f : factors) {
    // Multiply in place from the top degree down.
    coeffs[degree + 1] = f.b * coeffs[degree];
    for (std::size_t k = degree; k > 0; --k) coeffs[k] = f.a * coeffs[k] + f.b * coeffs[k - 1];
    coeffs[0] *= f.a;
    ++degree;
  }
  return coeffs;
}

std::vector<double> deflate_linear_factor(std::span<const double> poly, LinearFactor factor) {
  if (poly.empty()) throw ContractViolation("deflate_linear_factor: empty polynomial");
  const std::size_t n = poly.size() - 1;
  std::vector<double> q(n, 0.0);
  if (n == 0) return q;
  const double a = factor.a;
  const double b = factor.b;
  if (a == 0.0 && b == 0.0) throw ContractViolation("deflate_linear_factor: zero factor");
  // Run the recurrence in the direction that divides by the larger coefficient.
  if (std::abs(b) >= std::abs(a)) {
    const double inv = 1.0 / b;
    q[n - 1] = poly[n] * inv;
    for (std::size_t k = n - 1; k >= 1; --k) q[k - 1] = (poly[k] - a * q[k]) * inv;
  } else {
    const double inv = 1.0 / a;
    q[0] = poly[0] * inv;
    for (std::size_t k = 1; k < n; ++k) q[k] = (poly[k] - b * q[k - 1]) * inv;
  }
  return q;
}

double integrate_weighted_product(std::span<const LinearFactor> factors, unsigned weight_power) {
  for (const auto& f : factors) {
    if (!std::isfinite(f.a) || !std::isfinite(f.b))
      throw ContractViolation("integrate_weighted_product: non-finite factor");
    if (f.a < 0.0 || f.a + f.b < 0.0)
      throw ContractViolation("integrate_weighted_product: factor negative on [0,1]");
  }
  const auto coeffs = expand_linear_product(factors);
  double total = 0.0;
  for (std::size_t k = 0; k < coeffs.size(); ++k)
    total += coeffs[k] / static_cast<double>(k + weight_power + 1);
  if (!std::isfinite(total)) throw Error("integrate_weighted_product: overflow");
  return total;
}

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

}  // namespace fedsim

namespace fedsim {

std::string format_real(double value) {
  char buf[40];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", value);
  return std::string(buf, static_cast<std::size_t>(n));
}

}  // namespace fedsim
