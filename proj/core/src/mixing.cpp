#include "fedsim/mixing.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fedsim/errors.hpp"

namespace fedsim {

namespace {

void check_members(const ActiveSet& active, std::size_t clients) {
  for (std::size_t id : active.members)
    if (id >= clients)
      throw ContractViolation("mixing: active client " + std::to_string(id) +
                              " out of range for m = " + std::to_string(clients));
}

void check_probabilities(std::span<const double> p) {
  if (p.empty()) throw ConfigError("mixing: empty probability vector");
  for (double v : p)
    if (!(v > 0.0 && v <= 1.0))
      throw ConfigError("mixing: activation probabilities must lie in (0, 1], got " +
                        format_real(v));
}

std::vector<double> poly_multiply(std::span<const double> x, std::span<const double> y) {
  std::vector<double> out(x.size() + y.size() - 1, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j) out[i + j] += x[i] * y[j];
  return out;
}

double integrate_coefficients(std::span<const double> c, unsigned weight_power) {
  double total = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k)
    total += c[k] / static_cast<double>(k + weight_power + 1);
  return total;
}

}  // namespace

MixingMatrix build_mixing(const ActiveSet& active, std::size_t clients) {
  check_members(active, clients);
  MixingMatrix w{DenseMatrix::identity(clients)};
  if (active.size() <= 1) return w;
  const double share = 1.0 / static_cast<double>(active.size());
  for (std::size_t i : active.members)
    for (std::size_t j : active.members) w.entries(i, j) = share;
  return w;
}

void apply_mixing(DenseMatrix& x, const ActiveSet& active) {
  check_members(active, x.cols());
  if (active.size() <= 1) return;
  const double inv = 1.0 / static_cast<double>(active.size());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto row = x.row(r);
    double s = 0.0;
    for (std::size_t id : active.members) s += row[id];
    const double mean = s * inv;
    for (std::size_t id : active.members) row[id] = mean;
  }
}

ExpectedSquareMixing expected_square_exact(std::span<const double> p) {
  check_probabilities(p);
  const std::size_t m = p.size();

  // prefix[j] = prod_{l<j} f_l, suffix[j] = prod_{l>=j} f_l, f_l = (1-p_l) + p_l s.
  std::vector<std::vector<double>> prefix(m + 1), suffix(m + 1);
  prefix[0] = {1.0};
  for (std::size_t j = 0; j < m; ++j) {
    const double f[2] = {1.0 - p[j], p[j]};
    prefix[j + 1] = poly_multiply(prefix[j], f);
  }
  suffix[m] = {1.0};
  for (std::size_t j = m; j-- > 0;) {
    const double f[2] = {1.0 - p[j], p[j]};
    suffix[j] = poly_multiply(suffix[j + 1], f);
  }

  ExpectedSquareMixing out;
  out.entries = DenseMatrix(m, m);
  out.provenance = Provenance::exact;
  for (std::size_t j = 0; j < m; ++j) {
    const auto without_j = poly_multiply(prefix[j], suffix[j + 1]);
    out.entries(j, j) = p[j] * integrate_coefficients(without_j, 0) + (1.0 - p[j]);
    for (std::size_t k = j + 1; k < m; ++k) {
      const auto without_jk = deflate_linear_factor(without_j, {1.0 - p[k], p[k]});
      const double v = p[j] * p[k] * integrate_coefficients(without_jk, 1);
      out.entries(j, k) = v;
      out.entries(k, j) = v;
    }
  }
  return out;
}

ExpectedSquareMixing expected_square_mc(std::span<const double> p, std::size_t trials,
                                        SeededStream& stream) {
  if (trials == 0) throw ContractViolation("expected_square_mc: trials must be >= 1");
  const std::size_t m = p.size();
  DenseMatrix sum(m, m), sum_sq(m, m);
  for (std::size_t trial = 0; trial < trials; ++trial) {
    const ActiveSet a = sample_active_set(p, trial, stream);
    const MixingMatrix w = build_mixing(a, m);
    const DenseMatrix w2 = multiply(w.entries, w.entries);
    auto s = sum.entries();
    auto s2 = sum_sq.entries();
    auto v = w2.entries();
    for (std::size_t k = 0; k < v.size(); ++k) {
      s[k] += v[k];
      s2[k] += v[k] * v[k];
    }
  }
  ExpectedSquareMixing out;
  out.provenance = Provenance::monte_carlo;
  out.trials = trials;
  out.entries = DenseMatrix(m, m);
  out.standard_error = DenseMatrix(m, m);
  const double n = static_cast<double>(trials);
  for (std::size_t k = 0; k < m * m; ++k) {
    const double mean = sum.entries()[k] / n;
    const double var = trials > 1 ? std::max(0.0, (sum_sq.entries()[k] - n * mean * mean) / (n - 1))
                                  : 0.0;
    out.entries.entries()[k] = mean;
    out.standard_error.entries()[k] = std::sqrt(var / n);
  }
  return out;
}

double rho(const ExpectedSquareMixing& m) {
  if (m.provenance == Provenance::exact) return second_eigenvalue_sym(m.entries);
  // Sample averages are symmetric and stochastic only up to rounding; clean
  // that up before handing them to the solver.
  DenseMatrix sym = m.entries;
  const std::size_t n = sym.rows();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = 0.5 * (sym(i, j) + sym(j, i));
      sym(i, j) = v;
      sym(j, i) = v;
    }
  for (std::size_t i = 0; i < n; ++i) {
    double off = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) off += sym(i, j);
    sym(i, i) = 1.0 - off;
  }
  return second_eigenvalue_sym(sym);
}

double ergodicity_bound(double floor, std::size_t clients) {
  if (!(floor > 0.0 && floor <= 1.0)) throw ConfigError("ergodicity_bound: c must lie in (0, 1]");
  if (clients == 0) throw ConfigError("ergodicity_bound: m must be >= 1");
  const double reach = 1.0 - std::pow(1.0 - floor, static_cast<double>(clients));
  const double c2 = floor * floor;
  return 1.0 - c2 * c2 * reach * reach / 8.0;
}

double entry_lower_bound(double floor, std::size_t clients) {
  const double reach = 1.0 - std::pow(1.0 - floor, static_cast<double>(clients));
  return floor * floor / static_cast<double>(clients) * reach;
}

std::vector<ContractionReport> contraction_profile(const DenseMatrix& b,
                                                   std::span<const double> p,
                                                   std::size_t max_horizon, std::size_t trials,
                                                   SeededStream& stream) {
  if (max_horizon == 0) throw ContractViolation("contraction_check: horizon must be >= 1");
  if (trials < 2) throw ContractViolation("contraction_check: need at least 2 trials");
  const std::size_t m = b.cols();
  if (p.size() != m) throw ContractViolation("contraction_check: p length must equal cols(B)");

  Vector row_mean(b.rows());
  for (std::size_t r = 0; r < b.rows(); ++r) {
    double s = 0.0;
    for (double v : b.row(r)) s += v;
    row_mean[r] = s / static_cast<double>(m);
  }

  std::vector<double> sum(max_horizon, 0.0), sum_sq(max_horizon, 0.0);
  DenseMatrix y;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    y = b;
    for (std::size_t t = 0; t < max_horizon; ++t) {
      apply_mixing(y, sample_active_set(p, t, stream));
      double dev = 0.0;
      for (std::size_t r = 0; r < y.rows(); ++r)
        for (double v : y.row(r)) {
          const double e = v - row_mean[r];
          dev += e * e;
        }
      sum[t] += dev;
      sum_sq[t] += dev * dev;
    }
  }

  const double rho_exact = rho(expected_square_exact(p));
  const double bnorm = b.frobenius_norm_squared();
  const double n = static_cast<double>(trials);
  std::vector<ContractionReport> out(max_horizon);
  for (std::size_t t = 0; t < max_horizon; ++t) {
    auto& rep = out[t];
    rep.horizon = t + 1;
    rep.lhs = sum[t] / n;
    const double var = std::max(0.0, (sum_sq[t] - n * rep.lhs * rep.lhs) / (n - 1));
    rep.standard_error = std::sqrt(var / n);
    rep.rhs = std::pow(rho_exact, static_cast<double>(t + 1)) * bnorm;
    rep.pass = rep.lhs <= rep.rhs + 3.0 * rep.standard_error;
  }
  return out;
}

ContractionReport contraction_check(const DenseMatrix& b, std::span<const double> p,
                                    std::size_t horizon, std::size_t trials,
                                    SeededStream& stream) {
  return contraction_profile(b, p, horizon, trials, stream).back();
}

RhoTracker::RhoTracker(double floor, std::size_t clients)
    : bound_(ergodicity_bound(floor, clients)) {}

void RhoTracker::observe(std::span<const double> p) {
  if (rounds_ == 0 || !std::equal(p.begin(), p.end(), cached_p_.begin(), cached_p_.end())) {
    last_ = rho(expected_square_exact(p));
    cached_p_.assign(p.begin(), p.end());
  }
  max_ = rounds_ == 0 ? last_ : std::max(max_, last_);
  product_ *= last_;
  ++rounds_;
}

}  // namespace fedsim
