#pragma once

// Reference computations used only by tests. Each one is deliberately naive
// (dense, exhaustive or purely numerical) and shares no code path with the
// library routine it checks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "fedsim/numerics.hpp"

namespace oracle {

using fedsim::DenseMatrix;
using fedsim::Vector;

/// All eigenvalues of a symmetric matrix, descending, by cyclic Jacobi sweeps.
inline std::vector<double> jacobi_eigenvalues(const DenseMatrix& input) {
  const std::size_t n = input.rows();
  std::vector<std::vector<double>> a(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a[i][j] = input(i, j);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += a[i][j] * a[i][j];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a[i][i];
  std::sort(ev.begin(), ev.end(), std::greater<>());
  return ev;
}

/// Probability of one activation pattern (bit i of `mask` = client i active).
inline double pattern_probability(const Vector& p, unsigned long mask) {
  double pr = 1.0;
  for (std::size_t i = 0; i < p.size(); ++i) pr *= (mask >> i & 1UL) ? p[i] : 1.0 - p[i];
  return pr;
}

/// Mixing matrix straight from the definition.
inline DenseMatrix mixing_from_mask(std::size_t m, unsigned long mask) {
  DenseMatrix w(m, m);
  std::size_t k = 0;
  for (std::size_t i = 0; i < m; ++i) k += mask >> i & 1UL;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const bool ai = mask >> i & 1UL, aj = mask >> j & 1UL;
      if (k >= 2 && ai && aj) w(i, j) = 1.0 / static_cast<double>(k);
      else w(i, j) = (i == j) ? 1.0 : 0.0;
    }
  }
  return w;
}

/// E[W^2] by summing W*W over all 2^m patterns.
inline DenseMatrix enumerate_expected_square(const Vector& p) {
  const std::size_t m = p.size();
  DenseMatrix acc(m, m);
  for (unsigned long mask = 0; mask < (1UL << m); ++mask) {
    const double pr = pattern_probability(p, mask);
    const DenseMatrix w = mixing_from_mask(m, mask);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < m; ++k) s += w(i, k) * w(k, j);
        acc(i, j) += pr * s;
      }
  }
  return acc;
}

/// FedAvg limit weights E[1{i in A}/|A| | A nonempty] by enumeration.
inline Vector enumerate_limit_weights(const Vector& p) {
  const std::size_t m = p.size();
  Vector w(m, 0.0);
  double nonempty = 0.0;
  for (unsigned long mask = 1; mask < (1UL << m); ++mask) {
    const double pr = pattern_probability(p, mask);
    nonempty += pr;
    double k = 0;
    for (std::size_t i = 0; i < m; ++i) k += mask >> i & 1UL;
    for (std::size_t i = 0; i < m; ++i)
      if (mask >> i & 1UL) w[i] += pr / k;
  }
  for (double& v : w) v /= nonempty;
  return w;
}

/// Adaptive Simpson quadrature on [a, b].
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double tol) {
  std::function<double(double, double, double, double, double, double, double, int)> rec =
      [&](double lo, double hi, double flo, double fmid, double fhi, double whole, double eps,
          int depth) {
        const double mid = 0.5 * (lo + hi);
        const double lm = 0.5 * (lo + mid), rm = 0.5 * (mid + hi);
        const double flm = f(lm), frm = f(rm);
        const double left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid);
        const double right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi);
        const double diff = left + right - whole;
        if (depth <= 0 || std::abs(diff) <= 15.0 * eps) return left + right + diff / 15.0;
        return rec(lo, mid, flo, flm, fmid, left, eps / 2.0, depth - 1) +
               rec(mid, hi, fmid, frm, fhi, right, eps / 2.0, depth - 1);
      };
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return rec(a, b, fa, fm, fb, whole, tol, 40);
}

/// Central finite-difference gradient.
inline Vector central_difference(const std::function<double(const Vector&)>& f, Vector x,
                                 double h) {
  Vector g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// k plain gradient steps on 0.5||x - u||^2: u + (1 - eta)^k (x - u).
inline Vector quadratic_steps(const Vector& x, const Vector& u, double eta, std::size_t k) {
  const double f = std::pow(1.0 - eta, static_cast<double>(k));
  Vector out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = u[j] + f * (x[j] - u[j]);
  return out;
}

/// Random symmetric doubly stochastic matrix: a convex mix of symmetrized
/// permutation matrices.
template <class Rng>
DenseMatrix random_doubly_stochastic(std::size_t m, std::size_t terms, Rng& draw_uniform,
                                     std::function<std::size_t(std::size_t)> draw_index) {
  DenseMatrix acc(m, m);
  double total = 0.0;
  std::vector<double> weights(terms);
  for (double& w : weights) {
    w = draw_uniform() + 0.05;
    total += w;
  }
  for (std::size_t t = 0; t < terms; ++t) {
    std::vector<std::size_t> perm(m);
    for (std::size_t i = 0; i < m; ++i) perm[i] = i;
    for (std::size_t i = m; i > 1; --i) std::swap(perm[i - 1], perm[draw_index(i)]);
    const double w = weights[t] / total;
    for (std::size_t i = 0; i < m; ++i) {
      acc(i, perm[i]) += 0.5 * w;
      acc(perm[i], i) += 0.5 * w;
    }
  }
  return acc;
}

}  // namespace oracle
