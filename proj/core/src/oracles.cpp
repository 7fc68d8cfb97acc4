#include "fedsim/oracles.hpp"

#include <cmath>
#include <string>

#include "fedsim/errors.hpp"
#include "fedsim/link_model.hpp"

namespace fedsim {

std::string_view to_string(LimitMethod m) {
  switch (m) {
    case LimitMethod::subset: return "subset";
    case LimitMethod::integral: return "integral";
    case LimitMethod::monte_carlo: return "monte_carlo";
  }
  return "unknown";
}

namespace {

void check_probabilities(std::span<const double> p) {
  if (p.empty()) throw ConfigError("limit weights: empty probability vector");
  for (double v : p)
    if (!(v > 0.0 && v <= 1.0))
      throw ConfigError("limit weights: probabilities must lie in (0, 1], got " + format_real(v));
}

double nonempty_probability(std::span<const double> p) {
  double none = 1.0;
  for (double v : p) none *= 1.0 - v;
  return 1.0 - none;
}

// sum_{j=1}^{m} (-1)^{j+1} e_{j-1} / j, i.e. E[1 / (1 + S)] written as the
// alternating inclusion-exclusion series.
double alternating_series(std::span<const double> esp) {
  double total = 0.0;
  for (std::size_t j = 1; j <= esp.size(); ++j) {
    const double sign = (j % 2 == 1) ? 1.0 : -1.0;
    total += sign * esp[j - 1] / static_cast<double>(j);
  }
  return total;
}

}  // namespace

LimitWeights fedavg_limit_subset(std::span<const double> p) {
  check_probabilities(p);
  const std::size_t m = p.size();
  if (m > 20)
    throw CapacityError("fedavg_limit_subset: m = " + std::to_string(m) +
                        " exceeds 20; use fedavg_limit_integral");
  LimitWeights out;
  out.method = LimitMethod::subset;
  out.w.assign(m, 0.0);
  const double denom = nonempty_probability(p);

  for (std::size_t i = 0; i < m; ++i) {
    // esp[k] = sum over subsets S of [m] \ {i} with |S| = k of prod_{z in S} p_z.
    std::vector<double> esp(m, 0.0);
    if (m <= 12) {
      std::vector<std::size_t> others;
      for (std::size_t z = 0; z < m; ++z)
        if (z != i) others.push_back(z);
      const std::size_t n = others.size();
      for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
        double prod = 1.0;
        std::size_t size = 0;
        for (std::size_t b = 0; b < n; ++b)
          if (mask & (std::size_t{1} << b)) {
            prod *= p[others[b]];
            ++size;
          }
        esp[size] += prod;
      }
    } else {
      esp[0] = 1.0;
      std::size_t count = 0;
      for (std::size_t z = 0; z < m; ++z) {
        if (z == i) continue;
        ++count;
        for (std::size_t k = count; k >= 1; --k) esp[k] += p[z] * esp[k - 1];
      }
    }
    out.w[i] = p[i] * alternating_series(esp) / denom;
  }
  return out;
}

LimitWeights fedavg_limit_integral(std::span<const double> p) {
  check_probabilities(p);
  const std::size_t m = p.size();
  LimitWeights out;
  out.method = LimitMethod::integral;
  out.w.assign(m, 0.0);
  const double denom = nonempty_probability(p);

  std::vector<LinearFactor> factors(m);
  for (std::size_t k = 0; k < m; ++k) factors[k] = {1.0 - p[k], p[k]};

  if (m <= kDirectIntegralLimit) {
    std::vector<LinearFactor> rest;
    rest.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
      rest.clear();
      for (std::size_t k = 0; k < m; ++k)
        if (k != i) rest.push_back(factors[k]);
      out.w[i] = p[i] * integrate_weighted_product(rest, 0) / denom;
    }
    return out;
  }

  // Large m: expand the full product once and divide out each client's own
  // factor, O(m^2) overall.
  const std::vector<double> full = expand_linear_product(factors);
  std::vector<double> inv(m);
  for (std::size_t k = 0; k < m; ++k) inv[k] = 1.0 / static_cast<double>(k + 1);
  for (std::size_t i = 0; i < m; ++i) {
    const std::vector<double> rest = deflate_linear_factor(full, factors[i]);
    double integral = 0.0;
    for (std::size_t k = 0; k < rest.size(); ++k) integral += rest[k] * inv[k];
    out.w[i] = p[i] * integral / denom;
  }
  return out;
}

LimitWeights fedavg_limit_mc(std::span<const double> p, std::size_t trials, SeededStream& stream) {
  check_probabilities(p);
  if (trials < 10000) throw ContractViolation("fedavg_limit_mc: need at least 1e4 trials");
  const std::size_t m = p.size();
  Vector sum(m, 0.0), sum_sq(m, 0.0);
  std::size_t nonempty = 0;
  std::vector<char> active(m);
  for (std::size_t t = 0; t < trials; ++t) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < m; ++i) {
      active[i] = stream.uniform() < p[i];
      count += active[i] ? 1 : 0;
    }
    if (count == 0) continue;
    ++nonempty;
    const double share = 1.0 / static_cast<double>(count);
    for (std::size_t i = 0; i < m; ++i)
      if (active[i]) {
        sum[i] += share;
        sum_sq[i] += share * share;
      }
  }
  if (nonempty == 0) throw StatisticalError("fedavg_limit_mc: every sampled active set was empty");
  LimitWeights out;
  out.method = LimitMethod::monte_carlo;
  out.w.assign(m, 0.0);
  out.standard_error.assign(m, 0.0);
  // Unconditional ratio mean divided by the empirical P(A nonempty); this is
  // the same as averaging over the nonempty draws.
  const double n = static_cast<double>(nonempty);
  for (std::size_t i = 0; i < m; ++i) {
    const double mean = sum[i] / n;
    const double var = nonempty > 1 ? std::max(0.0, (sum_sq[i] - n * mean * mean) / (n - 1)) : 0.0;
    out.w[i] = mean;
    out.standard_error[i] = std::sqrt(var / n);
  }
  return out;
}

Vector predicted_limit(const LimitWeights& weights, const DenseMatrix& targets) {
  if (weights.w.size() != targets.cols())
    throw ContractViolation("predicted_limit: weight count does not match target columns");
  Vector out(targets.rows(), 0.0);
  for (std::size_t r = 0; r < targets.rows(); ++r) out[r] = dot(targets.row(r), weights.w);
  return out;
}

double kappa(double eta, double lipschitz, std::size_t steps) {
  if (!(eta > 0.0) || !(lipschitz > 0.0) || steps < 1)
    throw ContractViolation("kappa: need eta > 0, L > 0, s >= 1");
  if (steps == 1) return 0.0;
  const double h = eta * lipschitz;
  const double s = static_cast<double>(steps);
  // term_i = C(s,i) h^{i-2} / C(s,2); term_2 = 1.
  double term = 1.0;
  double total = 1.0;
  for (std::size_t i = 3; i <= steps; ++i) {
    term *= h * (s - static_cast<double>(i) + 1.0) / static_cast<double>(i);
    total += term;
  }
  return total;
}

PerturbationReport local_perturbation_check(const QuadraticObjective& objective,
                                            std::size_t client, std::span<const double> x,
                                            std::size_t steps, double eta) {
  const std::size_t d = objective.dimension();
  if (x.size() != d) throw ContractViolation("local_perturbation_check: dimension mismatch");
  if (steps < 1 || !(eta > 0.0)) throw ContractViolation("local_perturbation_check: bad s or eta");
  const Vector g0 = quad_gradient(objective, client, x);

  // Track the displacement x^(k) - x; for this objective the gradient
  // difference equals it exactly, which keeps tiny deviations accurate.
  Vector disp(d, 0.0), total(d, 0.0);
  for (std::size_t k = 0; k < steps; ++k) {
    axpy(1.0, disp, total);  // grad(x^(k)) - grad(x) = disp_k
    for (std::size_t r = 0; r < d; ++r) disp[r] -= eta * (g0[r] + disp[r]);
  }
  PerturbationReport rep;
  rep.lhs = norm2(total);
  const double s = static_cast<double>(steps);
  rep.rhs = kappa(eta, 1.0, steps) * eta * (s * (s - 1.0) / 2.0) * norm2(g0);
  rep.pass = rep.lhs <= rep.rhs * (1.0 + 1e-12);
  return rep;
}

}  // namespace fedsim
