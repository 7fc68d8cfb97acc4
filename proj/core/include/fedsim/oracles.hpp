#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "fedsim/numerics.hpp"
#include "fedsim/objectives.hpp"
#include "fedsim/random.hpp"

namespace fedsim {

enum class LimitMethod { subset, integral, monte_carlo };
std::string_view to_string(LimitMethod m);

/// Convex weights w with lim FedAvg x^T = sum_i w_i u_i under static p.
struct LimitWeights {
  Vector w;
  LimitMethod method = LimitMethod::integral;
  Vector standard_error;  // monte_carlo only
};

/// w_i = p_i [1 + sum_{j=2}^m (-1)^{j+1} (1/j) e_{j-1}(p_{-i})] / (1 - prod(1 - p)),
/// with e_k the elementary symmetric polynomial over the other clients. Uses
/// literal subset enumeration for m <= 12 and elementary-symmetric
/// accumulation up to m = 20; larger m raises CapacityError.
LimitWeights fedavg_limit_subset(std::span<const double> p);

/// Above this m the integral route divides factors out of one expanded
/// product instead of re-expanding per client.
inline constexpr std::size_t kDirectIntegralLimit = 256;

/// w_i = p_i int_0^1 prod_{k != i} (1 - p_k + p_k s) ds / (1 - prod(1 - p)).
LimitWeights fedavg_limit_integral(std::span<const double> p);

/// Monte Carlo of E[X_i / sum_j X_j | A nonempty], 0/0 = 0.
LimitWeights fedavg_limit_mc(std::span<const double> p, std::size_t trials, SeededStream& stream);

/// sum_i w_i u_i for targets u (d x m).
Vector predicted_limit(const LimitWeights& weights, const DenseMatrix& targets);

/// [(1 + eta L)^s - 1 - s eta L] / [C(s,2) (eta L)^2], evaluated as
/// sum_{i=2}^s C(s,i) (eta L)^{i-2} / C(s,2); 0 for s = 1.
double kappa(double eta, double lipschitz, std::size_t steps);

struct PerturbationReport {
  double lhs = 0.0;
  double rhs = 0.0;
  bool pass = false;
};

/// || sum_{k<s} [grad l_i(x^(k)) - grad l_i(x)] || <= kappa eta C(s,2) L ||grad l_i(x)||
/// on the quadratic objective (L_i = 1).
PerturbationReport local_perturbation_check(const QuadraticObjective& objective,
                                            std::size_t client, std::span<const double> x,
                                            std::size_t steps, double eta);

}  // namespace fedsim
