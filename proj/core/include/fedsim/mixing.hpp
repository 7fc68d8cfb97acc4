#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fedsim/link_model.hpp"
#include "fedsim/numerics.hpp"
#include "fedsim/random.hpp"

namespace fedsim {

/// Implicit-gossip matrix of a postponed-broadcast round: 1/|A| on the active
/// block, 1 on inactive diagonal entries, 0 elsewhere.
struct MixingMatrix {
  DenseMatrix entries;
  std::size_t size() const noexcept { return entries.rows(); }
};

MixingMatrix build_mixing(const ActiveSet& active, std::size_t clients);

/// Right-multiplies the columns of x (d x m) by W(active) in place:
/// active columns are replaced by their mean, inactive ones are untouched.
void apply_mixing(DenseMatrix& x, const ActiveSet& active);

enum class Provenance { exact, monte_carlo };

/// E[W^2] for independent activations with probabilities p.
struct ExpectedSquareMixing {
  DenseMatrix entries;
  Provenance provenance = Provenance::exact;
  std::size_t trials = 0;      // monte_carlo only
  DenseMatrix standard_error;  // monte_carlo only, entry-wise
  std::size_t size() const noexcept { return entries.rows(); }
};

/// Closed form: M_jj = p_j I_j + (1 - p_j), M_jk = p_j p_k I_jk with
/// I_j = int_0^1 prod_{l!=j} (1 - p_l + p_l s) ds and
/// I_jk = int_0^1 s prod_{l!=j,k} (1 - p_l + p_l s) ds.
ExpectedSquareMixing expected_square_exact(std::span<const double> p);

ExpectedSquareMixing expected_square_mc(std::span<const double> p, std::size_t trials,
                                        SeededStream& stream);

double rho(const ExpectedSquareMixing& m);

/// 1 - c^4 [1 - (1 - c)^m]^2 / 8.
double ergodicity_bound(double floor, std::size_t clients);

/// (c^2 / m) [1 - (1 - c)^m]: lower bound on every entry of the exact M.
double entry_lower_bound(double floor, std::size_t clients);

struct ContractionReport {
  std::size_t horizon = 0;
  double lhs = 0.0;
  double standard_error = 0.0;
  double rhs = 0.0;
  bool pass = false;
};

/// Monte Carlo check of E||B (prod_{r<=t} W_r - J)||_F^2 <= rho^t ||B||_F^2.
ContractionReport contraction_check(const DenseMatrix& b, std::span<const double> p,
                                    std::size_t horizon, std::size_t trials,
                                    SeededStream& stream);

/// Same check for every horizon 1..max_horizon from one set of sampled
/// sequences (row t-1 is horizon t).
std::vector<ContractionReport> contraction_profile(const DenseMatrix& b,
                                                   std::span<const double> p,
                                                   std::size_t max_horizon, std::size_t trials,
                                                   SeededStream& stream);

/// Running spectral diagnostics for a time-varying process.
class RhoTracker {
 public:
  explicit RhoTracker(double floor, std::size_t clients);
  void observe(std::span<const double> p);

  std::size_t rounds() const noexcept { return rounds_; }
  double last() const noexcept { return last_; }
  double running_max() const noexcept { return max_; }
  /// prod_r rho(r). Tighter than rho_max^t; not the uniform quantity used
  /// by the contraction bound.
  double product() const noexcept { return product_; }
  double bound() const noexcept { return bound_; }

 private:
  double bound_;
  std::size_t rounds_ = 0;
  double last_ = 0.0;
  double max_ = 0.0;
  double product_ = 1.0;
  Vector cached_p_;
};

}  // namespace fedsim
