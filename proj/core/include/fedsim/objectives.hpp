#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "fedsim/numerics.hpp"
#include "fedsim/random.hpp"

namespace fedsim {

/// Local objectives F_i with gradient access, shared by the round engines.
class Objective {
 public:
  virtual ~Objective() = default;

  virtual std::size_t dimension() const = 0;
  virtual std::size_t clients() const = 0;
  /// Training samples held by a client; 0 means gradients are exact and no
  /// batches are drawn.
  virtual std::size_t train_size(std::size_t client) const = 0;

  /// Gradient of client i's loss at x on the given training-sample indices
  /// (ignored for exact objectives). Writes into `out`.
  virtual void gradient(std::size_t client, std::span<const double> x,
                        std::span<const std::size_t> batch, std::span<double> out) const = 0;

  /// (1/m) sum_i grad F_i(x) with full local data.
  virtual Vector global_gradient(std::span<const double> x) const = 0;
  virtual double train_loss(std::span<const double> x) const = 0;
  virtual std::optional<double> test_accuracy(std::span<const double> x) const = 0;
};

double global_gradient_norm(const Objective& objective, std::span<const double> x);

/// F_i(x) = 0.5 ||x - u_i||^2 with u_i the i-th column of `targets`.
class QuadraticObjective final : public Objective {
 public:
  explicit QuadraticObjective(DenseMatrix targets);

  const DenseMatrix& targets() const noexcept { return targets_; }

  std::size_t dimension() const override { return targets_.rows(); }
  std::size_t clients() const override { return targets_.cols(); }
  std::size_t train_size(std::size_t) const override { return 0; }
  void gradient(std::size_t client, std::span<const double> x, std::span<const std::size_t> batch,
                std::span<double> out) const override;
  Vector global_gradient(std::span<const double> x) const override;
  double train_loss(std::span<const double> x) const override;
  std::optional<double> test_accuracy(std::span<const double>) const override {
    return std::nullopt;
  }

 private:
  DenseMatrix targets_;
  Vector optimum_;
};

/// x - u_i.
Vector quad_gradient(const QuadraticObjective& objective, std::size_t client,
                     std::span<const double> x);
/// Column mean of the targets, the unique minimizer of the average.
Vector quad_global_optimum(const QuadraticObjective& objective);

/// Targets u_i ~ N(i * 1, variance * I) for i = 1..m (column i-1).
DenseMatrix counterexample_targets(std::size_t dimension, std::size_t clients, double variance,
                                   SeededStream& stream);

// --- softmax regression over the Synthetic(alpha, beta) family ---

inline constexpr std::size_t kFeatures = 60;
inline constexpr std::size_t kClasses = 10;
inline constexpr std::size_t kSoftmaxDimension = kClasses * kFeatures + kClasses;

struct Sample {
  Vector features;  // kFeatures entries
  std::size_t label = 0;
};

struct ClientData {
  std::vector<Sample> train;
  std::vector<Sample> test;
};

struct FederatedDataset {
  double alpha = 0.0;
  double beta = 0.0;
  std::uint64_t seed = 0;
  std::vector<ClientData> clients;
};

enum class SampleCountMode { fixed, lognormal };

struct SyntheticOptions {
  std::size_t samples_per_client = 250;
  SampleCountMode count_mode = SampleCountMode::fixed;
  double train_fraction = 0.8;
  /// Std-dev of W_i, b_i entries around u_i. Set to 0 (with alpha = beta = 0)
  /// to make every client share one labeling model.
  double model_noise = 1.0;
};

/// u_i ~ N(0, alpha); W_i, b_i entries ~ N(u_i, 1); B_i ~ N(0, beta);
/// v_i entries ~ N(B_i, 1); x ~ N(v_i, diag(j^-1.2)); y = argmax(W_i x + b_i).
/// alpha and beta are used as standard deviations.
FederatedDataset generate_synthetic(double alpha, double beta, std::size_t clients,
                                    SeededStream& stream, const SyntheticOptions& options = {});

/// Header `synthetic-v1,alpha,beta,m,seed`, then rows
/// `client_id,split,label,f0,...,f59` with reals at 17 significant digits.
void write_dataset(std::ostream& out, const FederatedDataset& data);
FederatedDataset read_dataset(std::istream& in);

/// Softmax model: weight (kClasses x kFeatures) and bias, flattened
/// weight-row-major then bias.
struct SoftmaxParams {
  DenseMatrix weight{kClasses, kFeatures};
  Vector bias = Vector(kClasses, 0.0);

  Vector flatten() const;
  static SoftmaxParams unflatten(std::span<const double> flat);
};

struct LossGrad {
  double loss = 0.0;
  Vector grad;
};

/// Mean cross-entropy of softmax(W x + b) over the batch, and its gradient
/// with respect to the flattened parameters.
LossGrad softmax_loss_grad(std::span<const double> params, std::span<const Sample> batch);
LossGrad softmax_loss_grad(const SoftmaxParams& params, std::span<const Sample> batch);
std::size_t softmax_predict(std::span<const double> params, std::span<const double> features);

class SoftmaxObjective final : public Objective {
 public:
  explicit SoftmaxObjective(FederatedDataset data);

  const FederatedDataset& data() const noexcept { return data_; }

  std::size_t dimension() const override { return kSoftmaxDimension; }
  std::size_t clients() const override { return data_.clients.size(); }
  std::size_t train_size(std::size_t client) const override {
    return data_.clients[client].train.size();
  }
  void gradient(std::size_t client, std::span<const double> x, std::span<const std::size_t> batch,
                std::span<double> out) const override;
  Vector global_gradient(std::span<const double> x) const override;
  double train_loss(std::span<const double> x) const override;
  std::optional<double> test_accuracy(std::span<const double> x) const override;

 private:
  FederatedDataset data_;
};

/// Per-client mini-batch schedule: batches are drawn without replacement
/// from a permutation of the client's training set that is reshuffled at
/// each epoch. The permutation for (client, epoch) comes from the stream path
/// client#i/epoch#e, so a client that skips rounds leaves others unaffected.
class BatchSchedule {
 public:
  BatchSchedule(const Objective& objective, std::size_t batch_size, SeededStream stream);

  /// Indices for client i's next round; empty for exact objectives.
  std::vector<std::size_t> next(std::size_t client);

 private:
  struct ClientCursor {
    std::vector<std::size_t> order;
    std::size_t position = 0;
    std::uint64_t epoch = 0;
  };
  void reshuffle(std::size_t client);

  const Objective* objective_;
  std::size_t batch_size_;
  SeededStream stream_;
  std::vector<ClientCursor> cursors_;
};

}  // namespace fedsim
