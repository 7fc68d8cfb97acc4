#include "fedsim/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fedsim/errors.hpp"

namespace fedsim {

double global_gradient_norm(const Objective& objective, std::span<const double> x) {
  return norm2(objective.global_gradient(x));
}

QuadraticObjective::QuadraticObjective(DenseMatrix targets) : targets_(std::move(targets)) {
  if (targets_.cols() == 0 || targets_.rows() == 0)
    throw ConfigError("quadratic objective: need d >= 1 and m >= 1");
  if (!targets_.all_finite()) throw ConfigError("quadratic objective: non-finite target");
  optimum_ = column_mean(targets_);
}

void QuadraticObjective::gradient(std::size_t client, std::span<const double> x,
                                  std::span<const std::size_t>, std::span<double> out) const {
  const std::size_t d = dimension();
  if (x.size() != d || out.size() != d)
    throw ContractViolation("quadratic gradient: dimension mismatch");
  if (client >= clients()) throw ContractViolation("quadratic gradient: client out of range");
  for (std::size_t r = 0; r < d; ++r) out[r] = x[r] - targets_(r, client);
}

Vector QuadraticObjective::global_gradient(std::span<const double> x) const {
  if (x.size() != dimension()) throw ContractViolation("quadratic gradient: dimension mismatch");
  Vector g(x.size());
  for (std::size_t r = 0; r < g.size(); ++r) g[r] = x[r] - optimum_[r];
  return g;
}

double QuadraticObjective::train_loss(std::span<const double> x) const {
  double total = 0.0;
  for (std::size_t i = 0; i < clients(); ++i) {
    double s = 0.0;
    for (std::size_t r = 0; r < dimension(); ++r) {
      const double e = x[r] - targets_(r, i);
      s += e * e;
    }
    total += 0.5 * s;
  }
  return total / static_cast<double>(clients());
}

Vector quad_gradient(const QuadraticObjective& objective, std::size_t client,
                     std::span<const double> x) {
  Vector g(objective.dimension());
  objective.gradient(client, x, {}, g);
  return g;
}

Vector quad_global_optimum(const QuadraticObjective& objective) {
  return column_mean(objective.targets());
}

DenseMatrix counterexample_targets(std::size_t dimension, std::size_t clients, double variance,
                                   SeededStream& stream) {
  DenseMatrix u(dimension, clients);
  const double sd = std::sqrt(variance);
  for (std::size_t i = 0; i < clients; ++i)
    for (std::size_t r = 0; r < dimension; ++r)
      u(r, i) = stream.normal(static_cast<double>(i + 1), sd);
  return u;
}

// --- softmax ---

Vector SoftmaxParams::flatten() const {
  Vector flat(kSoftmaxDimension);
  std::copy(weight.entries().begin(), weight.entries().end(), flat.begin());
  std::copy(bias.begin(), bias.end(), flat.begin() + kClasses * kFeatures);
  return flat;
}

SoftmaxParams SoftmaxParams::unflatten(std::span<const double> flat) {
  if (flat.size() != kSoftmaxDimension)
    throw ContractViolation("softmax params: expected " + std::to_string(kSoftmaxDimension) +
                            " values");
  SoftmaxParams p;
  std::copy(flat.begin(), flat.begin() + kClasses * kFeatures, p.weight.entries().begin());
  std::copy(flat.begin() + kClasses * kFeatures, flat.end(), p.bias.begin());
  return p;
}

namespace {

void logits(std::span<const double> params, std::span<const double> x, double* z) {
  const double* w = params.data();
  const double* b = params.data() + kClasses * kFeatures;
  for (std::size_t k = 0; k < kClasses; ++k) {
    double s = b[k];
    const double* wk = w + k * kFeatures;
    for (std::size_t j = 0; j < kFeatures; ++j) s += wk[j] * x[j];
    z[k] = s;
  }
}

// Accumulates loss and gradient of one sample, scaled by `weight`.
double accumulate_sample(std::span<const double> params, const Sample& sample, double weight,
                         double* grad) {
  if (sample.features.size() != kFeatures || sample.label >= kClasses)
    throw ContractViolation("softmax: malformed sample");
  double z[kClasses];
  logits(params, sample.features, z);
  const double zmax = *std::max_element(z, z + kClasses);
  double norm = 0.0;
  for (double v : z) norm += std::exp(v - zmax);
  const double log_norm = std::log(norm) + zmax;
  const double loss = log_norm - z[sample.label];
  if (grad) {
    for (std::size_t k = 0; k < kClasses; ++k) {
      const double prob = std::exp(z[k] - log_norm);
      const double delta = weight * (prob - (k == sample.label ? 1.0 : 0.0));
      double* gk = grad + k * kFeatures;
      for (std::size_t j = 0; j < kFeatures; ++j) gk[j] += delta * sample.features[j];
      grad[kClasses * kFeatures + k] += delta;
    }
  }
  return loss;
}

}  // namespace

LossGrad softmax_loss_grad(std::span<const double> params, std::span<const Sample> batch) {
  if (params.size() != kSoftmaxDimension) throw ContractViolation("softmax: bad parameter size");
  if (batch.empty()) throw ContractViolation("softmax_loss_grad: empty batch");
  LossGrad out{0.0, Vector(kSoftmaxDimension, 0.0)};
  const double w = 1.0 / static_cast<double>(batch.size());
  for (const auto& s : batch) out.loss += accumulate_sample(params, s, w, out.grad.data());
  out.loss *= w;
  return out;
}

LossGrad softmax_loss_grad(const SoftmaxParams& params, std::span<const Sample> batch) {
  return softmax_loss_grad(params.flatten(), batch);
}

std::size_t softmax_predict(std::span<const double> params, std::span<const double> features) {
  double z[kClasses];
  logits(params, features, z);
  return static_cast<std::size_t>(std::max_element(z, z + kClasses) - z);
}

SoftmaxObjective::SoftmaxObjective(FederatedDataset data) : data_(std::move(data)) {
  if (data_.clients.empty()) throw ConfigError("softmax objective: no clients");
  for (std::size_t i = 0; i < data_.clients.size(); ++i)
    if (data_.clients[i].train.empty())
      throw ConfigError("softmax objective: client " + std::to_string(i) + " has no training data");
}

void SoftmaxObjective::gradient(std::size_t client, std::span<const double> x,
                                std::span<const std::size_t> batch, std::span<double> out) const {
  if (x.size() != kSoftmaxDimension || out.size() != kSoftmaxDimension)
    throw ContractViolation("softmax gradient: dimension mismatch");
  const auto& train = data_.clients.at(client).train;
  std::fill(out.begin(), out.end(), 0.0);
  if (batch.empty()) throw ContractViolation("softmax gradient: empty batch");
  const double w = 1.0 / static_cast<double>(batch.size());
  for (std::size_t idx : batch) accumulate_sample(x, train.at(idx), w, out.data());
}

Vector SoftmaxObjective::global_gradient(std::span<const double> x) const {
  Vector g(kSoftmaxDimension, 0.0);
  const double wm = 1.0 / static_cast<double>(clients());
  for (const auto& c : data_.clients) {
    const double w = wm / static_cast<double>(c.train.size());
    for (const auto& s : c.train) accumulate_sample(x, s, w, g.data());
  }
  return g;
}

double SoftmaxObjective::train_loss(std::span<const double> x) const {
  double total = 0.0;
  for (const auto& c : data_.clients) {
    double s = 0.0;
    for (const auto& sample : c.train) s += accumulate_sample(x, sample, 0.0, nullptr);
    total += s / static_cast<double>(c.train.size());
  }
  return total / static_cast<double>(clients());
}

std::optional<double> SoftmaxObjective::test_accuracy(std::span<const double> x) const {
  std::size_t correct = 0;
  std::size_t total = 0;
  for (const auto& c : data_.clients)
    for (const auto& s : c.test) {
      correct += softmax_predict(x, s.features) == s.label ? 1 : 0;
      ++total;
    }
  if (total == 0) return std::nullopt;
  return static_cast<double>(correct) / static_cast<double>(total);
}

// --- batches ---

BatchSchedule::BatchSchedule(const Objective& objective, std::size_t batch_size,
                             SeededStream stream)
    : objective_(&objective),
      batch_size_(batch_size),
      stream_(std::move(stream)),
      cursors_(objective.clients()) {
  if (batch_size_ == 0) throw ConfigError("batch size must be >= 1");
}

void BatchSchedule::reshuffle(std::size_t client) {
  auto& cur = cursors_[client];
  const std::size_t n = objective_->train_size(client);
  cur.order.resize(n);
  std::iota(cur.order.begin(), cur.order.end(), std::size_t{0});
  SeededStream s = stream_.derive("client", client).derive("epoch", cur.epoch);
  for (std::size_t i = n; i > 1; --i) std::swap(cur.order[i - 1], cur.order[s.below(i)]);
  cur.position = 0;
  ++cur.epoch;
}

std::vector<std::size_t> BatchSchedule::next(std::size_t client) {
  const std::size_t n = objective_->train_size(client);
  if (n == 0) return {};
  auto& cur = cursors_.at(client);
  const std::size_t want = std::min(batch_size_, n);
  std::vector<std::size_t> batch;
  batch.reserve(want);
  while (batch.size() < want) {
    if (cur.epoch == 0 || cur.position == cur.order.size()) reshuffle(client);
    batch.push_back(cur.order[cur.position++]);
  }
  return batch;
}

}  // namespace fedsim
