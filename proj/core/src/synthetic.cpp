#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "fedsim/errors.hpp"
#include "fedsim/objectives.hpp"

namespace fedsim {

FederatedDataset generate_synthetic(double alpha, double beta, std::size_t clients,
                                    SeededStream& stream, const SyntheticOptions& options) {
  if (clients == 0) throw ConfigError("synthetic: m must be >= 1");
  if (options.count_mode == SampleCountMode::fixed && options.samples_per_client < 2)
    throw ConfigError("synthetic: samples_per_client must be >= 2");
  if (!(alpha >= 0.0) || !(beta >= 0.0)) throw ConfigError("synthetic: alpha, beta must be >= 0");
  if (!(options.train_fraction > 0.0 && options.train_fraction < 1.0))
    throw ConfigError("synthetic: train_fraction must lie in (0, 1)");

  FederatedDataset data;
  data.alpha = alpha;
  data.beta = beta;
  data.seed = stream.root_seed();
  data.clients.resize(clients);

  Vector feature_sd(kFeatures);
  for (std::size_t j = 0; j < kFeatures; ++j)
    feature_sd[j] = std::sqrt(std::pow(static_cast<double>(j + 1), -1.2));

  for (std::size_t i = 0; i < clients; ++i) {
    SeededStream client = stream.derive("client", i);
    SeededStream model_stream = client.derive("model");
    SeededStream feature_stream = client.derive("features");
    SeededStream split_stream = client.derive("split");

    const double u = model_stream.normal(0.0, alpha);
    SoftmaxParams truth;
    for (double& w : truth.weight.entries()) w = model_stream.normal(u, options.model_noise);
    for (double& b : truth.bias) b = model_stream.normal(u, options.model_noise);
    const Vector flat = truth.flatten();

    const double shift = model_stream.normal(0.0, beta);
    Vector centre(kFeatures);
    for (double& c : centre) c = model_stream.normal(shift, 1.0);

    std::size_t count = options.samples_per_client;
    if (options.count_mode == SampleCountMode::lognormal)
      count = std::max<std::size_t>(
          2, static_cast<std::size_t>(std::exp(model_stream.normal(4.0, 0.5))));

    std::vector<Sample> samples(count);
    for (auto& s : samples) {
      s.features.resize(kFeatures);
      for (std::size_t j = 0; j < kFeatures; ++j)
        s.features[j] = feature_stream.normal(centre[j], feature_sd[j]);
      s.label = softmax_predict(flat, s.features);
    }

    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t k = count; k > 1; --k) std::swap(order[k - 1], order[split_stream.below(k)]);
    auto n_train = static_cast<std::size_t>(std::lround(options.train_fraction * static_cast<double>(count)));
    n_train = std::clamp<std::size_t>(n_train, 1, count - 1);
    auto& cd = data.clients[i];
    for (std::size_t k = 0; k < count; ++k)
      (k < n_train ? cd.train : cd.test).push_back(std::move(samples[order[k]]));
  }
  return data;
}

namespace {

void write_rows(std::ostream& out, std::size_t client, const char* split,
                const std::vector<Sample>& rows) {
  for (const auto& s : rows) {
    out << client << ',' << split << ',' << s.label;
    for (double f : s.features) out << ',' << format_real(f);
    out << '\n';
  }
}

double parse_real(const std::string& text, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.empty())
    throw ConfigError("dataset: bad number '" + text + "' at line " + std::to_string(line));
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

void write_dataset(std::ostream& out, const FederatedDataset& data) {
  out << "synthetic-v1," << format_real(data.alpha) << ',' << format_real(data.beta) << ','
      << data.clients.size() << ',' << data.seed << '\n';
  for (std::size_t i = 0; i < data.clients.size(); ++i) {
    write_rows(out, i, "train", data.clients[i].train);
    write_rows(out, i, "test", data.clients[i].test);
  }
}

FederatedDataset read_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("dataset: empty input");
  const auto header = split_csv(line);
  if (header.size() != 5 || header[0] != "synthetic-v1")
    throw ConfigError("dataset: expected header 'synthetic-v1,alpha,beta,m,seed'");
  FederatedDataset data;
  data.alpha = parse_real(header[1], 1);
  data.beta = parse_real(header[2], 1);
  const auto m = static_cast<std::size_t>(std::stoull(header[3]));
  data.seed = std::stoull(header[4]);
  data.clients.resize(m);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 3 + kFeatures)
      throw ConfigError("dataset: expected " + std::to_string(3 + kFeatures) + " columns at line " +
                        std::to_string(line_no));
    const auto client = static_cast<std::size_t>(parse_real(cells[0], line_no));
    const auto label = static_cast<std::size_t>(parse_real(cells[2], line_no));
    if (client >= m || label >= kClasses)
      throw ConfigError("dataset: client or label out of range at line " + std::to_string(line_no));
    Sample s;
    s.label = label;
    s.features.resize(kFeatures);
    for (std::size_t j = 0; j < kFeatures; ++j) s.features[j] = parse_real(cells[3 + j], line_no);
    if (cells[1] == "train") {
      data.clients[client].train.push_back(std::move(s));
    } else if (cells[1] == "test") {
      data.clients[client].test.push_back(std::move(s));
    } else {
      throw ConfigError("dataset: split must be train or test at line " + std::to_string(line_no));
    }
  }
  return data;
}

}  // namespace fedsim
