#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fedsim {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke an operation's precondition (shape, symmetry, range).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Invalid experiment or process configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An iterative solver hit its iteration cap.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Input exceeds what an exact enumeration route can handle.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// A Monte Carlo estimator saw no usable samples.
class StatisticalError : public Error {
 public:
  using Error::Error;
};

/// A model iterate became non-finite.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t round, std::size_t client)
      : Error("non-finite iterate at round " + std::to_string(round) +
              ", client " + std::to_string(client)),
        round_(round),
        client_(client) {}
  std::size_t round() const noexcept { return round_; }
  std::size_t client() const noexcept { return client_; }

 private:
  std::size_t round_;
  std::size_t client_;
};

}  // namespace fedsim
