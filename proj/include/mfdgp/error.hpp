#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mfdgp {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Mismatched dimensions between inputs, kernels and queries.
struct InputShapeError : Error {
  using Error::Error;
};

/// Invalid argument values (out-of-box points, non-positive costs, ...).
struct InputError : Error {
  using Error::Error;
};

/// Cholesky or variance failure. Carries the jitter levels that were tried.
struct NumericalConditioningError : Error {
  NumericalConditioningError(const std::string& what, std::vector<double> jitters = {})
      : Error(what), attempted_jitter(std::move(jitters)) {}
  std::vector<double> attempted_jitter;
};

struct InsufficientDataError : Error {
  using Error::Error;
};

/// Operation called on an object in the wrong state (untrained model, empty ledger).
struct StateError : Error {
  using Error::Error;
};

struct FitError : Error {
  using Error::Error;
};

struct SimulationDivergedError : Error {
  using Error::Error;
};

struct CampaignInitError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct CorruptLogError : Error {
  CorruptLogError(const std::string& what, std::size_t line_no) : Error(what), line(line_no) {}
  std::size_t line;
};

}  // namespace mfdgp
