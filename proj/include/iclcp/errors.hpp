#pragma once

#include <stdexcept>
#include <string>

namespace iclcp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration values (GenConfig, TrainConfig, ExperimentConfig...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Shapes of matrices/vectors do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Argument outside its documented domain.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Normal equations are singular (unregularized ridge on a rank-deficient design).
class RankDeficiencyError : public Error {
 public:
  using Error::Error;
};

/// The FLOP budget does not admit a single training step.
class BudgetError : public Error {
 public:
  using Error::Error;
};

/// Every restart of an optimization diverged.
class FitError : public Error {
 public:
  using Error::Error;
};

/// A distribution-valued quantity has no mass (e.g. all-zero typicalness).
class DegeneracyError : public Error {
 public:
  using Error::Error;
};

}  // namespace iclcp
