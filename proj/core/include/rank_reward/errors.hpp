#pragma once

#include <stdexcept>
#include <string>

namespace rank_reward {

/// Base of every exception thrown by rank_reward_core.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A configuration value violates its documented range.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An index addressed a dimension that does not exist.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A numeric input lies outside its admissible interval.
class ValueRangeError : public Error {
 public:
  using Error::Error;
};

/// Two sequences that must be parallel have different lengths.
class LengthMismatchError : public Error {
 public:
  using Error::Error;
};

class GroupTooSmallError : public Error {
 public:
  using Error::Error;
};

/// A probability vector does not sum to one.
class DistributionError : public Error {
 public:
  using Error::Error;
};

/// The requested correlation structure is not positive semidefinite.
class InfeasibleCorrelationError : public Error {
 public:
  using Error::Error;
};

/// A loss or gradient became non-finite.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file (JSONL record, corpus entry, ...).
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace rank_reward
