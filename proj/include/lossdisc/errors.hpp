#pragma once

#include <stdexcept>
#include <string>

namespace lossdisc {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Factorization hit a non-positive pivot: the matrix is not positive-definite
/// (or not symmetric within tolerance).
class NotSpd : public Error {
 public:
  using Error::Error;
};

/// Rank-one update denominator 1 + v^T A^{-1} u is numerically zero.
class SingularUpdate : public Error {
 public:
  using Error::Error;
};

/// Adaptive quadrature exhausted its subdivision budget.
class NonConvergence : public Error {
 public:
  using Error::Error;
};

class EmptyInput : public Error {
 public:
  using Error::Error;
};

class NegativeWeight : public Error {
 public:
  using Error::Error;
};

/// A construction invariant of a spec/value type is violated.
class InvalidSpec : public Error {
 public:
  using Error::Error;
};

/// Generic precondition violation (bad range, bad flag combination).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

class RankDeficient : public Error {
 public:
  using Error::Error;
};

class ZeroVariance : public Error {
 public:
  using Error::Error;
};

class MissingGroup : public Error {
 public:
  using Error::Error;
};

/// One group has no rows / zero probability mass.
class GroupEmpty : public Error {
 public:
  using Error::Error;
};

class InvalidPermutation : public Error {
 public:
  using Error::Error;
};

class ZeroMass : public Error {
 public:
  using Error::Error;
};

/// Simplex did not finish within its iteration budget; signals numerical
/// trouble and is never silently reported as Optimal.
class IterationLimit : public Error {
 public:
  using Error::Error;
};

class EmptyPopulation : public Error {
 public:
  using Error::Error;
};

/// An analytic bound was violated beyond tolerance; indicates a bug, so it is
/// raised instead of clamped.
class BoundViolation : public Error {
 public:
  using Error::Error;
};

/// Configuration / IO problem surfaced by the CLI layer.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace lossdisc
