#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace causalsafe {

/// Canonical integer encoding of a visible state.
using StateId = int;
/// Position of an action in the model's ordered action set.
using ActionIndex = int;
using LatentId = int;
using MediatorId = int;

/// Absolute tolerance for every "row sums to one" check.
inline constexpr double kNormTolerance = 1e-9;

/// Visible state paired with the number of steps remaining in the episode.
/// A state observed at time t of an H-step episode has k = H - t.
struct AugmentedState {
  StateId x = 0;
  int k = 0;

  friend bool operator==(const AugmentedState&, const AugmentedState&) = default;
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unknown state, action, latent or mediator identifier.
class EncodingError : public Error {
 public:
  using Error::Error;
};

/// A conditional was requested on a cell the behavioral data never supports.
class PositivityError : public Error {
 public:
  using Error::Error;
};

class EndOfEpisodeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class SizeError : public Error {
 public:
  using Error::Error;
};

/// Raw/converted dataset form mismatch.
class FormError : public Error {
 public:
  using Error::Error;
};

class UnsupportedEnvironment : public Error {
 public:
  using Error::Error;
};

class CertificateUnavailable : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, int iterations, double residual)
      : Error(what), iterations_(iterations), residual_(residual) {}

  int iterations() const { return iterations_; }
  double residual() const { return residual_; }

 private:
  int iterations_;
  double residual_;
};

}  // namespace causalsafe
