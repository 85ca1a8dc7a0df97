#pragma once

#include <stdexcept>
#include <string>

namespace earlystop {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid user-supplied configuration (bad bandwidth, divergent decay model, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A numerical routine failed to converge.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, int iterations)
      : Error(what + " (after " + std::to_string(iterations) + " iterations)"),
        iterations_(iterations) {}
  int iterations() const noexcept { return iterations_; }

 private:
  int iterations_;
};

// Gram matrix has an eigenvalue below -tol_psd * lambda_1.
class PsdViolation : public Error {
 public:
  using Error::Error;
};

// All empirical eigenvalues vanish, so no critical radius / stopping time exists.
class DegenerateKernel : public Error {
 public:
  using Error::Error;
};

// Step size outside [0, min(1, 1/lambda_1)].
class InvalidStep : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

}  // namespace earlystop
