#pragma once

#include <stdexcept>
#include <string>

namespace copulahmm {

// Malformed or inconsistent inputs (files, schemas, dimensions).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid model parameters (negative rates, rho < 1, non-stochastic rows).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite intermediates, diverging optimizers or samplers.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace copulahmm
