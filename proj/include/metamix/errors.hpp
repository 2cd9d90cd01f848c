#pragma once

#include <stdexcept>
#include <string>

namespace metamix {

// Base class for all metamix errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data (CSV parse failures, bad study
// records, invalid option combinations). CLI exit code 2.
struct InputError : Error {
  using Error::Error;
};

// A requested quantity is not estimable from the given data (e.g. a
// combined fit with no IPD study, or sigma_alpha^2 needed but neither
// supplied nor estimable). CLI exit code 3.
struct EstimabilityError : Error {
  using Error::Error;
};

// An iterative routine exhausted its iteration budget without meeting
// its convergence tolerance. CLI exit code 4.
struct ConvergenceError : Error {
  using Error::Error;
};

}  // namespace metamix
