#ifndef TIMELEAK_ERRORS_HPP
#define TIMELEAK_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace timeleak {

// Bad arguments or invalid configuration values. CLI exit code 2.
struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Unusable input data (parse failures, malformed files). CLI exit code 3.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Too little data to produce a meaningful result. CLI exit code 3.
struct InsufficientDataError : DataError {
  using DataError::DataError;
};

}  // namespace timeleak

#endif
