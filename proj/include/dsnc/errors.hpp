#ifndef DSNC_ERRORS_HPP
#define DSNC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace dsnc {

// Malformed input files, bad model containers, inconsistent datasets.
class DataError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Non-finite values during training or optimization.
class NumericError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Violated preconditions on arguments (dimensions, ranges, configs).
class ArgumentError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

} // namespace dsnc

#endif
