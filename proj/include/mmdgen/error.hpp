#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mmdgen {

class DimensionError : public std::invalid_argument {
 public:
  DimensionError(const std::string& what, long expected, long actual)
      : std::invalid_argument(what + ": expected length " + std::to_string(expected) +
                              ", got " + std::to_string(actual)),
        expected_(expected),
        actual_(actual) {}

  long expected() const { return expected_; }
  long actual() const { return actual_; }

 private:
  long expected_;
  long actual_;
};

// Raised by the training loops when a gradient or parameter stops being finite.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, std::uint64_t iteration)
      : std::runtime_error(what + " at iteration " + std::to_string(iteration)),
        iteration_(iteration) {}

  std::uint64_t iteration() const { return iteration_; }

 private:
  std::uint64_t iteration_;
};

// Malformed input files and checkpoints.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dataset entries outside [0, 1] when no rescaling was requested.
class RangeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void check_same_length(const char* what, long expected, long actual) {
  if (expected != actual) throw DimensionError(what, expected, actual);
}

}  // namespace mmdgen
