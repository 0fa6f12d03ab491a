#pragma once

#include <stdexcept>
#include <string>

namespace l2o {

// Dimension / layout mismatches between operands.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Invalid user-supplied configuration (ranges, splits, schema).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Iterative numerical routine failed to converge.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A rollout produced a non-finite iterate. Carries the first bad iteration.
struct DivergenceError : std::runtime_error {
  DivergenceError(int iteration_, const std::string& what)
      : std::runtime_error(what), iteration(iteration_) {}
  int iteration;
};

// Training aborted (e.g. too many divergent outer iterations).
struct TrainingFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace l2o
