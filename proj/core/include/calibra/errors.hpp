#pragma once

#include <stdexcept>
#include <string>

namespace calibra {

struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Bad user input: malformed config, malformed files, out-of-range values.
struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(what) {}
};

// Structurally invalid data: bad weights, labels outside [0,1], empty cells.
struct DataError : Error {
  explicit DataError(const std::string& what) : Error(what) {}
};

// Mixture or conditional distribution requested over a zero-mass region.
struct EmptyRegionError : Error {
  explicit EmptyRegionError(const std::string& what) : Error(what) {}
};

// A calibration loop exceeded 10x its theoretical update budget.
struct NonTerminationError : Error {
  explicit NonTerminationError(const std::string& what) : Error(what) {}
};

// The stage-game solver could not reach the requested tolerance.
struct SolverError : Error {
  explicit SolverError(const std::string& what) : Error(what) {}
};

}  // namespace calibra
