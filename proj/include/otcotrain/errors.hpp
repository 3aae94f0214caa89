#pragma once

#include <stdexcept>
#include <string>

namespace otc {

// Bad user-facing input: config files, CLI values, malformed data files.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure inside a solver (overflow, divergence) as opposed to a
// contract violation, which throws std::invalid_argument.
class SolverError : public std::runtime_error {
 public:
  explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

}
