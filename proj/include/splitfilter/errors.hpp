#pragma once

#include <stdexcept>
#include <string>

namespace splitfilter {

// Invalid user-supplied configuration (dimension mismatch, bad key, ...).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical breakdown at runtime (non-finite values, lost positivity, CFL).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Correction step produced an unusable posterior (C_n <= 0, domain escape).
class DegeneratePosteriorError : public NumericalError {
 public:
  explicit DegeneratePosteriorError(const std::string& what) : NumericalError(what) {}
};

}  // namespace splitfilter
