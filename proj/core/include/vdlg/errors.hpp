#pragma once

#include <stdexcept>
#include <string>

namespace vdlg {

// Invalid configuration (bad key, bad value, inconsistent dims). CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Corpus / file problems (schema violation, missing ids, bad magic). CLI exit code 3.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failures (non-finite values, contract violations on math ops). CLI exit code 4.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace vdlg
