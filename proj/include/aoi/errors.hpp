#pragma once

#include <stdexcept>
#include <string>

namespace aoi {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the convergence region of a transform.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Requested moment does not exist (heavy tail).
class UndefinedMomentError : public Error {
 public:
  using Error::Error;
};

class InvalidScenarioError : public Error {
 public:
  using Error::Error;
};

// Geometric series divergence or a numerical derivative that failed its
// step-halving check.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

// Configuration problem. `path()` names the offending JSON location.
class ConfigError : public Error {
 public:
  ConfigError(std::string path, const std::string& message)
      : Error(path.empty() ? message : path + ": " + message), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace aoi
