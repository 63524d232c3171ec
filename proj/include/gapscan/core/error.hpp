#pragma once

#include <stdexcept>
#include <string>

namespace gapscan {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input violates a shape or range contract.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Oracle query budget exhausted. Never converted into a sentinel label.
class BudgetExhausted : public Error {
 public:
  using Error::Error;
};

class BankError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class ProjectionError : public Error {
 public:
  enum class Endpoint { source, target };
  ProjectionError(Endpoint which, const std::string& what) : Error(what), endpoint_(which) {}
  Endpoint endpoint() const noexcept { return endpoint_; }

 private:
  Endpoint endpoint_;
};

// Every Monte Carlo probe returned the same indicator value.
class DegenerateEstimate : public Error {
 public:
  using Error::Error;
};

class OptimizationError : public Error {
 public:
  using Error::Error;
};

class NormalizationError : public Error {
 public:
  using Error::Error;
};

class StatisticsError : public Error {
 public:
  using Error::Error;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace gapscan
