#pragma once

#include <stdexcept>
#include <string>

namespace uqsim {

// Precondition or invariant broken by the caller.
class ContractViolation : public std::logic_error {
 public:
  explicit ContractViolation(const std::string& what) : std::logic_error(what) {}
};

// NaN/Inf produced by a numeric kernel; carries the operation name.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& op, const std::string& what)
      : std::runtime_error(op + ": " + what), op_(op) {}
  const std::string& op() const { return op_; }

 private:
  std::string op_;
};

// Optimization diverged; carries the epoch where it happened.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(int epoch, const std::string& what)
      : std::runtime_error("epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

// A second-order method failed to fit; carries the method name.
class MethodError : public std::runtime_error {
 public:
  MethodError(const std::string& method, const std::string& what)
      : std::runtime_error(method + ": " + what), method_(method) {}
  const std::string& method() const { return method_; }

 private:
  std::string method_;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace uqsim
