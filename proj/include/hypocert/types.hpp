#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace hypocert {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Raised when arguments violate an operation's preconditions (shape, sign, domain).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A test function lacks the derivative order an operation needs.
class UnsupportedFunction : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// No certificate exists for the requested parameters.
class InfeasibleCertificate : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A simulated state became non-finite.
class PropagationError : public std::runtime_error {
 public:
  PropagationError(const std::string& what, int index)
      : std::runtime_error(what), index_(index) {}
  int index() const { return index_; }

 private:
  int index_;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractViolation(msg);
}

}  // namespace hypocert
