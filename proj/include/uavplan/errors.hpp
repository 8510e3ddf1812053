#pragma once

#include <stdexcept>
#include <string>

namespace uavplan {

/// A precondition on an argument's numeric range was violated.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// The problem (or the iterate handed to a routine) admits no feasible point.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The LP objective is unbounded above on the feasible set.
class UnboundedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Scenario / file content failed validation.
class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace uavplan
