#pragma once

#include <stdexcept>
#include <string>

namespace mmloco {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Query point outside the workspace footprint.
class OutsideWorkspace : public Error {
 public:
  using Error::Error;
};

// A leg configuration breaks one of its joint limits.
class JointLimitError : public Error {
 public:
  JointLimitError(std::string dof, double value, double limit)
      : Error("joint limit violated: " + dof + " = " + std::to_string(value) +
              " (limit " + std::to_string(limit) + ")"),
        dof_(std::move(dof)) {}
  const std::string& dof() const noexcept { return dof_; }

 private:
  std::string dof_;
};

// Foot target the leg cannot reach. distance() is how far the target lies
// from the closest configuration inside the limits.
class UnreachableError : public Error {
 public:
  UnreachableError(int leg, double distance)
      : Error("leg " + std::to_string(leg) + " target unreachable (off by " +
              std::to_string(distance) + " m)"),
        leg_(leg),
        distance_(distance) {}
  int leg() const noexcept { return leg_; }
  double distance() const noexcept { return distance_; }

 private:
  int leg_;
  double distance_;
};

// Simulation produced NaN/Inf.
class NonFiniteState : public Error {
 public:
  using Error::Error;
};

// No stance feet: the robot is airborne.
class FlightPhaseError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace mmloco
