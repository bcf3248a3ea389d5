#pragma once

#include <stdexcept>
#include <string>

namespace mpbt {

// Base class for all library errors. Everything thrown on purpose derives
// from this, so callers can catch one type at the boundary.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed model structure: dimension mismatches, negative rates where
// non-negative ones are required, root distribution not summing to one.
class StructureError : public Error {
 public:
  explicit StructureError(const std::string& msg) : Error(msg) {}
};

// An iterative routine exhausted its budget before reaching tolerance.
// Carries the last residual so callers can judge how close it got.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& msg, double residual)
      : Error(msg), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

// Simulation refused to start because the expected lineage count at the
// requested depth exceeds the configured cap, or a running simulation
// overshot the hard node limit derived from that cap.
class GrowthGuardError : public Error {
 public:
  GrowthGuardError(const std::string& msg, double expected_lineages, double cap)
      : Error(msg), expected_(expected_lineages), cap_(cap) {}
  double expected_lineages() const { return expected_; }
  double cap() const { return cap_; }

 private:
  double expected_;
  double cap_;
};

// File or text could not be read, written, or parsed.
class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace mpbt
