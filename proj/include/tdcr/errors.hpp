#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace tdcr {

// Base class of every domain error raised by the library. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInputError : public Error {
 public:
  using Error::Error;
};

// ds[k] was driven to zero or below by spine compression.
class OverCompressionError : public Error {
 public:
  OverCompressionError(const std::string& what, int node) : Error(what), node_(node) {}
  int node() const { return node_; }

 private:
  int node_;
};

class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, double residual, int iterations)
      : Error(what), residual_(residual), iterations_(iterations) {}
  double residual() const { return residual_; }
  int iterations() const { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

// A length-constrained tendon ended up with negative tension at the solution.
class SlackTendonError : public Error {
 public:
  SlackTendonError(const std::string& what, int tendon, double tension)
      : Error(what), tendon_(tendon), tension_(tension) {}
  int tendon() const { return tendon_; }
  double tension() const { return tension_; }

 private:
  int tendon_;
  double tension_;
};

class CalibrationFailedError : public Error {
 public:
  CalibrationFailedError(const std::string& what, std::vector<std::pair<double, double>> curve)
      : Error(what), curve_(std::move(curve)) {}
  // (E, rms) pairs probed before giving up.
  const std::vector<std::pair<double, double>>& curve() const { return curve_; }

 private:
  std::vector<std::pair<double, double>> curve_;
};

class TrainingFailedError : public Error {
 public:
  TrainingFailedError(const std::string& what, std::vector<double> history)
      : Error(what), history_(std::move(history)) {}
  const std::vector<double>& history() const { return history_; }

 private:
  std::vector<double> history_;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class StalledError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace tdcr
