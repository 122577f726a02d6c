#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "tdcr/twin_plant.hpp"

namespace tdcr {

struct CalibrationObservation {
  TendonCommand command;
  Vec3 tip = Vec3::Zero();
  double load_kg = 0.0;
};

struct CalibrationProblem {
  std::vector<CalibrationObservation> observations;
  double e_min = 1e8;   // Pa
  double e_max = 1e11;  // Pa
  int grid_points = 16;  // log-spaced probes that bracket the minimum

  void validate() const;
};

struct CalibrationResult {
  double youngs_modulus = 0.0;
  double rms_error = 0.0;
  std::vector<std::pair<double, double>> curve;  // every (E, rms) probed, in probe order
};

// RMS tip error over the observations with E set on a copy of `params` (G follows from E and nu).
// Observations whose static solve fails contribute infinity.
double calibration_rms(const CalibrationProblem& problem, const RodParams& params, double youngs_modulus);

// Log-spaced grid over the search interval, then Brent's method on log E inside the best bracket.
CalibrationResult calibrate_youngs_modulus(const CalibrationProblem& problem, const RodParams& params);

// Static tip of `params` for each command under the given loads, with Gaussian noise of `noise_sigma`.
std::vector<CalibrationObservation> synthesize_observations(const RodParams& params,
                                                            const std::vector<TendonCommand>& commands,
                                                            const std::vector<double>& loads, double noise_sigma,
                                                            std::uint64_t seed);

// Default observation commands: `n` tension-lattice equilibria of `params` spread over four
// bending directions, returned as length commands.
std::vector<TendonCommand> calibration_commands(const RodParams& params, int n = 12);

// Header: L1,L2,L3,L4,tip_x,tip_y,tip_z,load_kg
void write_observations_csv(std::ostream& out, const std::vector<CalibrationObservation>& obs);
void write_observations_csv(const std::string& path, const std::vector<CalibrationObservation>& obs);
std::vector<CalibrationObservation> read_observations_csv(const std::string& path, const RodParams& params);

}  // namespace tdcr
