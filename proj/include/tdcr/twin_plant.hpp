#pragma once

#include <cstdint>
#include <vector>

#include "tdcr/random.hpp"
#include "tdcr/rod_model.hpp"

namespace tdcr {

// Perturbations that turn the nominal simulator into the stand-in "real" robot.
struct TwinConfig {
  double e_scale = 0.85;
  double gravity_tilt = 0.05;  // rad, rotation of the gravity vector about y
  double c_spine_scale = 1.3;
  double tip_mass = 0.0;       // kg
  double sensor_noise_sigma = 2.5e-4;  // m, per axis
  std::uint64_t seed = 0;

  static TwinConfig identity();
  void validate() const;
};

RodParams twin_params(const RodParams& nominal, const TwinConfig& config);

// A rod simulator advanced one control period at a time from the resting configuration.
class RodPlant {
 public:
  explicit RodPlant(RodParams params, ShootingOptions options = {});

  void reset();
  // Dynamic step of length params.dt; returns the noiseless tip.
  Vec3 step(const TendonCommand& command);
  // Jumps to the static equilibrium of the command, warm-started from the current state.
  Vec3 settle(const TendonCommand& command);

  const RodParams& params() const { return params_; }
  const RodState& state() const { return state_; }
  Vec3 tip() const { return state_.tip(); }
  Vec3 tip_velocity() const { return state_.tip_velocity(); }
  // Actuated mask that was actually enforced after releasing slack tendons.
  const TendonCommand& realized_command() const { return realized_; }
  // Commanded length for enforced tendons, geometric path length for the others.
  Vec4 realized_lengths() const;

 private:
  RodParams params_;
  ShootingOptions options_;
  RodState rest_state_;
  RodState state_;
  ShootingCache cache_;
  TendonCommand realized_;
};

// Twin plant plus its observation noise stream.
class TwinPlant {
 public:
  TwinPlant(const RodParams& nominal, const TwinConfig& config, ShootingOptions options = {});

  // Resets the rod and restarts the noise stream; returns the first observation.
  Vec3 reset(std::uint64_t noise_seed);
  Vec3 step(const TendonCommand& command);
  Vec3 settle(const TendonCommand& command);

  Vec3 true_tip() const { return plant_.tip(); }
  const RodPlant& plant() const { return plant_; }
  const TwinConfig& config() const { return config_; }

 private:
  Vec3 observe();

  TwinConfig config_;
  RodPlant plant_;
  Rng noise_rng_;
};

struct TwinObservation {
  Vec3 tip;
  RodState state;
};

// Advances the perturbed simulator one control period from `state` and returns a noisy tip.
TwinObservation twin_observe(const RodParams& nominal, const TwinConfig& config, const TendonCommand& command,
                             const RodState& state, Rng& noise_rng);

struct GapReport {
  Vec3 mean_abs = Vec3::Zero();
  Vec3 max_abs = Vec3::Zero();
  Vec3 mean_signed = Vec3::Zero();
  int n_commands = 0;
  int n_failed = 0;
};

// Static sim-vs-twin tip gap per axis over a command set (at least 100 commands).
GapReport workspace_gap_report(const RodParams& nominal, const TwinConfig& config,
                               const std::vector<TendonCommand>& commands);

}  // namespace tdcr
