#include "tdcr/twin_plant.hpp"

#include <cmath>

namespace tdcr {

TwinConfig TwinConfig::identity() {
  TwinConfig c;
  c.e_scale = 1.0;
  c.gravity_tilt = 0.0;
  c.c_spine_scale = 1.0;
  c.tip_mass = 0.0;
  c.sensor_noise_sigma = 0.0;
  return c;
}

void TwinConfig::validate() const {
  if (!(e_scale > 0.0) || !(c_spine_scale > 0.0)) throw InvalidInputError("twin scales must be positive");
  if (!(sensor_noise_sigma >= 0.0)) throw InvalidInputError("twin noise must be non-negative");
  if (!(tip_mass >= 0.0)) throw InvalidInputError("twin tip mass must be non-negative");
  if (!std::isfinite(gravity_tilt)) throw InvalidInputError("twin gravity tilt must be finite");
}

RodParams twin_params(const RodParams& nominal, const TwinConfig& config) {
  config.validate();
  RodParams p = nominal;
  p.youngs_modulus *= config.e_scale;
  p.c_spine *= config.c_spine_scale;
  p.tip_mass += config.tip_mass;
  if (config.gravity_tilt != 0.0) {
    p.gravity = Eigen::AngleAxisd(config.gravity_tilt, Vec3::UnitY()) * nominal.gravity;
  }
  return p;
}

RodPlant::RodPlant(RodParams params, ShootingOptions options)
    : params_(std::move(params)), options_(options) {
  params_.validate();
  rest_state_ = solve_releasing_slack(params_, straight_state(params_), TendonCommand::rest(params_), params_.dt,
                                      false, options_, nullptr, &realized_);
  reset();
}

void RodPlant::reset() {
  state_ = rest_state_;
  state_.t = 0.0;
  state_.previous = TimeHistory{};
  cache_ = ShootingCache{};
  realized_ = TendonCommand::rest(params_);
}

Vec3 RodPlant::step(const TendonCommand& command) {
  state_ = solve_releasing_slack(params_, state_, command, params_.dt, true, options_, &cache_, &realized_);
  return state_.tip();
}

Vec3 RodPlant::settle(const TendonCommand& command) {
  const double t = state_.t;
  state_ = solve_releasing_slack(params_, state_, command, params_.dt, false, options_, nullptr, &realized_);
  state_.t = t;
  state_.previous = TimeHistory{};
  cache_.valid = false;
  return state_.tip();
}

Vec4 RodPlant::realized_lengths() const {
  Vec4 out = tendon_path_lengths(state_, params_);
  for (int i = 0; i < kNumTendons; ++i)
    if (realized_.actuated[i]) out[i] = realized_.lengths[i];
  return out;
}

TwinPlant::TwinPlant(const RodParams& nominal, const TwinConfig& config, ShootingOptions options)
    : config_(config), plant_(twin_params(nominal, config), options), noise_rng_(config.seed) {}

Vec3 TwinPlant::observe() {
  Vec3 tip = plant_.tip();
  if (config_.sensor_noise_sigma > 0.0) {
    for (int i = 0; i < 3; ++i) tip[i] += config_.sensor_noise_sigma * standard_normal(noise_rng_);
  }
  return tip;
}

Vec3 TwinPlant::reset(std::uint64_t noise_seed) {
  plant_.reset();
  noise_rng_.seed(noise_seed);
  return observe();
}

Vec3 TwinPlant::step(const TendonCommand& command) {
  plant_.step(command);
  return observe();
}

Vec3 TwinPlant::settle(const TendonCommand& command) {
  plant_.settle(command);
  return observe();
}

TwinObservation twin_observe(const RodParams& nominal, const TwinConfig& config, const TendonCommand& command,
                             const RodState& state, Rng& noise_rng) {
  const RodParams p = twin_params(nominal, config);
  TwinObservation out;
  out.state = solve_releasing_slack(p, state, command, p.dt, true, ShootingOptions{}, nullptr, nullptr);
  out.tip = out.state.tip();
  if (config.sensor_noise_sigma > 0.0) {
    for (int i = 0; i < 3; ++i) out.tip[i] += config.sensor_noise_sigma * standard_normal(noise_rng);
  }
  return out;
}

GapReport workspace_gap_report(const RodParams& nominal, const TwinConfig& config,
                               const std::vector<TendonCommand>& commands) {
  if (commands.size() < 100) throw InvalidInputError("workspace_gap_report needs at least 100 commands");
  RodPlant sim(nominal);
  TwinPlant twin(nominal, config);
  twin.reset(config.seed);
  GapReport rep;
  Vec3 sum_abs = Vec3::Zero(), sum_signed = Vec3::Zero();
  for (const auto& cmd : commands) {
    try {
      sim.reset();
      twin.reset(config.seed + static_cast<std::uint64_t>(rep.n_commands + rep.n_failed) + 1);
      const Vec3 ps = sim.settle(cmd);
      const Vec3 pt = twin.settle(cmd);
      const Vec3 gap = ps - pt;
      sum_abs += gap.cwiseAbs();
      sum_signed += gap;
      rep.max_abs = rep.max_abs.cwiseMax(gap.cwiseAbs());
      ++rep.n_commands;
    } catch (const Error&) {
      ++rep.n_failed;
    }
  }
  if (rep.n_commands > 0) {
    rep.mean_abs = sum_abs / rep.n_commands;
    rep.mean_signed = sum_signed / rep.n_commands;
  }
  return rep;
}

}  // namespace tdcr
