#include "tdcr/settings.hpp"

#include "tdcr/rod_io.hpp"

namespace tdcr {

void DataSettings::validate() const {
  if (sim_steps < 1 || real_steps < 1) throw InvalidInputError("data step counts must be >= 1");
  if (!(lattice_max_tension > 0.0)) throw InvalidInputError("gpr.lattice_max_tension must be positive");
  if (pool_directions < 1 || pool_magnitudes < 1 || eval_directions < 1 || eval_magnitudes < 1)
    throw InvalidInputError("lattice sizes must be >= 1");
  if (gpr_size < 1 || gpr_headline_size < 1 || n_targets < 1)
    throw InvalidInputError("gpr sizes and target count must be >= 1");
}

TwinConfig twin_config_from_config(const Config& c) {
  TwinConfig t;
  t.e_scale = c.get_double("twin.e_scale", t.e_scale);
  t.gravity_tilt = c.get_double("twin.gravity_tilt", t.gravity_tilt);
  t.c_spine_scale = c.get_double("twin.c_spine_scale", t.c_spine_scale);
  t.tip_mass = c.get_double("twin.tip_mass", t.tip_mass);
  t.sensor_noise_sigma = c.get_double("twin.sensor_noise_sigma", t.sensor_noise_sigma);
  t.seed = c.get_u64("twin.seed", t.seed);
  t.validate();
  return t;
}

TrainConfig train_config_from_config(const Config& c) {
  TrainConfig t;
  t.split_ratio = c.get_double("train.split_ratio", t.split_ratio);
  t.max_epochs = c.get_int("train.max_epochs", t.max_epochs);
  t.patience = c.get_int("train.patience", t.patience);
  t.learning_rate = c.get_double("train.learning_rate", t.learning_rate);
  t.sequence_length = c.get_int("train.sequence_length", t.sequence_length);
  t.hidden_dim = c.get_int("train.hidden_dim", t.hidden_dim);
  t.grad_clip = c.get_double("train.grad_clip", t.grad_clip);
  t.reset_per_pair = c.get_bool("train.reset_per_pair", t.reset_per_pair);
  t.seed = c.get_u64("train.seed", t.seed);
  t.validate();
  return t;
}

GprOptions gpr_options_from_config(const Config& c) {
  GprOptions g;
  g.n_starts = c.get_int("gpr.n_starts", g.n_starts);
  g.max_opt_points = c.get_int("gpr.max_opt_points", g.max_opt_points);
  g.max_iterations = c.get_int("gpr.max_iterations", g.max_iterations);
  g.jitter = c.get_double("gpr.jitter", g.jitter);
  g.standardize = c.get_bool("gpr.standardize", g.standardize);
  g.seed = c.get_u64("gpr.seed", g.seed);
  if (g.n_starts < 1 || g.max_opt_points < 2 || g.max_iterations < 1 || !(g.jitter >= 0.0))
    throw InvalidInputError("gpr options out of range");
  return g;
}

PolicyConfig policy_config_from_config(const Config& c) {
  PolicyConfig p;
  p.e_c = c.get_double("policy.e_c", p.e_c);
  p.fixed_point_tol = c.get_double("policy.fixed_point_tol", p.fixed_point_tol);
  p.max_fixed_point_iters = c.get_int("policy.max_fixed_point_iters", p.max_fixed_point_iters);
  p.max_control_steps = c.get_int("policy.max_control_steps", p.max_control_steps);
  p.control_rate = c.get_double("policy.control_rate", p.control_rate);
  p.open_loop_horizon = c.get_int("policy.open_loop_horizon", p.open_loop_horizon);
  p.settle_speed = c.get_double("policy.settle_speed", p.settle_speed);
  p.max_step = c.get_double("policy.max_step", p.max_step);
  p.range_fraction = c.get_double("policy.range_fraction", p.range_fraction);
  p.guard_window = c.get_int("policy.guard_window", p.guard_window);
  p.guard_tol = c.get_double("policy.guard_tol", p.guard_tol);
  p.waypoint_tol = c.get_double("policy.waypoint_tol", p.waypoint_tol);
  p.stall_steps = c.get_int("policy.stall_steps", p.stall_steps);
  p.validate();
  return p;
}

DataSettings data_settings_from_config(const Config& c) {
  DataSettings d;
  d.sim_steps = c.get_int("train.sim_steps", d.sim_steps);
  d.real_steps = c.get_int("train.real_steps", d.real_steps);
  d.exploration.max_step = c.get_double("train.explore_max_step", d.exploration.max_step);
  d.exploration.range_fraction = c.get_double("train.explore_range_fraction", d.exploration.range_fraction);
  d.lattice_max_tension = c.get_double("gpr.lattice_max_tension", d.lattice_max_tension);
  d.pool_directions = c.get_int("gpr.pool_directions", d.pool_directions);
  d.pool_magnitudes = c.get_int("gpr.pool_magnitudes", d.pool_magnitudes);
  d.eval_directions = c.get_int("gpr.eval_directions", d.eval_directions);
  d.eval_magnitudes = c.get_int("gpr.eval_magnitudes", d.eval_magnitudes);
  d.gpr_size = c.get_int("gpr.size", d.gpr_size);
  d.gpr_headline_size = c.get_int("gpr.headline_size", d.gpr_headline_size);
  d.n_targets = c.get_int("policy.n_targets", d.n_targets);
  d.validate();
  return d;
}

void twin_config_to_config(const TwinConfig& t, Config& c) {
  c.set("twin.e_scale", format_double(t.e_scale));
  c.set("twin.gravity_tilt", format_double(t.gravity_tilt));
  c.set("twin.c_spine_scale", format_double(t.c_spine_scale));
  c.set("twin.tip_mass", format_double(t.tip_mass));
  c.set("twin.sensor_noise_sigma", format_double(t.sensor_noise_sigma));
  c.set("twin.seed", std::to_string(t.seed));
}

void train_config_to_config(const TrainConfig& t, Config& c) {
  c.set("train.split_ratio", format_double(t.split_ratio));
  c.set("train.max_epochs", std::to_string(t.max_epochs));
  c.set("train.patience", std::to_string(t.patience));
  c.set("train.learning_rate", format_double(t.learning_rate));
  c.set("train.sequence_length", std::to_string(t.sequence_length));
  c.set("train.hidden_dim", std::to_string(t.hidden_dim));
  c.set("train.grad_clip", format_double(t.grad_clip));
  c.set("train.reset_per_pair", t.reset_per_pair ? "true" : "false");
  c.set("train.seed", std::to_string(t.seed));
}

void gpr_options_to_config(const GprOptions& g, Config& c) {
  c.set("gpr.n_starts", std::to_string(g.n_starts));
  c.set("gpr.max_opt_points", std::to_string(g.max_opt_points));
  c.set("gpr.max_iterations", std::to_string(g.max_iterations));
  c.set("gpr.jitter", format_double(g.jitter));
  c.set("gpr.standardize", g.standardize ? "true" : "false");
  c.set("gpr.seed", std::to_string(g.seed));
}

void policy_config_to_config(const PolicyConfig& p, Config& c) {
  c.set("policy.e_c", format_double(p.e_c));
  c.set("policy.fixed_point_tol", format_double(p.fixed_point_tol));
  c.set("policy.max_fixed_point_iters", std::to_string(p.max_fixed_point_iters));
  c.set("policy.max_control_steps", std::to_string(p.max_control_steps));
  c.set("policy.control_rate", format_double(p.control_rate));
  c.set("policy.open_loop_horizon", std::to_string(p.open_loop_horizon));
  c.set("policy.settle_speed", format_double(p.settle_speed));
  c.set("policy.max_step", format_double(p.max_step));
  c.set("policy.range_fraction", format_double(p.range_fraction));
  c.set("policy.guard_window", std::to_string(p.guard_window));
  c.set("policy.guard_tol", format_double(p.guard_tol));
  c.set("policy.waypoint_tol", format_double(p.waypoint_tol));
  c.set("policy.stall_steps", std::to_string(p.stall_steps));
}

void data_settings_to_config(const DataSettings& d, Config& c) {
  c.set("train.sim_steps", std::to_string(d.sim_steps));
  c.set("train.real_steps", std::to_string(d.real_steps));
  c.set("train.explore_max_step", format_double(d.exploration.max_step));
  c.set("train.explore_range_fraction", format_double(d.exploration.range_fraction));
  c.set("gpr.lattice_max_tension", format_double(d.lattice_max_tension));
  c.set("gpr.pool_directions", std::to_string(d.pool_directions));
  c.set("gpr.pool_magnitudes", std::to_string(d.pool_magnitudes));
  c.set("gpr.eval_directions", std::to_string(d.eval_directions));
  c.set("gpr.eval_magnitudes", std::to_string(d.eval_magnitudes));
  c.set("gpr.size", std::to_string(d.gpr_size));
  c.set("gpr.headline_size", std::to_string(d.gpr_headline_size));
  c.set("policy.n_targets", std::to_string(d.n_targets));
}

Config effective_config(const Config& overrides) {
  Config c;
  rod_params_to_config(rod_params_from_config(overrides), c);
  twin_config_to_config(twin_config_from_config(overrides), c);
  train_config_to_config(train_config_from_config(overrides), c);
  gpr_options_to_config(gpr_options_from_config(overrides), c);
  policy_config_to_config(policy_config_from_config(overrides), c);
  data_settings_to_config(data_settings_from_config(overrides), c);
  c.set("policy.e_c_from_policy_a", overrides.get_string("policy.e_c_from_policy_a", "true"));
  // Unknown keys are carried along so nothing the user wrote is silently dropped.
  for (const auto& [k, v] : overrides.values()) {
    if (!c.has(k)) c.set(k, v);
  }
  return c;
}

}  // namespace tdcr
