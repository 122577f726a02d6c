#include "tdcr/control.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "tdcr/config.hpp"
#include "tdcr/random.hpp"

namespace tdcr {

namespace {

Eigen::VectorXd inverse_input(const Vec3& x_from, const Vec3& x_to) {
  Eigen::VectorXd in(6);
  in << x_from, x_to;
  return in;
}

struct CommandOut {
  Vec4 lengths = Vec4::Zero();
  Vec3 x_s = Vec3::Zero();
  Vec3 e_gp = Vec3::Zero();
  char branch = 'A';
  const FixedPointResult* fixed_point = nullptr;
};

// Per-trial memory of a policy: hidden states, the last e_gp and C's guard. Queries never
// advance a hidden state; observe() does.
class Controller {
 public:
  Controller(const PolicyConfig& cfg, const Policy& policy) : cfg_(cfg), policy_(policy) {
    if (policy.inverse_sim) h_a_ = policy.inverse_sim->zero_hidden();
    if (policy.inverse_gpr) h_b_ = policy.inverse_gpr->zero_hidden();
    if (policy.inverse_real) h_r_ = policy.inverse_real->zero_hidden();
  }

  CommandOut command(const Vec3& x_current, const Vec3& target) {
    CommandOut out;
    switch (policy_.kind) {
      case PolicyKind::kA:
        run_a(x_current, target, out);
        out.branch = 'A';
        break;
      case PolicyKind::kB: {
        out.lengths = policy_.inverse_gpr->predict(inverse_input(x_current, target), h_b_).first;
        out.x_s = target;
        out.branch = 'B';
        break;
      }
      case PolicyKind::kReal: {
        out.lengths = policy_.inverse_real->predict(inverse_input(x_current, target), h_r_).first;
        out.x_s = target;
        out.branch = 'R';
        break;
      }
      case PolicyKind::kC: {
        run_a(x_current, target, out);
        const Vec4 l_b = policy_.inverse_gpr->predict(inverse_input(x_current, target), h_b_).first;
        const char br = policy_c_branch(cfg_, (x_current - target).norm(), out.lengths, l_b, c_state_);
        if (br == 'B') {
          out.lengths = l_b;
          out.x_s = target;
          out.e_gp = Vec3::Zero();
        }
        out.branch = br;
        break;
      }
    }
    return out;
  }

  // Advances every hidden state with the transition the plant actually made, as in training.
  // The sim-trained model sees it shifted into simulator coordinates by the current e_gp.
  void observe(const Vec3& x_prev, const Vec3& x_next) {
    if (policy_.inverse_sim) {
      h_a_ = policy_.inverse_sim->predict(inverse_input(x_prev + e_gp_, x_next + e_gp_), h_a_).second;
    }
    if (policy_.inverse_gpr) h_b_ = policy_.inverse_gpr->predict(inverse_input(x_prev, x_next), h_b_).second;
    if (policy_.inverse_real) h_r_ = policy_.inverse_real->predict(inverse_input(x_prev, x_next), h_r_).second;
  }

 private:
  void run_a(const Vec3& x_current, const Vec3& target, CommandOut& out) {
    fp_ = policy_a_command(cfg_, *policy_.inverse_sim, *policy_.gpr, x_current, target, e_gp_, h_a_);
    e_gp_ = fp_.e_gp;
    out.lengths = fp_.lengths;
    out.x_s = fp_.x_s_target;
    out.e_gp = fp_.e_gp;
    out.fixed_point = &fp_;
  }

  const PolicyConfig& cfg_;
  const Policy& policy_;
  Eigen::VectorXd h_a_, h_b_, h_r_;
  Vec3 e_gp_ = Vec3::Zero();
  PolicyCState c_state_;
  FixedPointResult fp_;
};

void note_fixed_point(const CommandOut& out, TrialLog& log) {
  if (!out.fixed_point) return;
  const FixedPointResult& fp = *out.fixed_point;
  log.max_fixed_point_iterations = std::max(log.max_fixed_point_iterations, fp.iterations);
  if (!fp.converged) ++log.fixed_point_capouts;
  if (fp.deltas.size() >= 2) {
    ++log.multi_iteration_sequences;
    bool contracting = true;
    for (std::size_t i = 1; i < fp.deltas.size(); ++i) contracting = contracting && fp.deltas[i] < fp.deltas[i - 1];
    if (contracting) ++log.contracting_sequences;
  }
}

TrialRecord make_record(double t, const Vec4& lengths, const Vec3& tip, const Vec3& target, const CommandOut& out) {
  TrialRecord r;
  r.t = t;
  r.lengths = lengths;
  r.tip = tip;
  r.target = target;
  r.x_s_target = out.x_s;
  r.e_gp = out.e_gp;
  r.branch = out.branch;
  return r;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

}  // namespace

std::string to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kA:
      return "A";
    case PolicyKind::kB:
      return "B";
    case PolicyKind::kC:
      return "C";
    case PolicyKind::kReal:
      return "real";
  }
  return "A";
}

PolicyKind policy_kind_from_string(const std::string& text) {
  if (text == "A" || text == "a") return PolicyKind::kA;
  if (text == "B" || text == "b") return PolicyKind::kB;
  if (text == "C" || text == "c") return PolicyKind::kC;
  if (text == "real" || text == "real-baseline") return PolicyKind::kReal;
  throw InvalidInputError("policy must be A, B, C or real");
}

std::string to_string(LoopMode mode) { return mode == LoopMode::kOpenLoop ? "open-loop" : "closed-loop"; }

void PolicyConfig::validate() const {
  if (!(e_c > 0.0) || !(fixed_point_tol > 0.0) || !(waypoint_tol > 0.0) || !(max_step > 0.0))
    throw InvalidInputError("policy tolerances must be positive");
  if (max_fixed_point_iters < 1 || max_control_steps < 1 || open_loop_horizon < 1 || stall_steps < 1)
    throw InvalidInputError("policy iteration limits must be >= 1");
  if (!(control_rate > 0.0)) throw InvalidInputError("policy.control_rate must be positive");
  if (!(range_fraction > 0.0 && range_fraction < 1.0)) throw InvalidInputError("policy.range_fraction out of range");
}

void Policy::validate() const {
  const bool need_a = kind == PolicyKind::kA || kind == PolicyKind::kC;
  const bool need_b = kind == PolicyKind::kB || kind == PolicyKind::kC;
  if (need_a && (!inverse_sim || !gpr)) throw InvalidInputError("policy A needs the simulator inverse model and a GPR");
  if (need_b && !inverse_gpr) throw InvalidInputError("policy B needs the GPR-data inverse model");
  if (kind == PolicyKind::kReal && !inverse_real) throw InvalidInputError("baseline policy needs its inverse model");
  for (const RnnModel* m : {inverse_sim, inverse_gpr, inverse_real}) {
    if (m && m->direction != Direction::kInverse) throw InvalidInputError("policies need inverse-direction models");
  }
}

FixedPointResult policy_a_command(const PolicyConfig& cfg, const RnnModel& inverse_sim, const GprModel& gpr,
                                  const Vec3& x_current, const Vec3& x_target, const Vec3& e_gp_prior,
                                  const Eigen::VectorXd& hidden) {
  FixedPointResult r;
  Vec3 e = e_gp_prior;
  Vec3 x_s = x_target + e;
  for (int it = 1; it <= cfg.max_fixed_point_iters; ++it) {
    const auto [l, h_unused] = inverse_sim.predict(inverse_input(x_current + e, x_s), hidden);
    (void)h_unused;
    const Vec3 e_new = gpr.predict_mean(gpr_input(l, x_s));
    const Vec3 x_s_new = x_target + e_new;
    const double delta = (x_s_new - x_s).norm();
    r.deltas.push_back(delta);
    r.iterations = it;
    e = e_new;
    x_s = x_s_new;
    if (delta <= cfg.fixed_point_tol) {
      r.converged = true;
      break;
    }
  }
  const auto [l, h] = inverse_sim.predict(inverse_input(x_current + e, x_s), hidden);
  r.lengths = l;
  r.hidden = h;
  r.e_gp = e;
  r.x_s_target = x_s;
  return r;
}

char policy_c_branch(const PolicyConfig& cfg, double position_error, const Vec4& l_a, const Vec4& l_b,
                     PolicyCState& state) {
  char want = position_error > cfg.e_c ? 'B' : 'A';
  if (state.locked_to_a) {
    want = 'A';
  } else {
    state.consecutive_switches = want != state.last_branch ? state.consecutive_switches + 1 : 0;
    if (state.consecutive_switches >= cfg.guard_window && (l_a - l_b).cwiseAbs().maxCoeff() < cfg.guard_tol) {
      state.locked_to_a = true;
      want = 'A';
    }
  }
  state.last_branch = want;
  return want;
}

Vec4 limit_command(const PolicyConfig& cfg, const Vec4& raw, const Vec4& previous, double rest_length) {
  Vec4 out;
  const double lo = (1.0 - cfg.range_fraction) * rest_length;
  const double hi = (1.0 + cfg.range_fraction) * rest_length;
  for (int i = 0; i < kNumTendons; ++i) {
    const double target = std::isfinite(raw[i]) ? raw[i] : previous[i];
    double v = std::clamp(target, previous[i] - cfg.max_step, previous[i] + cfg.max_step);
    out[i] = std::clamp(v, lo, hi);
  }
  return out;
}

void write_trial_log_csv(std::ostream& out, const TrialLog& log) {
  out << "t,L1,L2,L3,L4,tip_x,tip_y,tip_z,tgt_x,tgt_y,tgt_z,stx,sty,stz,egx,egy,egz,branch\n";
  for (const auto& r : log.records) {
    out << format_double(r.t);
    for (int i = 0; i < 4; ++i) out << "," << format_double(r.lengths[i]);
    for (const Vec3* v : {&r.tip, &r.target, &r.x_s_target, &r.e_gp})
      for (int i = 0; i < 3; ++i) out << "," << format_double((*v)[i]);
    out << "," << (r.branch == 'R' ? std::string("real") : std::string(1, r.branch)) << "\n";
  }
}

void write_trial_log_csv(const std::string& path, const TrialLog& log) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write trial log: " + path);
  write_trial_log_csv(out, log);
}

TrialLog run_goal(const PolicyConfig& cfg, const Policy& policy, const Vec3& target, TwinPlant& plant, LoopMode mode,
                  std::uint64_t noise_seed) {
  cfg.validate();
  policy.validate();
  const RodParams& params = plant.plant().params();
  const double rest = rest_tendon_length(params);
  const double period = 1.0 / cfg.control_rate;
  TrialLog log;
  Controller ctl(cfg, policy);
  Vec3 obs = plant.reset(noise_seed);
  Vec4 applied = Vec4::Constant(rest);
  double t = 0.0;
  try {
    if (mode == LoopMode::kOpenLoop) {
      const CommandOut out = ctl.command(obs, target);
      note_fixed_point(out, log);
      for (int step = 0; step < cfg.open_loop_horizon; ++step) {
        applied = limit_command(cfg, out.lengths, applied, rest);
        obs = plant.step(TendonCommand::from_lengths(applied, params));
        t += period;
        log.records.push_back(make_record(t, applied, obs, target, out));
        ++log.steps;
      }
      log.converged = true;
    } else {
      Vec3 prev_x_s = Vec3::Constant(std::numeric_limits<double>::quiet_NaN());
      for (int step = 0; step < cfg.max_control_steps; ++step) {
        const CommandOut out = ctl.command(obs, target);
        note_fixed_point(out, log);
        applied = limit_command(cfg, out.lengths, applied, rest);
        const Vec3 prev = obs;
        obs = plant.step(TendonCommand::from_lengths(applied, params));
        ctl.observe(prev, obs);
        t += period;
        log.records.push_back(make_record(t, applied, obs, target, out));
        ++log.steps;
        const double delta = (out.x_s - prev_x_s).norm();
        prev_x_s = out.x_s;
        if (delta <= cfg.fixed_point_tol && plant.plant().tip_velocity().norm() < cfg.settle_speed) {
          log.converged = true;
          break;
        }
      }
    }
  } catch (const Error& e) {
    log.failed = true;
    log.converged = false;
    log.failure = e.what();
  }
  log.final_error = (obs - target).norm();
  return log;
}

GoalStats goal_reaching_eval(const PolicyConfig& cfg, const Policy& policy, const std::vector<Vec3>& targets,
                             const RodParams& nominal, const TwinConfig& twin, LoopMode mode, std::uint64_t seed,
                             bool keep_logs) {
  TwinPlant plant(nominal, twin);
  GoalStats stats;
  std::vector<double> ok;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    TrialLog log = run_goal(cfg, policy, targets[i], plant, mode, derive_seed(seed, "goal" + std::to_string(i)));
    stats.max_fixed_point_iterations = std::max(stats.max_fixed_point_iterations, log.max_fixed_point_iterations);
    stats.fixed_point_capouts += log.fixed_point_capouts;
    stats.contracting_sequences += log.contracting_sequences;
    stats.multi_iteration_sequences += log.multi_iteration_sequences;
    if (log.failed) {
      ++stats.n_fail;
      stats.errors.push_back(std::numeric_limits<double>::quiet_NaN());
    } else {
      stats.errors.push_back(log.final_error);
      ok.push_back(log.final_error);
    }
    if (keep_logs) stats.logs.push_back(std::move(log));
  }
  stats.mean = mean_of(ok);
  stats.std = std_of(ok);
  return stats;
}

GoalStats tip_load_eval(const PolicyConfig& cfg, const Policy& policy, const std::vector<Vec3>& targets,
                        const RodParams& nominal, TwinConfig twin, double tip_mass, std::uint64_t seed) {
  if (!(tip_mass >= 0.0)) throw InvalidInputError("tip mass must be non-negative");
  twin.tip_mass = tip_mass;
  return goal_reaching_eval(cfg, policy, targets, nominal, twin, LoopMode::kClosedLoop, seed);
}

double distance_to_polyline(const Vec3& p, const std::vector<Vec3>& polyline) {
  if (polyline.empty()) throw InvalidInputError("polyline must have at least one point");
  double best = (p - polyline.front()).norm();
  for (std::size_t i = 1; i < polyline.size(); ++i) {
    const Vec3 a = polyline[i - 1], d = polyline[i] - a;
    const double len2 = d.squaredNorm();
    const double s = len2 > 0.0 ? std::clamp((p - a).dot(d) / len2, 0.0, 1.0) : 0.0;
    best = std::min(best, (p - (a + s * d)).norm());
  }
  return best;
}

PathResult path_track(const PolicyConfig& cfg, const Policy& policy, const std::vector<Vec3>& waypoints,
                      TwinPlant& plant, std::uint64_t noise_seed) {
  cfg.validate();
  policy.validate();
  if (waypoints.empty()) throw InvalidInputError("path_track needs at least one waypoint");
  const RodParams& params = plant.plant().params();
  const double rest = rest_tendon_length(params);
  const double period = 1.0 / cfg.control_rate;
  PathResult res;
  Controller ctl(cfg, policy);
  Vec3 obs = plant.reset(noise_seed);
  Vec4 applied = Vec4::Constant(rest);
  const int n = static_cast<int>(waypoints.size());
  int w = 0, last_progress = 0, n_tracking = 0;
  double sq = 0.0;
  for (int step = 1;; ++step) {
    const CommandOut out = ctl.command(obs, waypoints[w]);
    applied = limit_command(cfg, out.lengths, applied, rest);
    const Vec3 prev = obs;
    obs = plant.step(TendonCommand::from_lengths(applied, params));
    ctl.observe(prev, obs);
    res.records.push_back(make_record(step * period, applied, obs, waypoints[w], out));
    const double lat = distance_to_polyline(obs, waypoints);
    res.lateral_error.push_back(lat);
    res.steps = step;
    while (w < n && (obs - waypoints[w]).norm() <= cfg.waypoint_tol) {
      ++w;
      last_progress = step;
    }
    if (w > 0) {
      sq += lat * lat;
      ++n_tracking;
    }
    res.waypoints_reached = w;
    if (w == n) {
      res.completed = true;
      break;
    }
    if (step - last_progress >= cfg.stall_steps) {
      res.stalled = true;
      break;
    }
  }
  res.rms_lateral = n_tracking > 0 ? std::sqrt(sq / n_tracking) : 0.0;
  return res;
}

GprModel fit_subset_gpr(const Dataset& pool, int k, const GprOptions& options, std::uint64_t seed) {
  const Dataset subset = sparse_subset(pool, k, derive_seed(seed, "sweep.subset"));
  const auto [X, Y] = gpr_training_data(subset);
  GprOptions opt = options;
  opt.seed = derive_seed(seed, "sweep.gpr");
  return GprModel::fit(X, Y, {}, opt);
}

RnnModel train_baseline(const Dataset& real, int k, const TrainConfig& train, std::uint64_t seed) {
  TrainConfig tc = train;
  tc.seed = derive_seed(seed, "sweep.real");
  return train_rnn(real.head(static_cast<std::size_t>(k)), Direction::kInverse, tc).model;
}

std::vector<SweepRow> data_efficiency_sweep(const PolicyConfig& cfg, const SweepInputs& in,
                                            const std::vector<Vec3>& targets, const RodParams& nominal,
                                            const TwinConfig& twin, std::uint64_t seed) {
  if (!in.inverse_sim || !in.gpr_pool || !in.real_data) throw InvalidInputError("sweep inputs are incomplete");
  std::vector<SweepRow> rows;
  const std::uint64_t eval_seed = derive_seed(seed, "sweep.eval");
  for (int size : in.sizes_gpr) {
    const int k = std::min<int>(size, static_cast<int>(in.gpr_pool->size()));
    const GprModel gpr = fit_subset_gpr(*in.gpr_pool, k, in.gpr_options, seed);
    Policy p;
    p.kind = PolicyKind::kA;
    p.inverse_sim = in.inverse_sim;
    p.gpr = &gpr;
    const GoalStats s = goal_reaching_eval(cfg, p, targets, nominal, twin, LoopMode::kClosedLoop, eval_seed);
    rows.push_back({"policy_a", k, s.mean, s.std, s.n_fail});
  }
  for (int size : in.sizes_real) {
    const int k = std::min<int>(size, static_cast<int>(in.real_data->size()));
    const RnnModel model = train_baseline(*in.real_data, k, in.train, seed);
    Policy p;
    p.kind = PolicyKind::kReal;
    p.inverse_real = &model;
    const GoalStats s = goal_reaching_eval(cfg, p, targets, nominal, twin, LoopMode::kClosedLoop, eval_seed);
    rows.push_back({"pi_real", k, s.mean, s.std, s.n_fail});
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "curve,size,mean,std,n_fail\n";
  for (const auto& r : rows) {
    out << r.curve << "," << r.size << "," << format_double(r.mean) << "," << format_double(r.std) << ","
        << r.n_fail << "\n";
  }
}

void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write sweep results: " + path);
  write_sweep_csv(out, rows);
}

}  // namespace tdcr
