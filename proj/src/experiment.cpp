#include "tdcr/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "tdcr/calibration.hpp"
#include "tdcr/errors.hpp"
#include "tdcr/random.hpp"
#include "tdcr/rod_io.hpp"

namespace tdcr {

namespace fs = std::filesystem;

std::string to_string(Profile profile) { return profile == Profile::kQuick ? "quick" : "full"; }

Profile profile_from_string(const std::string& text) {
  if (text == "quick") return Profile::kQuick;
  if (text == "full") return Profile::kFull;
  throw InvalidInputError("unknown profile '" + text + "' (expected quick or full)");
}

PipelineSettings PipelineSettings::from_config(const Config& config) {
  PipelineSettings s;
  s.nominal = rod_params_from_config(config);
  s.twin = twin_config_from_config(config);
  s.train = train_config_from_config(config);
  s.gpr = gpr_options_from_config(config);
  s.policy = policy_config_from_config(config);
  s.data = data_settings_from_config(config);
  s.e_c_from_policy_a = config.get_bool("policy.e_c_from_policy_a", s.e_c_from_policy_a);
  s.nominal.validate();
  s.twin.validate();
  s.train.validate();
  s.policy.validate();
  s.data.validate();
  return s;
}

namespace {

std::string fmt(double x, int precision = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << x;
  return os.str();
}

std::string mm(double meters) { return fmt(1e3 * meters, 3) + " mm"; }

std::string sci(double x) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(3) << x;
  return os.str();
}

Dataset checked_rollout(const PlantSpec& plant, const std::vector<TendonCommand>& commands, const std::string& what) {
  RolloutResult r = rollout(plant, commands);
  if (r.failure_index >= 0)
    throw NumericalError(what + " rollout failed at step " + std::to_string(r.failure_index) + ": " + r.failure);
  return std::move(r.data);
}

TrainConfig seeded(const TrainConfig& base, std::uint64_t seed, const char* component) {
  TrainConfig t = base;
  t.seed = derive_seed(seed, component);
  return t;
}

}  // namespace

Pipeline build_pipeline(const PipelineSettings& settings, std::uint64_t seed, const Pipeline* shared) {
  Pipeline p;
  p.seed = seed;
  p.settings = settings;
  const DataSettings& d = settings.data;
  const RodParams& nominal = settings.nominal;
  if (shared) {
    p.sim_data = shared->sim_data;
    p.real_data = shared->real_data;
    p.gpr_pool = shared->gpr_pool;
    p.eval_grid = shared->eval_grid;
    p.inverse_sim = shared->inverse_sim;
    p.forward_sim = shared->forward_sim;
    p.inverse_sim_fit = shared->inverse_sim_fit;
    p.forward_sim_fit = shared->forward_sim_fit;
  } else {
    p.sim_data = checked_rollout(
        {nominal, std::nullopt, 0},
        random_exploration(d.sim_steps, derive_seed(seed, "sim.explore"), nominal, d.exploration), "simulator");
    p.real_data = checked_rollout(
        {nominal, settings.twin, derive_seed(seed, "real.noise")},
        random_exploration(d.real_steps, derive_seed(seed, "real.explore"), nominal, d.exploration), "twin");
    p.gpr_pool = static_lattice_dataset(
        {nominal, settings.twin, derive_seed(seed, "pool.noise")},
        tension_lattice(d.pool_directions, d.pool_magnitudes, d.lattice_max_tension, false));
    p.eval_grid = static_lattice_dataset(
        {nominal, settings.twin, derive_seed(seed, "eval.noise")},
        tension_lattice(d.eval_directions, d.eval_magnitudes, d.lattice_max_tension, true));
    p.inverse_sim_fit = train_rnn(p.sim_data, Direction::kInverse, seeded(settings.train, seed, "train.inverse_sim"));
    p.forward_sim_fit = train_rnn(p.sim_data, Direction::kForward, seeded(settings.train, seed, "train.forward_sim"));
    p.inverse_sim = p.inverse_sim_fit.model;
    p.forward_sim = p.forward_sim_fit.model;
  }
  if (p.gpr_pool.size() < 2 || p.eval_grid.empty()) throw NumericalError("static lattice produced too few points");

  p.gpr = fit_subset_gpr(p.gpr_pool, std::min<int>(d.gpr_headline_size, static_cast<int>(p.gpr_pool.size())),
                         settings.gpr, seed);
  p.b_data = generate_policy_b_dataset(p.sim_data, p.gpr);
  p.inverse_b = train_rnn(p.b_data, Direction::kInverse, seeded(settings.train, seed, "train.inverse_b")).model;
  const int n_real = static_cast<int>(p.real_data.size());
  p.inverse_real_small = train_baseline(p.real_data, std::min(2000, n_real), settings.train, seed);
  p.inverse_real = train_baseline(p.real_data, n_real, settings.train, seed);
  p.targets = goal_targets(p.eval_grid, d.n_targets, derive_seed(seed, "targets"));
  p.path = ring_path(p.eval_grid, d);
  return p;
}

std::vector<Vec3> goal_targets(const Dataset& eval_grid, int n, std::uint64_t seed) {
  if (n < 1 || static_cast<std::size_t>(n) > eval_grid.size())
    throw InvalidInputError("cannot draw " + std::to_string(n) + " targets from " +
                            std::to_string(eval_grid.size()) + " eval points");
  std::vector<std::size_t> idx(eval_grid.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  // Partial Fisher-Yates with the library RNG keeps the draw platform independent.
  for (int i = 0; i < n; ++i) {
    const std::size_t j = i + uniform_index(rng, idx.size() - i);
    std::swap(idx[i], idx[j]);
  }
  std::vector<Vec3> out;
  for (int i = 0; i < n; ++i) out.push_back(eval_grid.samples[idx[i]].x_next);
  return out;
}

std::vector<Vec3> ring_path(const Dataset& eval_grid, const DataSettings& data, int n) {
  if (n < 2 || n > data.eval_directions) throw InvalidInputError("path needs 2..eval_directions waypoints");
  const int m = data.eval_magnitudes / 2;
  std::vector<const Sample*> by_dir(data.eval_directions, nullptr);
  for (const Sample& s : eval_grid.samples)
    if (s.step % data.eval_magnitudes == m) by_dir[s.step / data.eval_magnitudes] = &s;
  std::vector<Vec3> out;
  for (int d = 0; d < n; ++d) {
    if (!by_dir[d]) throw NumericalError("eval grid is missing path direction " + std::to_string(d));
    out.push_back(by_dir[d]->x_next);
  }
  return out;
}

GoalTable evaluate_goal_table(const Pipeline& pl, double tip_mass) {
  const PipelineSettings& s = pl.settings;
  const std::uint64_t es = derive_seed(pl.seed, "sweep.eval");
  PolicyConfig cfg = s.policy;
  Policy a{PolicyKind::kA, &pl.inverse_sim, nullptr, nullptr, &pl.gpr};
  Policy b{PolicyKind::kB, nullptr, &pl.inverse_b, nullptr, nullptr};
  Policy c{PolicyKind::kC, &pl.inverse_sim, &pl.inverse_b, nullptr, &pl.gpr};
  Policy r{PolicyKind::kReal, nullptr, nullptr, &pl.inverse_real, nullptr};
  auto goal = [&](const PolicyConfig& pc, const Policy& p, LoopMode mode) {
    return goal_reaching_eval(pc, p, pl.targets, s.nominal, s.twin, mode, es);
  };
  auto load = [&](const PolicyConfig& pc, const Policy& p) {
    return tip_load_eval(pc, p, pl.targets, s.nominal, s.twin, tip_mass, es);
  };
  GoalTable t;
  t.a_closed = goal(cfg, a, LoopMode::kClosedLoop);
  PolicyConfig cfg_c = cfg;
  if (s.e_c_from_policy_a) cfg_c.e_c = t.a_closed.mean;
  t.e_c = cfg_c.e_c;
  t.b_closed = goal(cfg, b, LoopMode::kClosedLoop);
  t.c_closed = goal(cfg_c, c, LoopMode::kClosedLoop);
  t.real_closed = goal(cfg, r, LoopMode::kClosedLoop);
  t.a_open = goal(cfg, a, LoopMode::kOpenLoop);
  t.b_open = goal(cfg, b, LoopMode::kOpenLoop);
  t.real_open = goal(cfg, r, LoopMode::kOpenLoop);
  t.a_load = load(cfg, a);
  t.b_load = load(cfg, b);
  t.c_load = load(cfg_c, c);
  t.real_load = load(cfg, r);
  return t;
}

CriterionResult check_compression_law(std::uint64_t seed) {
  CriterionResult res{1, "spine compression law", true, ""};
  const RodParams params;
  const double c = 2.0e-4, sat = 20.0;
  Rng rng(derive_seed(seed, "criterion.compression"));
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double n = uniform(rng, 0.0, 40.0);
    const double expected = c * std::min(n, sat);
    const double got = spine_compression(n, params.c_spine, params.compression_saturation_force);
    const double rel = expected > 0.0 ? std::abs(got - expected) / expected : std::abs(got);
    worst = std::max(worst, rel);
  }
  bool plateau = true;
  for (double n : {20.0, 20.5, 50.0, 1e3, 1e6})
    plateau = plateau && spine_compression(n, params.c_spine, params.compression_saturation_force) == c * sat;
  res.pass = worst <= 1e-15 && plateau && params.c_spine == c && params.compression_saturation_force == sat;
  res.detail = "max relative error " + sci(worst) + " over 1000 forces in [0, 40] N, plateau " +
               (plateau ? "flat" : "not flat") + " above 20 N";
  return res;
}

CriterionResult check_static_solver(const RodParams& params, std::uint64_t seed, int n_commands) {
  CriterionResult res{2, "static shooting solver", false, ""};
  Rng rng(derive_seed(seed, "criterion.static"));
  int converged = 0, attempted = 0;
  std::vector<TendonCommand> commands;
  while (attempted < n_commands) {
    const int k = static_cast<int>(uniform_index(rng, kNumTendons));
    const double t = uniform(rng, 0.1, 2.0);
    const double alpha = uniform(rng, 0.05, 0.5 * M_PI - 0.05);
    Vec4 tau = Vec4::Zero();
    tau[k] = t * std::cos(alpha);
    tau[(k + 1) % kNumTendons] = t * std::sin(alpha);
    TendonCommand cmd;
    try {
      const ShootingResult tr = shoot_static_tensions(params, tau);
      if (!tr.converged) continue;
      cmd = TendonCommand::with_pair(tendon_path_lengths(tr.state, params), k, (k + 1) % kNumTendons);
    } catch (const Error&) {
      continue;  // no equilibrium to build a command from
    }
    ++attempted;
    try {
      const ShootingResult r = shoot_static(params, cmd);
      if (r.converged && r.residual_norm <= 1e-6) ++converged;
    } catch (const Error&) {
    }
    if (commands.size() < 20) commands.push_back(cmd);
  }
  const double rate = static_cast<double>(converged) / attempted;

  // Mirror symmetry about the gravity plane: swapping tendons 2 and 4 flips y.
  double mirror = 0.0;
  for (const TendonCommand& cmd : commands) {
    TendonCommand m = cmd;
    std::swap(m.lengths[1], m.lengths[3]);
    std::swap(m.actuated[1], m.actuated[3]);
    const Vec3 p = shoot_static(params, cmd).state.tip();
    const Vec3 q = shoot_static(params, m).state.tip();
    mirror = std::max(mirror, (q - Vec3(p.x(), -p.y(), p.z())).norm());
  }
  // Gravity-free invariants: straight rest, symmetric opposing pulls and uniform shortening stay on the axis.
  RodParams no_g = params;
  no_g.gravity.setZero();
  const Vec3 straight = shoot_static(no_g, TendonCommand::rest(no_g)).state.tip();
  const double straight_err = (straight - Vec3(0.0, 0.0, no_g.total_length)).norm();
  double axis_err = 0.0;
  bool shortened = true;
  for (int k : {0, 1}) {
    Vec4 tau = Vec4::Zero();
    tau[k] = tau[k + 2] = 1.0;
    const Vec4 lengths = tendon_path_lengths(shoot_static_tensions(no_g, tau).state, no_g);
    const Vec3 tip = shoot_static(no_g, TendonCommand::with_pair(lengths, k, k + 2)).state.tip();
    axis_err = std::max(axis_err, tip.head<2>().norm());
    shortened = shortened && tip.z() < no_g.total_length;
  }
  TendonCommand uniform;
  uniform.lengths = Vec4::Constant(rest_tendon_length(no_g) - 5e-4);
  uniform.actuated = {true, true, true, true};
  const Vec3 squeezed = shoot_static(no_g, uniform).state.tip();
  axis_err = std::max(axis_err, squeezed.head<2>().norm());
  shortened = shortened && squeezed.z() < no_g.total_length;

  res.pass = rate >= 0.99 && mirror <= 1e-6 && straight_err <= 1e-6 && axis_err <= 1e-6 && shortened;
  res.detail = "converged " + std::to_string(converged) + "/" + std::to_string(attempted) + ", mirror error " +
               sci(mirror) + " m, straight-rod error " + sci(straight_err) + " m, off-axis " + sci(axis_err) +
               " m under symmetric pulls" + (shortened ? "" : ", symmetric pulls did not shorten the rod");
  return res;
}

CriterionResult check_calibration(const RodParams& nominal, const TwinConfig& twin, std::uint64_t seed) {
  CriterionResult res{3, "Young's modulus calibration", false, ""};
  const std::vector<double> loads{0.0, 0.01};

  RodParams planted = nominal;
  planted.youngs_modulus = 1.9e9;
  CalibrationProblem self;
  self.observations = synthesize_observations(planted, calibration_commands(planted), loads, 0.0,
                                              derive_seed(seed, "criterion.calibration.self"));
  const double e_self = calibrate_youngs_modulus(self, nominal).youngs_modulus;
  const double err_self = std::abs(e_self - planted.youngs_modulus) / planted.youngs_modulus;

  const RodParams real = twin_params(nominal, twin);
  TwinConfig known = twin;
  known.e_scale = 1.0;
  CalibrationProblem noisy;
  noisy.observations = synthesize_observations(real, calibration_commands(real), loads, twin.sensor_noise_sigma,
                                               derive_seed(seed, "criterion.calibration.twin"));
  const double e_twin = calibrate_youngs_modulus(noisy, twin_params(nominal, known)).youngs_modulus;
  const double err_twin = std::abs(e_twin - real.youngs_modulus) / real.youngs_modulus;

  res.pass = err_self <= 0.01 && err_twin <= 0.05;
  res.detail = "self " + sci(e_self) + " Pa (error " + fmt(100 * err_self, 3) + "%), twin " + sci(e_twin) +
               " Pa vs " + sci(real.youngs_modulus) + " (error " + fmt(100 * err_twin, 3) + "%)";
  return res;
}

CriterionResult check_rnn(const Pipeline& pl) {
  CriterionResult res{4, "recurrent models", false, ""};
  const double inv = pl.inverse_sim_fit.best_val_mae;
  const double fwd = pl.forward_sim_fit.best_val_mae;
  const Dataset probe = pl.sim_data.head(64);
  double g_inv = 0.0, g_fwd = 0.0;
  {
    const auto [X, Y] = make_sequences(probe, Direction::kInverse);
    g_inv = gradient_check(pl.inverse_sim, X, Y);
  }
  {
    const auto [X, Y] = make_sequences(probe, Direction::kForward);
    g_fwd = gradient_check(pl.forward_sim, X, Y);
  }
  res.pass = inv <= 0.003 && fwd <= 0.003 && g_inv <= 1e-4 && g_fwd <= 1e-4;
  res.detail = "val MAE inverse " + mm(inv) + ", forward " + mm(fwd) + "; gradient check " + sci(g_inv) + ", " +
               sci(g_fwd);
  return res;
}

CriterionResult check_gpr(const Pipeline& pl, int folds) {
  CriterionResult res{5, "Gaussian process gap model", false, ""};
  const PipelineSettings& s = pl.settings;
  const Dataset cv_set = sparse_subset(pl.gpr_pool, std::min<int>(s.data.gpr_size, static_cast<int>(pl.gpr_pool.size())),
                                       derive_seed(pl.seed, "criterion.gpr.subset"));
  const auto [X, Y] = gpr_training_data(cv_set);
  GprOptions opt = s.gpr;
  opt.seed = derive_seed(pl.seed, "criterion.gpr.cv");
  const CvResult cv = cross_validate(X, Y, folds, opt);

  // Noiseless limit: the headline kernel with noise variance 1e-12.
  const GprModel& g = pl.gpr;
  std::vector<GprHyper> hyper;
  for (int a = 0; a < 3; ++a) {
    GprHyper h = g.hyper(a);
    h.noise_variance = 1e-12;
    hyper.push_back(h);
  }
  GprOptions exact = g.options();
  exact.jitter = 0.0;
  const GprModel interp = GprModel::fit(g.X(), g.Y(), hyper, exact);
  double interp_err = 0.0;
  for (int i = 0; i < g.size(); ++i)
    interp_err = std::max(interp_err, (interp.predict_mean(g.X().row(i).transpose()) - g.Y().row(i).transpose())
                                          .cwiseAbs()
                                          .maxCoeff());

  bool var_ok = true;
  double worst_ratio = 0.0;
  for (int i = 0; i < g.size(); ++i) {
    const Vec3 v = g.predict_variance(g.X().row(i).transpose());
    for (int a = 0; a < 3; ++a) {
      const double noise = g.hyper(a).noise_variance;
      if (v[a] < 0.0 || v[a] > noise * (1.0 + 1e-6)) var_ok = false;
      worst_ratio = std::max(worst_ratio, v[a] / noise);
    }
  }
  for (const Sample& smp : pl.eval_grid.samples) {
    const Vec3 v = g.predict_variance(gpr_input(smp.lengths, smp.p_sim));
    for (int a = 0; a < 3; ++a)
      if (v[a] < 0.0 || v[a] > g.hyper(a).signal_variance * (1.0 + 1e-12)) var_ok = false;
  }
  res.pass = cv.mae <= 0.003 && interp_err <= 1e-9 && var_ok;
  res.detail = std::to_string(folds) + "-fold CV MAE " + mm(cv.mae) + " on " + std::to_string(cv_set.size()) +
               " points; noiseless interpolation " + sci(interp_err) + " m; variance bounds " +
               (var_ok ? "hold" : "violated") + " (train var/noise <= " + fmt(worst_ratio, 6) + ")";
  return res;
}

CriterionResult check_data_efficiency(const std::vector<SweepRow>& rows) {
  CriterionResult res{6, "data efficiency", false, ""};
  auto find = [&](const std::string& curve, int size) -> const SweepRow* {
    for (const SweepRow& r : rows)
      if (r.curve == curve && r.size == size) return &r;
    return nullptr;
  };
  const SweepRow* a = find("policy_a", 100);
  const SweepRow* r2 = find("pi_real", 2000);
  const SweepRow* r10 = find("pi_real", 10000);
  if (!a || !r2 || !r10) {
    res.detail = "sweep lacks policy_a@100, pi_real@2000 or pi_real@10000";
    return res;
  }
  res.pass = a->n_fail == 0 && a->mean <= r2->mean && a->mean <= 1.2 * r10->mean;
  res.detail = "policy A @100 " + mm(a->mean) + ", pi_real @2000 " + mm(r2->mean) + ", 1.2 x pi_real @10000 " +
               mm(1.2 * r10->mean);
  return res;
}

namespace {

struct Ordering {
  const char* name;
  bool (*holds)(const GoalTable&);
};

const Ordering kOrderings[] = {
    {"A closed < open", [](const GoalTable& t) { return t.a_closed.mean < t.a_open.mean; }},
    {"B closed < open", [](const GoalTable& t) { return t.b_closed.mean < t.b_open.mean; }},
    {"pi_real closed < open", [](const GoalTable& t) { return t.real_closed.mean < t.real_open.mean; }},
    {"C mean <= A mean", [](const GoalTable& t) { return t.c_closed.mean <= t.a_closed.mean; }},
    {"C std <= A std", [](const GoalTable& t) { return t.c_closed.std <= t.a_closed.std; }},
    {"A load <= pi_real load", [](const GoalTable& t) { return t.a_load.mean <= t.real_load.mean; }},
    {"B load <= pi_real load", [](const GoalTable& t) { return t.b_load.mean <= t.real_load.mean; }},
    {"C load <= pi_real load", [](const GoalTable& t) { return t.c_load.mean <= t.real_load.mean; }},
};

}  // namespace

CriterionResult check_orderings(const GoalTable& reference, const std::vector<GoalTable>& replicates) {
  CriterionResult res{7, "goal-reaching orderings", true, ""};
  const int need = std::max<int>(0, static_cast<int>(replicates.size()) - 1);
  std::ostringstream os;
  bool first = true;
  for (const Ordering& o : kOrderings) {
    const bool ref = o.holds(reference);
    const int n = static_cast<int>(std::count_if(replicates.begin(), replicates.end(), o.holds));
    const bool ok = ref && n >= need;
    res.pass = res.pass && ok;
    os << (first ? "" : "; ") << o.name << ": ref " << (ref ? "yes" : "no") << ", " << n << "/"
       << replicates.size() << (ok ? "" : " FAIL");
    first = false;
  }
  res.detail = os.str();
  return res;
}

CriterionResult check_fixed_point(const std::vector<const GoalTable*>& tables) {
  CriterionResult res{8, "fixed-point iteration", false, ""};
  int max_iter = 0, capouts = 0, multi = 0, contracting = 0;
  for (const GoalTable* t : tables) {
    for (const GoalStats* s : {&t->a_open, &t->a_closed, &t->c_closed, &t->a_load, &t->c_load}) {
      max_iter = std::max(max_iter, s->max_fixed_point_iterations);
      capouts += s->fixed_point_capouts;
      multi += s->multi_iteration_sequences;
      contracting += s->contracting_sequences;
    }
  }
  res.pass = capouts == 0 && max_iter <= 20;
  res.detail = "max iterations " + std::to_string(max_iter) + ", cap-outs " + std::to_string(capouts) +
               ", contracting " + std::to_string(contracting) + "/" + std::to_string(multi) +
               " multi-iteration sequences";
  return res;
}

PathTable evaluate_path_table(const Pipeline& pl, double e_c) {
  const PipelineSettings& s = pl.settings;
  PolicyConfig cfg = s.policy;
  PolicyConfig cfg_c = cfg;
  cfg_c.e_c = e_c;
  Policy a{PolicyKind::kA, &pl.inverse_sim, nullptr, nullptr, &pl.gpr};
  Policy b{PolicyKind::kB, nullptr, &pl.inverse_b, nullptr, nullptr};
  Policy c{PolicyKind::kC, &pl.inverse_sim, &pl.inverse_b, nullptr, &pl.gpr};
  const std::uint64_t seed = derive_seed(pl.seed, "path");
  TwinPlant plant(s.nominal, s.twin);
  PathTable t;
  t.a = path_track(cfg, a, pl.path, plant, seed);
  t.b = path_track(cfg, b, pl.path, plant, seed);
  t.c = path_track(cfg_c, c, pl.path, plant, seed);
  return t;
}

CriterionResult check_path_tracking(const PathTable& p) {
  CriterionResult res{9, "path tracking", false, ""};
  res.pass = p.a.completed && p.b.completed && p.c.completed && p.c.rms_lateral <= 0.005 &&
             p.c.steps >= p.a.steps && p.c.steps >= p.b.steps;
  auto one = [](const char* name, const PathResult& r) {
    return std::string(name) + (r.completed ? " completed" : " incomplete") + " in " + std::to_string(r.steps) +
           " steps, RMS " + mm(r.rms_lateral);
  };
  res.detail = one("A", p.a) + "; " + one("B", p.b) + "; " + one("C", p.c);
  return res;
}

bool ReproduceResult::all_pass() const {
  return std::all_of(criteria.begin(), criteria.end(), [](const CriterionResult& c) { return c.pass; });
}

namespace {

class Timer {
 public:
  explicit Timer(std::ostream& out) : out_(out), t0_(std::chrono::steady_clock::now()) {}
  void lap(const std::string& stage) {
    const auto t = std::chrono::steady_clock::now();
    out_ << stage << " " << fmt(std::chrono::duration<double>(t - t0_).count(), 2) << " s\n";
    out_.flush();
    t0_ = t;
  }

 private:
  std::ostream& out_;
  std::chrono::steady_clock::time_point t0_;
};

void write_goal_row(std::ostream& os, const std::string& run, const char* policy, const char* mode,
                    const GoalStats& s) {
  os << run << ',' << policy << ',' << mode << ',' << format_double(s.mean) << ',' << format_double(s.std) << ','
     << s.n_fail << ',' << s.max_fixed_point_iterations << ',' << s.fixed_point_capouts << '\n';
}

void write_goal_rows(std::ostream& os, const std::string& run, const GoalTable& t) {
  write_goal_row(os, run, "A", "open", t.a_open);
  write_goal_row(os, run, "B", "open", t.b_open);
  write_goal_row(os, run, "pi_real", "open", t.real_open);
  write_goal_row(os, run, "A", "closed", t.a_closed);
  write_goal_row(os, run, "B", "closed", t.b_closed);
  write_goal_row(os, run, "C", "closed", t.c_closed);
  write_goal_row(os, run, "pi_real", "closed", t.real_closed);
  write_goal_row(os, run, "A", "load", t.a_load);
  write_goal_row(os, run, "B", "load", t.b_load);
  write_goal_row(os, run, "C", "load", t.c_load);
  write_goal_row(os, run, "pi_real", "load", t.real_load);
}

std::string table_text(const GoalTable& t) {
  std::ostringstream os;
  auto cell = [](const GoalStats& s) { return fmt(1e3 * s.mean, 3) + " +- " + fmt(1e3 * s.std, 3); };
  os << "  open    A " << cell(t.a_open) << ", B " << cell(t.b_open) << ", pi_real " << cell(t.real_open) << "\n";
  os << "  closed  A " << cell(t.a_closed) << ", B " << cell(t.b_closed) << ", C " << cell(t.c_closed)
     << ", pi_real " << cell(t.real_closed) << "\n";
  os << "  load    A " << cell(t.a_load) << ", B " << cell(t.b_load) << ", C " << cell(t.c_load) << ", pi_real "
     << cell(t.real_load) << "\n";
  os << "  e_c " << mm(t.e_c) << "\n";
  return os.str();
}

void write_path_csv(const std::string& path, const PathResult& r) {
  TrialLog log;
  log.records = r.records;
  write_trial_log_csv(path, log);
}

}  // namespace

ReproduceResult reproduce_all(const ReproduceOptions& options) {
  if (options.n_replicates < 1) throw InvalidInputError("reproduce needs at least one replicate");
  fs::create_directories(options.out_dir);
  const fs::path out(options.out_dir);
  ReproduceResult result;
  auto artifact = [&](const std::string& name) {
    const std::string p = (out / name).string();
    result.artifacts.push_back(p);
    return p;
  };
  std::ofstream timings(artifact("timings.txt"));
  if (!timings) throw IoError("cannot write " + (out / "timings.txt").string());
  Timer timer(timings);

  const PipelineSettings settings = PipelineSettings::from_config(options.config);
  const std::uint64_t seed = options.seed;
  effective_config(options.config).write(artifact("effective_config.ini"));

  result.criteria.push_back(check_compression_law(seed));
  timer.lap("criterion1");
  result.criteria.push_back(check_static_solver(settings.nominal, seed));
  timer.lap("criterion2");
  result.criteria.push_back(check_calibration(settings.nominal, settings.twin, seed));
  timer.lap("criterion3");

  const Pipeline ref = build_pipeline(settings, seed);
  timer.lap("pipeline");
  write_dataset_csv(artifact("sim_data.csv"), ref.sim_data);
  write_dataset_csv(artifact("real_data.csv"), ref.real_data);
  write_dataset_csv(artifact("gpr_pool.csv"), ref.gpr_pool);
  write_dataset_csv(artifact("eval_grid.csv"), ref.eval_grid);
  ref.inverse_sim.save(artifact("inverse_sim.json"));
  ref.forward_sim.save(artifact("forward_sim.json"));
  ref.inverse_b.save(artifact("inverse_b.json"));
  ref.inverse_real.save(artifact("inverse_real.json"));
  ref.gpr.save(artifact("gpr.json"));

  result.criteria.push_back(check_rnn(ref));
  timer.lap("criterion4");
  result.criteria.push_back(check_gpr(ref));
  timer.lap("criterion5");

  SweepInputs sweep_in;
  sweep_in.inverse_sim = &ref.inverse_sim;
  sweep_in.gpr_pool = &ref.gpr_pool;
  sweep_in.real_data = &ref.real_data;
  sweep_in.train = settings.train;
  sweep_in.gpr_options = settings.gpr;
  const std::vector<SweepRow> sweep =
      data_efficiency_sweep(settings.policy, sweep_in, ref.targets, settings.nominal, settings.twin, seed);
  write_sweep_csv(artifact("sweep.csv"), sweep);
  result.criteria.push_back(check_data_efficiency(sweep));
  timer.lap("criterion6");

  const GoalTable ref_table = evaluate_goal_table(ref);
  timer.lap("goal_table.reference");
  std::vector<GoalTable> rep_tables;
  for (int i = 0; i < options.n_replicates; ++i) {
    const std::uint64_t rs = derive_seed(seed, "replicate." + std::to_string(i + 1));
    const Pipeline rep = build_pipeline(settings, rs, options.profile == Profile::kQuick ? &ref : nullptr);
    rep_tables.push_back(evaluate_goal_table(rep));
    timer.lap("goal_table.replicate" + std::to_string(i + 1));
  }
  {
    std::ofstream gt(artifact("goal_table.csv"));
    gt << "run,policy,mode,mean,std,n_fail,max_fp_iters,fp_capouts\n";
    write_goal_rows(gt, "reference", ref_table);
    for (std::size_t i = 0; i < rep_tables.size(); ++i)
      write_goal_rows(gt, "replicate" + std::to_string(i + 1), rep_tables[i]);
  }
  result.criteria.push_back(check_orderings(ref_table, rep_tables));
  std::vector<const GoalTable*> all{&ref_table};
  for (const GoalTable& t : rep_tables) all.push_back(&t);
  result.criteria.push_back(check_fixed_point(all));

  const PathTable paths = evaluate_path_table(ref, ref_table.e_c);
  write_path_csv(artifact("path_a.csv"), paths.a);
  write_path_csv(artifact("path_b.csv"), paths.b);
  write_path_csv(artifact("path_c.csv"), paths.c);
  result.criteria.push_back(check_path_tracking(paths));
  timer.lap("criterion9");

  std::ostringstream rep;
  rep << "tdcr reproduce report\n";
  rep << "profile " << to_string(options.profile) << ", seed " << seed << ", replicates " << options.n_replicates
      << "\n\n";
  for (const CriterionResult& c : result.criteria)
    rep << "criterion " << c.id << " (" << c.name << "): " << (c.pass ? "PASS" : "FAIL") << " | " << c.detail << "\n";
  rep << "\ngoal-reaching errors in mm, mean +- std over " << ref.targets.size() << " targets\n";
  rep << "reference\n" << table_text(ref_table);
  for (std::size_t i = 0; i < rep_tables.size(); ++i)
    rep << "replicate " << i + 1 << "\n" << table_text(rep_tables[i]);
  rep << "\ndata-efficiency sweep (mm)\n";
  for (const SweepRow& r : sweep)
    rep << "  " << r.curve << " " << r.size << ": " << fmt(1e3 * r.mean, 3) << " +- " << fmt(1e3 * r.std, 3)
        << ", failed " << r.n_fail << "\n";
  const int n_pass = static_cast<int>(std::count_if(result.criteria.begin(), result.criteria.end(),
                                                    [](const CriterionResult& c) { return c.pass; }));
  rep << "\nsummary: " << n_pass << "/" << result.criteria.size() << " criteria pass\n";
  result.report = rep.str();
  result.report_path = artifact("report.txt");
  std::ofstream rf(result.report_path);
  rf << result.report;
  if (!rf) throw IoError("cannot write " + result.report_path);
  return result;
}

}  // namespace tdcr
