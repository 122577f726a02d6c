#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <boost/algorithm/string.hpp>

#include "tdcr/calibration.hpp"
#include "tdcr/config.hpp"
#include "tdcr/control.hpp"
#include "tdcr/data_gen.hpp"
#include "tdcr/errors.hpp"
#include "tdcr/experiment.hpp"
#include "tdcr/manifest.hpp"
#include "tdcr/rod_io.hpp"
#include "tdcr/settings.hpp"

namespace fs = std::filesystem;
using namespace tdcr;

namespace {

constexpr int kOk = 0;
constexpr int kDomainError = 1;
constexpr int kUsageError = 2;

// Flags every subcommand accepts.
struct Common {
  std::uint64_t seed = 1;
  std::string config_path;
  std::string out;
  std::vector<std::string> overrides;
};

// State shared by the handler of one run.
struct Run {
  std::string name;
  Common common;
  Config config;
  Manifest manifest;
  std::vector<std::string> argv;

  std::string out_path(const std::string& file) {
    fs::create_directories(common.out);
    const std::string p = (fs::path(common.out) / file).string();
    outputs.push_back(p);
    return p;
  }
  // Throws IoError naming the path when an input file is missing.
  std::string input(const std::string& path) {
    if (!fs::is_regular_file(path)) throw IoError("input file not found: " + path);
    inputs.push_back(path);
    return path;
  }
  std::vector<std::string> inputs, outputs;
};

std::vector<double> parse_numbers(const std::string& text, std::size_t n, const std::string& what) {
  std::vector<std::string> parts;
  boost::algorithm::split(parts, text, boost::is_any_of(","));
  if (parts.size() != n)
    throw InvalidInputError(what + ": expected " + std::to_string(n) + " comma-separated values, got '" + text + "'");
  std::vector<double> out;
  for (const std::string& p : parts) {
    const std::string t = boost::algorithm::trim_copy(p);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(t, &used);
    } catch (const std::exception&) {
    }
    if (t.empty() || used != t.size()) throw InvalidInputError(what + ": '" + p + "' is not a number");
    out.push_back(v);
  }
  return out;
}

Vec3 parse_vec3(const std::string& text, const std::string& what) {
  const std::vector<double> v = parse_numbers(text, 3, what);
  return Vec3(v[0], v[1], v[2]);
}

Vec4 parse_vec4(const std::string& text, const std::string& what) {
  const std::vector<double> v = parse_numbers(text, 4, what);
  return Vec4(v[0], v[1], v[2], v[3]);
}

std::vector<int> parse_sizes(const std::string& text) {
  std::vector<std::string> parts;
  boost::algorithm::split(parts, text, boost::is_any_of(","));
  std::vector<int> out;
  for (const std::string& p : parts) {
    try {
      out.push_back(std::stoi(p));
    } catch (const std::exception&) {
      throw InvalidInputError("sizes: '" + p + "' is not an integer");
    }
  }
  return out;
}

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(9) << x;
  return os.str();
}

// Model files a policy may need; which are required depends on the policy kind.
struct ModelPaths {
  std::string inverse_sim, inverse_b, inverse_real, gpr;
};

struct LoadedPolicy {
  Policy policy;
  std::unique_ptr<RnnModel> inverse_sim, inverse_b, inverse_real;
  std::unique_ptr<GprModel> gpr;
};

void add_model_options(CLI::App* app, ModelPaths& m) {
  app->add_option("--inverse-sim", m.inverse_sim, "Inverse RNN trained on simulator data (A, C)");
  app->add_option("--inverse-b", m.inverse_b, "Inverse RNN trained on GPR-shifted data (B, C)");
  app->add_option("--inverse-real", m.inverse_real, "Inverse RNN trained on plant data (real)");
  app->add_option("--gpr", m.gpr, "GPR gap model JSON (A, C)");
}

LoadedPolicy load_policy(Run& run, PolicyKind kind, const ModelPaths& m) {
  LoadedPolicy lp;
  lp.policy.kind = kind;
  auto need = [&](const std::string& path, const char* flag) {
    if (path.empty()) throw CLI::RequiredError(std::string(flag) + " (needed by policy " + to_string(kind) + ")");
    return run.input(path);
  };
  if (kind == PolicyKind::kA || kind == PolicyKind::kC) {
    lp.inverse_sim = std::make_unique<RnnModel>(RnnModel::load(need(m.inverse_sim, "--inverse-sim")));
    lp.gpr = std::make_unique<GprModel>(GprModel::load(need(m.gpr, "--gpr")));
    lp.policy.inverse_sim = lp.inverse_sim.get();
    lp.policy.gpr = lp.gpr.get();
  }
  if (kind == PolicyKind::kB || kind == PolicyKind::kC) {
    lp.inverse_b = std::make_unique<RnnModel>(RnnModel::load(need(m.inverse_b, "--inverse-b")));
    lp.policy.inverse_gpr = lp.inverse_b.get();
  }
  if (kind == PolicyKind::kReal) {
    lp.inverse_real = std::make_unique<RnnModel>(RnnModel::load(need(m.inverse_real, "--inverse-real")));
    lp.policy.inverse_real = lp.inverse_real.get();
  }
  lp.policy.validate();
  return lp;
}

LoopMode loop_mode_from_string(const std::string& text) {
  if (text == "open") return LoopMode::kOpenLoop;
  if (text == "closed") return LoopMode::kClosedLoop;
  throw InvalidInputError("unknown mode '" + text + "' (expected open or closed)");
}

void write_goal_csv(const std::string& path, const std::vector<Vec3>& targets, const GoalStats& s) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "target,tgt_x,tgt_y,tgt_z,error\n";
  for (std::size_t i = 0; i < targets.size(); ++i)
    out << i << ',' << format_double(targets[i].x()) << ',' << format_double(targets[i].y()) << ','
        << format_double(targets[i].z()) << ',' << format_double(s.errors[i]) << '\n';
}

void print_stats(const GoalStats& s) {
  std::cout << "mean_error " << fmt(s.mean) << " m\nstd_error " << fmt(s.std) << " m\nfailed " << s.n_fail
            << "\nmax_fixed_point_iterations " << s.max_fixed_point_iterations << "\nfixed_point_capouts "
            << s.fixed_point_capouts << "\n";
}

using Handler = std::function<void(Run&)>;

struct Subcommand {
  CLI::App* app;
  Common common;
  Handler handler;
};

Subcommand& add_subcommand(CLI::App& root, std::vector<std::unique_ptr<Subcommand>>& subs, const std::string& name,
                           const std::string& description) {
  auto sub = std::make_unique<Subcommand>();
  sub->app = root.add_subcommand(name, description);
  sub->common.out = name + "_out";
  sub->app->add_option("--seed", sub->common.seed, "Root random seed")->capture_default_str();
  sub->app->add_option("--config", sub->common.config_path, "INI configuration file");
  sub->app->add_option("--out", sub->common.out, "Output directory")->capture_default_str();
  sub->app->add_option("--set", sub->common.overrides, "Config override key=value (repeatable)");
  subs.push_back(std::move(sub));
  return *subs.back();
}

void finish_manifest(Run& run) {
  Manifest& m = run.manifest;
  m.subcommand = run.name;
  m.arguments = run.argv;
  m.config_path = run.common.config_path;
  m.effective_config = effective_config(run.config).to_ini();
  m.seed = run.common.seed;
  for (const std::string& p : run.inputs) m.add_input(p);
  for (const std::string& p : run.outputs) m.add_output(p);
  fs::create_directories(run.common.out);
  m.save((fs::path(run.common.out) / "manifest.json").string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tendon-driven continuum robot: Cosserat simulator, sim-to-real gap models and controllers", "tdcr"};
  app.require_subcommand(1, 1);
  std::vector<std::unique_ptr<Subcommand>> subs;

  // simulate
  std::string sim_command = "rest", sim_tensions;
  int sim_steps = 0;
  {
    Subcommand& s = add_subcommand(app, subs, "simulate", "Solve the nominal rod for one command");
    s.app->add_option("--command", sim_command, "'rest' or tendon lengths L1,L2,L3,L4 in m")->capture_default_str();
    s.app->add_option("--tensions", sim_tensions, "Tendon tensions T1,T2,T3,T4 in N (static, replaces --command)");
    s.app->add_option("--steps", sim_steps, "Dynamic steps from rest; 0 solves the static equilibrium")
        ->capture_default_str();
    s.handler = [&](Run& run) {
      const RodParams params = rod_params_from_config(run.config);
      RodState state;
      if (!sim_tensions.empty()) {
        state = shoot_static_tensions(params, parse_vec4(sim_tensions, "--tensions")).state;
      } else {
        const TendonCommand cmd = sim_command == "rest"
                                      ? TendonCommand::rest(params)
                                      : TendonCommand::from_lengths(parse_vec4(sim_command, "--command"), params);
        RodPlant plant(params);
        if (sim_steps <= 0) {
          plant.settle(cmd);
        } else {
          for (int i = 0; i < sim_steps; ++i) plant.step(cmd);
        }
        state = plant.state();
      }
      write_rod_state_csv(run.out_path("state.csv"), state);
      const Vec3 tip = state.tip();
      std::cout << "tip " << fmt(tip.x()) << " " << fmt(tip.y()) << " " << fmt(tip.z()) << "\n";
    };
  }

  // calibrate
  std::string cal_obs;
  bool cal_twin = false;
  {
    Subcommand& s = add_subcommand(app, subs, "calibrate", "Fit Young's modulus to observed static tips");
    s.app->add_option("--observations", cal_obs, "Observation CSV (L1,L2,L3,L4,tip_x,tip_y,tip_z,load_kg)");
    s.app->add_flag("--synthesize-twin", cal_twin, "Synthesize noisy observations from the twin instead");
    s.handler = [&](Run& run) {
      RodParams params = rod_params_from_config(run.config);
      const TwinConfig twin = twin_config_from_config(run.config);
      CalibrationProblem problem;
      problem.e_min = run.config.get_double("calibration.e_min", problem.e_min);
      problem.e_max = run.config.get_double("calibration.e_max", problem.e_max);
      if (!cal_obs.empty()) {
        problem.observations = read_observations_csv(run.input(cal_obs), params);
      } else if (cal_twin) {
        const RodParams real = twin_params(params, twin);
        problem.observations = synthesize_observations(real, calibration_commands(real), {0.0, 0.01},
                                                       twin.sensor_noise_sigma, derive_seed(run.common.seed, "calibrate"));
        write_observations_csv(run.out_path("observations.csv"), problem.observations);
        TwinConfig known = twin;
        known.e_scale = 1.0;
        params = twin_params(params, known);
      } else {
        throw CLI::RequiredError("--observations or --synthesize-twin");
      }
      const CalibrationResult r = calibrate_youngs_modulus(problem, params);
      {
        std::ofstream curve(run.out_path("curve.csv"));
        curve << "E,rms\n";
        for (const auto& [e, rms] : r.curve) curve << format_double(e) << ',' << format_double(rms) << '\n';
      }
      Config calibrated = effective_config(run.config);
      calibrated.set("rod.youngs_modulus", format_double(r.youngs_modulus));
      calibrated.write(run.out_path("calibrated.ini"));
      std::cout << "youngs_modulus " << fmt(r.youngs_modulus) << " Pa\nrms_error " << fmt(r.rms_error) << " m\n";
    };
  }

  // gen-data
  std::string gen_kind = "sim";
  int gen_steps = 0;
  {
    Subcommand& s = add_subcommand(app, subs, "gen-data", "Generate a simulator, twin or lattice dataset");
    s.app->add_option("--kind", gen_kind, "sim, twin, pool or eval")->capture_default_str();
    s.app->add_option("--steps", gen_steps, "Rollout length for sim/twin; 0 uses the configured size");
    s.handler = [&](Run& run) {
      const RodParams nominal = rod_params_from_config(run.config);
      const TwinConfig twin = twin_config_from_config(run.config);
      const DataSettings d = data_settings_from_config(run.config);
      const std::uint64_t seed = run.common.seed;
      Dataset data;
      if (gen_kind == "sim" || gen_kind == "twin") {
        const bool is_twin = gen_kind == "twin";
        const int n = gen_steps > 0 ? gen_steps : (is_twin ? d.real_steps : d.sim_steps);
        PlantSpec plant{nominal, std::nullopt, derive_seed(seed, "gen.noise")};
        if (is_twin) plant.twin = twin;
        RolloutResult r = rollout(plant, random_exploration(n, derive_seed(seed, "gen.explore"), nominal, d.exploration));
        if (r.failure_index >= 0)
          throw NumericalError("rollout failed at step " + std::to_string(r.failure_index) + ": " + r.failure);
        data = std::move(r.data);
      } else if (gen_kind == "pool") {
        data = static_lattice_dataset({nominal, twin, derive_seed(seed, "gen.noise")},
                                      tension_lattice(d.pool_directions, d.pool_magnitudes, d.lattice_max_tension, false));
      } else if (gen_kind == "eval") {
        data = static_lattice_dataset({nominal, twin, derive_seed(seed, "gen.noise")},
                                      tension_lattice(d.eval_directions, d.eval_magnitudes, d.lattice_max_tension, true));
      } else {
        throw InvalidInputError("unknown dataset kind '" + gen_kind + "' (expected sim, twin, pool or eval)");
      }
      write_dataset_csv(run.out_path("data.csv"), data);
      std::cout << "samples " << data.size() << "\n";
    };
  }

  // train-rnn
  std::string rnn_data, rnn_direction = "inverse";
  {
    Subcommand& s = add_subcommand(app, subs, "train-rnn", "Train a forward or inverse Elman RNN");
    s.app->add_option("--data", rnn_data, "Dataset CSV")->required();
    s.app->add_option("--direction", rnn_direction, "forward or inverse")->capture_default_str();
    s.handler = [&](Run& run) {
      const Dataset data = read_dataset_csv(run.input(rnn_data));
      TrainConfig tc = train_config_from_config(run.config);
      tc.seed = run.common.seed;
      const TrainResult r = train_rnn(data, direction_from_string(rnn_direction), tc);
      r.model.save(run.out_path("model.json"));
      std::ofstream hist(run.out_path("history.csv"));
      hist << "epoch,train_loss,val_mae\n";
      for (std::size_t i = 0; i < r.train_loss.size(); ++i)
        hist << i << ',' << format_double(r.train_loss[i]) << ',' << format_double(r.val_mae[i]) << '\n';
      std::cout << "best_epoch " << r.best_epoch << "\nval_mae " << fmt(r.best_val_mae) << " m\n";
    };
  }

  // fit-gpr
  std::string gpr_data;
  int gpr_size = 0, gpr_folds = 0;
  {
    Subcommand& s = add_subcommand(app, subs, "fit-gpr", "Fit the sim-to-real gap GPR");
    s.app->add_option("--data", gpr_data, "Static twin dataset CSV with simulator tips")->required();
    s.app->add_option("--size", gpr_size, "Sparse subset size; 0 uses every point")->capture_default_str();
    s.app->add_option("--cv", gpr_folds, "Also run k-fold cross-validation on the training set")->capture_default_str();
    s.handler = [&](Run& run) {
      const Dataset pool = read_dataset_csv(run.input(gpr_data));
      GprOptions opt = gpr_options_from_config(run.config);
      const int k = gpr_size > 0 ? std::min<int>(gpr_size, static_cast<int>(pool.size())) : static_cast<int>(pool.size());
      const GprModel g = fit_subset_gpr(pool, k, opt, run.common.seed);
      g.save(run.out_path("gpr.json"));
      const Vec3 loo = g.loo_mae();
      std::cout << "points " << g.size() << "\nloo_mae " << fmt(loo.x()) << " " << fmt(loo.y()) << " " << fmt(loo.z())
                << " m\n";
      if (gpr_folds > 0) {
        opt.seed = derive_seed(run.common.seed, "fit-gpr.cv");
        const CvResult cv = cross_validate(g.X(), g.Y(), gpr_folds, opt);
        std::cout << "cv_mae " << fmt(cv.mae) << " m\n";
      }
    };
  }

  // run-policy
  ModelPaths rp_models;
  std::string rp_policy = "A", rp_target, rp_mode = "closed";
  double rp_mass = 0.0;
  {
    Subcommand& s = add_subcommand(app, subs, "run-policy", "Run one goal-reaching trial on the twin");
    s.app->add_option("--policy", rp_policy, "A, B, C or real")->capture_default_str();
    s.app->add_option("--target", rp_target, "Target tip position x,y,z in m")->required();
    s.app->add_option("--mode", rp_mode, "open or closed")->capture_default_str();
    s.app->add_option("--tip-mass", rp_mass, "Extra tip mass on the twin in kg")->capture_default_str();
    add_model_options(s.app, rp_models);
    s.handler = [&](Run& run) {
      const RodParams nominal = rod_params_from_config(run.config);
      TwinConfig twin = twin_config_from_config(run.config);
      twin.tip_mass += rp_mass;
      const PolicyConfig cfg = policy_config_from_config(run.config);
      const LoadedPolicy lp = load_policy(run, policy_kind_from_string(rp_policy), rp_models);
      TwinPlant plant(nominal, twin);
      const TrialLog log = run_goal(cfg, lp.policy, parse_vec3(rp_target, "--target"), plant,
                                    loop_mode_from_string(rp_mode), run.common.seed);
      write_trial_log_csv(run.out_path("trial.csv"), log);
      if (log.failed) throw NumericalError("trial failed: " + log.failure);
      std::cout << "final_error " << fmt(log.final_error) << " m\nsteps " << log.steps << "\nconverged "
                << (log.converged ? "yes" : "no") << "\n";
    };
  }

  // goal-eval and tip-load share their inputs.
  ModelPaths ge_models;
  std::string ge_policy = "A", ge_grid, ge_mode = "closed";
  int ge_targets = 0;
  double tl_mass = 0.02;
  auto goal_options = [&](CLI::App* a) {
    a->add_option("--policy", ge_policy, "A, B, C or real")->capture_default_str();
    a->add_option("--eval-grid", ge_grid, "Eval-grid dataset CSV the targets are drawn from")->required();
    a->add_option("--n-targets", ge_targets, "Number of targets; 0 uses the configured count");
    add_model_options(a, ge_models);
  };
  auto goal_setup = [&](Run& run) {
    const Dataset grid = read_dataset_csv(run.input(ge_grid));
    const int n = ge_targets > 0 ? ge_targets : data_settings_from_config(run.config).n_targets;
    return goal_targets(grid, n, derive_seed(run.common.seed, "targets"));
  };
  {
    Subcommand& s = add_subcommand(app, subs, "goal-eval", "Goal-reaching statistics over eval-grid targets");
    goal_options(s.app);
    s.app->add_option("--mode", ge_mode, "open or closed")->capture_default_str();
    s.handler = [&](Run& run) {
      const std::vector<Vec3> targets = goal_setup(run);
      const LoadedPolicy lp = load_policy(run, policy_kind_from_string(ge_policy), ge_models);
      const GoalStats st = goal_reaching_eval(policy_config_from_config(run.config), lp.policy, targets,
                                              rod_params_from_config(run.config), twin_config_from_config(run.config),
                                              loop_mode_from_string(ge_mode), run.common.seed);
      write_goal_csv(run.out_path("goal.csv"), targets, st);
      print_stats(st);
    };
  }
  {
    Subcommand& s = add_subcommand(app, subs, "tip-load", "Closed-loop goal reaching with an extra tip mass");
    goal_options(s.app);
    s.app->add_option("--mass", tl_mass, "Tip mass in kg")->capture_default_str();
    s.handler = [&](Run& run) {
      const std::vector<Vec3> targets = goal_setup(run);
      const LoadedPolicy lp = load_policy(run, policy_kind_from_string(ge_policy), ge_models);
      const GoalStats st = tip_load_eval(policy_config_from_config(run.config), lp.policy, targets,
                                         rod_params_from_config(run.config), twin_config_from_config(run.config),
                                         tl_mass, run.common.seed);
      write_goal_csv(run.out_path("goal.csv"), targets, st);
      print_stats(st);
    };
  }

  // sweep
  std::string sw_inverse_sim, sw_pool, sw_real, sw_grid, sw_sizes_gpr, sw_sizes_real;
  {
    Subcommand& s = add_subcommand(app, subs, "sweep", "Data-efficiency sweep of policy A against pi_real");
    s.app->add_option("--inverse-sim", sw_inverse_sim, "Inverse RNN trained on simulator data")->required();
    s.app->add_option("--pool", sw_pool, "Static twin pool CSV for the GPR subsets")->required();
    s.app->add_option("--real", sw_real, "Twin rollout CSV for the baseline")->required();
    s.app->add_option("--eval-grid", sw_grid, "Eval-grid dataset CSV the targets are drawn from")->required();
    s.app->add_option("--sizes-gpr", sw_sizes_gpr, "Comma-separated GPR subset sizes");
    s.app->add_option("--sizes-real", sw_sizes_real, "Comma-separated baseline data sizes");
    s.handler = [&](Run& run) {
      const RnnModel inv = RnnModel::load(run.input(sw_inverse_sim));
      const Dataset pool = read_dataset_csv(run.input(sw_pool));
      const Dataset real = read_dataset_csv(run.input(sw_real));
      const Dataset grid = read_dataset_csv(run.input(sw_grid));
      SweepInputs in;
      in.inverse_sim = &inv;
      in.gpr_pool = &pool;
      in.real_data = &real;
      in.train = train_config_from_config(run.config);
      in.gpr_options = gpr_options_from_config(run.config);
      if (!sw_sizes_gpr.empty()) in.sizes_gpr = parse_sizes(sw_sizes_gpr);
      if (!sw_sizes_real.empty()) in.sizes_real = parse_sizes(sw_sizes_real);
      const DataSettings d = data_settings_from_config(run.config);
      const std::vector<SweepRow> rows =
          data_efficiency_sweep(policy_config_from_config(run.config), in,
                                goal_targets(grid, d.n_targets, derive_seed(run.common.seed, "targets")),
                                rod_params_from_config(run.config), twin_config_from_config(run.config),
                                run.common.seed);
      write_sweep_csv(run.out_path("sweep.csv"), rows);
      write_sweep_csv(std::cout, rows);
    };
  }

  // path-track
  ModelPaths pt_models;
  std::string pt_policy = "C", pt_grid;
  int pt_waypoints = 33;
  {
    Subcommand& s = add_subcommand(app, subs, "path-track", "Track a waypoint ring of the eval grid");
    s.app->add_option("--policy", pt_policy, "A, B, C or real")->capture_default_str();
    s.app->add_option("--eval-grid", pt_grid, "Eval-grid dataset CSV the waypoints come from")->required();
    s.app->add_option("--waypoints", pt_waypoints, "Number of waypoints")->capture_default_str();
    add_model_options(s.app, pt_models);
    s.handler = [&](Run& run) {
      const Dataset grid = read_dataset_csv(run.input(pt_grid));
      const std::vector<Vec3> path = ring_path(grid, data_settings_from_config(run.config), pt_waypoints);
      const LoadedPolicy lp = load_policy(run, policy_kind_from_string(pt_policy), pt_models);
      TwinPlant plant(rod_params_from_config(run.config), twin_config_from_config(run.config));
      const PathResult r = path_track(policy_config_from_config(run.config), lp.policy, path, plant, run.common.seed);
      TrialLog log;
      log.records = r.records;
      write_trial_log_csv(run.out_path("path.csv"), log);
      std::cout << "completed " << (r.completed ? "yes" : "no") << "\nwaypoints_reached " << r.waypoints_reached
                << "/" << path.size() << "\nsteps " << r.steps << "\nrms_lateral " << fmt(r.rms_lateral) << " m\n";
    };
  }

  // gap-report
  int gap_commands = 200;
  {
    Subcommand& s = add_subcommand(app, subs, "gap-report", "Static sim-vs-twin tip gap over random commands");
    s.app->add_option("--commands", gap_commands, "Number of random commands (>= 100)")->capture_default_str();
    s.handler = [&](Run& run) {
      const RodParams nominal = rod_params_from_config(run.config);
      const DataSettings d = data_settings_from_config(run.config);
      const GapReport g = workspace_gap_report(
          nominal, twin_config_from_config(run.config),
          random_exploration(gap_commands, derive_seed(run.common.seed, "gap"), nominal, d.exploration));
      std::ostringstream os;
      os << "axis,mean_abs,max_abs,mean_signed\n";
      for (int a = 0; a < 3; ++a)
        os << "xyz"[a] << ',' << format_double(g.mean_abs[a]) << ',' << format_double(g.max_abs[a]) << ','
           << format_double(g.mean_signed[a]) << '\n';
      std::ofstream(run.out_path("gap.csv")) << os.str();
      std::cout << os.str() << "commands " << g.n_commands << "\nfailed " << g.n_failed << "\n";
    };
  }

  // reproduce
  std::string rep_profile = "quick";
  int rep_replicates = 5;
  {
    Subcommand& s = add_subcommand(app, subs, "reproduce", "Run every acceptance criterion end to end");
    s.app->add_option("--profile", rep_profile, "quick (replicates share datasets) or full")->capture_default_str();
    s.app->add_option("--replicates", rep_replicates, "Replicate pipelines")->capture_default_str();
    s.handler = [&](Run& run) {
      ReproduceOptions opt;
      opt.profile = profile_from_string(rep_profile);
      opt.seed = run.common.seed;
      opt.out_dir = run.common.out;
      opt.config = run.config;
      opt.n_replicates = rep_replicates;
      const ReproduceResult r = reproduce_all(opt);
      for (const std::string& p : r.artifacts) run.outputs.push_back(p);
      for (const CriterionResult& c : r.criteria)
        std::cout << "criterion " << c.id << " " << (c.pass ? "PASS" : "FAIL") << " " << c.name << ": " << c.detail
                  << "\n";
      std::cout << "report " << r.report_path << "\n";
    };
  }

  Subcommand* active = nullptr;
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    const CLI::App* target = &app;
    for (const auto& s : subs)
      if (s->app->parsed()) target = s->app;
    // Required options are checked before extras, so name unknown arguments explicitly.
    const std::vector<std::string> extra = target->remaining();
    if (!extra.empty()) std::cerr << "error: unrecognized arguments: " << boost::algorithm::join(extra, " ") << "\n";
    std::cerr << "error: " << e.what() << "\n\n" << target->help();
    return kUsageError;
  }
  for (const auto& s : subs)
    if (s->app->parsed()) active = s.get();

  Run run;
  run.name = active->app->get_name();
  run.common = active->common;
  run.argv.assign(argv, argv + argc);
  try {
    if (!run.common.config_path.empty()) run.config = Config::from_file(run.input(run.common.config_path));
    for (const std::string& kv : run.common.overrides) run.config.set_assignment(kv);
    active->handler(run);
    finish_manifest(run);
  } catch (const CLI::Error& e) {
    std::cerr << "error: missing option " << e.what() << "\n\n" << active->app->help();
    return kUsageError;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDomainError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDomainError;
  }
  return kOk;
}
