#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tdcr/config.hpp"
#include "tdcr/control.hpp"
#include "tdcr/settings.hpp"

namespace tdcr {

enum class Profile { kQuick, kFull };
std::string to_string(Profile profile);
Profile profile_from_string(const std::string& text);

// Everything one pipeline run needs, read from a Config.
struct PipelineSettings {
  RodParams nominal;
  TwinConfig twin;
  TrainConfig train;
  GprOptions gpr;
  PolicyConfig policy;
  DataSettings data;
  // Policy C's threshold is set to policy A's closed-loop mean error on the suite.
  bool e_c_from_policy_a = true;
  static PipelineSettings from_config(const Config& config);
};

// Datasets and models of one seeded pipeline run.
struct Pipeline {
  std::uint64_t seed = 0;
  PipelineSettings settings;
  Dataset sim_data;   // nominal simulator rollout
  Dataset real_data;  // twin rollout
  Dataset gpr_pool;   // static twin lattice
  Dataset eval_grid;  // staggered static twin lattice the targets come from
  Dataset b_data;     // simulator data shifted by the headline GPR
  RnnModel inverse_sim, forward_sim, inverse_b, inverse_real_small, inverse_real;
  TrainResult inverse_sim_fit, forward_sim_fit;
  GprModel gpr;  // headline GPR on gpr_headline_size sparse pool points
  std::vector<Vec3> targets;
  std::vector<Vec3> path;
};

// Builds the pipeline for a root seed. With `shared` set, datasets and the simulator models are
// taken from it and only the remaining components are reseeded.
Pipeline build_pipeline(const PipelineSettings& settings, std::uint64_t seed, const Pipeline* shared = nullptr);

// `n` distinct eval-grid tips chosen with the seed.
std::vector<Vec3> goal_targets(const Dataset& eval_grid, int n, std::uint64_t seed);
// Waypoints on one tension ring of the eval grid: `n` consecutive bending directions at the middle magnitude.
std::vector<Vec3> ring_path(const Dataset& eval_grid, const DataSettings& data, int n = 33);

// Goal-reaching statistics of every policy and mode compared in the goal-reaching table.
struct GoalTable {
  GoalStats a_open, b_open, real_open;
  GoalStats a_closed, b_closed, c_closed, real_closed;
  GoalStats a_load, b_load, c_load, real_load;
  double e_c = 0.0;  // threshold policy C ran with
};
GoalTable evaluate_goal_table(const Pipeline& pipeline, double tip_mass = 0.02);

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
};

CriterionResult check_compression_law(std::uint64_t seed);
CriterionResult check_static_solver(const RodParams& params, std::uint64_t seed, int n_commands = 1000);
CriterionResult check_calibration(const RodParams& nominal, const TwinConfig& twin, std::uint64_t seed);
CriterionResult check_rnn(const Pipeline& pipeline);
CriterionResult check_gpr(const Pipeline& pipeline, int folds = 10);
CriterionResult check_data_efficiency(const std::vector<SweepRow>& rows);
CriterionResult check_orderings(const GoalTable& reference, const std::vector<GoalTable>& replicates);
CriterionResult check_fixed_point(const std::vector<const GoalTable*>& tables);
struct PathTable {
  PathResult a, b, c;
};
PathTable evaluate_path_table(const Pipeline& pipeline, double e_c);
CriterionResult check_path_tracking(const PathTable& paths);

struct ReproduceOptions {
  Profile profile = Profile::kQuick;
  std::uint64_t seed = 1;
  std::string out_dir = "reproduce_out";
  Config config;
  int n_replicates = 5;
};

struct ReproduceResult {
  std::vector<CriterionResult> criteria;
  std::string report;       // deterministic: no timings
  std::string report_path;
  std::vector<std::string> artifacts;
  bool all_pass() const;
};

// Runs criteria 1-9, writing artifacts, report.txt and timings.txt into options.out_dir.
ReproduceResult reproduce_all(const ReproduceOptions& options);

}  // namespace tdcr
