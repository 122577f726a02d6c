#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tdcr/data_gen.hpp"
#include "tdcr/gpr.hpp"
#include "tdcr/rnn.hpp"
#include "tdcr/twin_plant.hpp"

namespace tdcr {

enum class PolicyKind { kA, kB, kC, kReal };
enum class LoopMode { kOpenLoop, kClosedLoop };

std::string to_string(PolicyKind kind);
PolicyKind policy_kind_from_string(const std::string& text);
std::string to_string(LoopMode mode);

struct PolicyConfig {
  double e_c = 0.015;               // m, policy C switches to B above this error
  double fixed_point_tol = 0.001;   // m
  int max_fixed_point_iters = 20;
  int max_control_steps = 100;
  double control_rate = 5.0;        // Hz
  int open_loop_horizon = 25;       // steps applied before an open-loop trial is scored
  double settle_speed = 1e-4;       // m/s
  double max_step = 0.003;          // m per tendon per control step
  double range_fraction = 0.15;     // absolute tendon-length window around the rest length
  int guard_window = 3;             // consecutive C switches before the guard may lock to A
  double guard_tol = 1e-4;          // m, infinity norm of L_A - L_B
  double waypoint_tol = 0.01;       // m
  int stall_steps = 50;

  void validate() const;
};

// Models used by one policy; pointers are non-owning and must outlive the policy.
struct Policy {
  PolicyKind kind = PolicyKind::kA;
  const RnnModel* inverse_sim = nullptr;   // A and C
  const RnnModel* inverse_gpr = nullptr;   // B and C
  const RnnModel* inverse_real = nullptr;  // baseline trained on plant data
  const GprModel* gpr = nullptr;           // A and C

  void validate() const;
};

struct FixedPointResult {
  Vec4 lengths = Vec4::Zero();
  Vec3 e_gp = Vec3::Zero();
  Vec3 x_s_target = Vec3::Zero();
  Eigen::VectorXd hidden;           // hidden state the final query produces
  int iterations = 0;
  bool converged = false;
  std::vector<double> deltas;       // |x_s(i) - x_s(i-1)| per iteration
};

// Iterates x_s = x_target + e_gp(L(x_current + e_gp, x_s), x_s) starting from `e_gp_prior`.
FixedPointResult policy_a_command(const PolicyConfig& cfg, const RnnModel& inverse_sim, const GprModel& gpr,
                                  const Vec3& x_current, const Vec3& x_target, const Vec3& e_gp_prior,
                                  const Eigen::VectorXd& hidden);

// Policy C's branch state machine.
struct PolicyCState {
  char last_branch = 'A';
  int consecutive_switches = 0;
  bool locked_to_a = false;
};

// Picks 'A' or 'B' from the position error and the two candidate commands; updates the guard.
char policy_c_branch(const PolicyConfig& cfg, double position_error, const Vec4& l_a, const Vec4& l_b,
                     PolicyCState& state);

// Per-tendon travel limit around `previous` and the absolute window around the rest length.
Vec4 limit_command(const PolicyConfig& cfg, const Vec4& raw, const Vec4& previous, double rest_length);

struct TrialRecord {
  double t = 0.0;
  Vec4 lengths = Vec4::Zero();
  Vec3 tip = Vec3::Zero();
  Vec3 target = Vec3::Zero();
  Vec3 x_s_target = Vec3::Zero();
  Vec3 e_gp = Vec3::Zero();
  char branch = 'A';
};

struct TrialLog {
  std::vector<TrialRecord> records;
  double final_error = 0.0;
  int steps = 0;
  bool converged = false;
  bool failed = false;
  std::string failure;
  int max_fixed_point_iterations = 0;
  int fixed_point_capouts = 0;
  int contracting_sequences = 0;  // control steps whose x_s iterates shrank monotonically
  int multi_iteration_sequences = 0;
};

// Header: t,L1,L2,L3,L4,tip_x,tip_y,tip_z,tgt_x,tgt_y,tgt_z,stx,sty,stz,egx,egy,egz,branch
void write_trial_log_csv(std::ostream& out, const TrialLog& log);
void write_trial_log_csv(const std::string& path, const TrialLog& log);

// One goal-reaching trial on the twin from rest. The plant is reset with `noise_seed`.
TrialLog run_goal(const PolicyConfig& cfg, const Policy& policy, const Vec3& target, TwinPlant& plant, LoopMode mode,
                  std::uint64_t noise_seed);

struct GoalStats {
  double mean = 0.0;
  double std = 0.0;
  std::vector<double> errors;  // per target; NaN for failed trials
  int n_fail = 0;
  int max_fixed_point_iterations = 0;
  int fixed_point_capouts = 0;
  int contracting_sequences = 0;
  int multi_iteration_sequences = 0;
  std::vector<TrialLog> logs;
};

GoalStats goal_reaching_eval(const PolicyConfig& cfg, const Policy& policy, const std::vector<Vec3>& targets,
                             const RodParams& nominal, const TwinConfig& twin, LoopMode mode, std::uint64_t seed,
                             bool keep_logs = false);

// Goal reaching with the twin carrying an extra tip mass (kg).
GoalStats tip_load_eval(const PolicyConfig& cfg, const Policy& policy, const std::vector<Vec3>& targets,
                        const RodParams& nominal, TwinConfig twin, double tip_mass, std::uint64_t seed);

struct PathResult {
  std::vector<TrialRecord> records;
  std::vector<double> lateral_error;  // distance of each measured tip to the waypoint polyline
  int steps = 0;
  int waypoints_reached = 0;
  bool completed = false;
  bool stalled = false;
  double rms_lateral = 0.0;  // over the steps from reaching the first waypoint on
};

double distance_to_polyline(const Vec3& p, const std::vector<Vec3>& polyline);

// Closed-loop tracking of a waypoint path; the active waypoint advances once the measured tip
// is within cfg.waypoint_tol of it. Stops as stalled after cfg.stall_steps without progress.
PathResult path_track(const PolicyConfig& cfg, const Policy& policy, const std::vector<Vec3>& waypoints,
                      TwinPlant& plant, std::uint64_t noise_seed);

struct SweepRow {
  std::string curve;
  int size = 0;
  double mean = 0.0;
  double std = 0.0;
  int n_fail = 0;
};

struct SweepInputs {
  const RnnModel* inverse_sim = nullptr;  // fixed, trained on simulator data
  const Dataset* gpr_pool = nullptr;      // static twin points
  const Dataset* real_data = nullptr;     // twin rollout used for the baseline
  std::vector<int> sizes_gpr{50, 100, 200, 400, 600, 800, 1000};
  std::vector<int> sizes_real{500, 1000, 2000, 3000, 5000, 7500, 10000};
  TrainConfig train;
  GprOptions gpr_options;
};

// GPR on a k-point sparse subset of the pool, seeded as in the data-efficiency sweep.
GprModel fit_subset_gpr(const Dataset& pool, int k, const GprOptions& options, std::uint64_t seed);
// Baseline inverse model on the first k real samples, seeded as in the data-efficiency sweep.
RnnModel train_baseline(const Dataset& real, int k, const TrainConfig& train, std::uint64_t seed);

// Curve "policy_a" varies the GPR subset size; curve "pi_real" varies the baseline's data size.
std::vector<SweepRow> data_efficiency_sweep(const PolicyConfig& cfg, const SweepInputs& inputs,
                                            const std::vector<Vec3>& targets, const RodParams& nominal,
                                            const TwinConfig& twin, std::uint64_t seed);

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);
void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows);

}  // namespace tdcr
