#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "tdcr/control.hpp"
#include "tdcr/data_gen.hpp"

namespace tdcr {
namespace {

struct Models {
  RodParams nominal;
  RnnModel inverse;
  GprModel zero_gpr;
  GprModel gap_gpr;
};

// Small inverse model and two GPRs: one that predicts no gap and one fitted on a coarse twin lattice.
const Models& models() {
  static const Models m = [] {
    Models out;
    const Dataset sim = rollout(PlantSpec{out.nominal, std::nullopt, 0}, random_exploration(1500, 21, out.nominal)).data;
    TrainConfig cfg;
    cfg.max_epochs = 60;
    cfg.hidden_dim = 16;
    cfg.seed = 1;
    out.inverse = train_rnn(sim, Direction::kInverse, cfg).model;
    const Dataset pool = static_lattice_dataset(PlantSpec{out.nominal, TwinConfig{}, 2}, tension_lattice(8, 5, 2.0, false));
    auto [X, Y] = gpr_training_data(pool);
    GprOptions opt;
    opt.n_starts = 1;
    out.gap_gpr = GprModel::fit(X, Y, {}, opt);
    GprHyper h;
    h.signal_variance = 1e-6;
    h.length_scales = Eigen::VectorXd::Ones(7);
    h.noise_variance = 1e-8;
    out.zero_gpr = GprModel::fit(X, Eigen::MatrixXd::Zero(X.rows(), 3), std::vector<GprHyper>(3, h));
    return out;
  }();
  return m;
}

Policy policy_of(PolicyKind kind, const GprModel& gpr) {
  Policy p;
  p.kind = kind;
  p.inverse_sim = &models().inverse;
  p.inverse_gpr = &models().inverse;
  p.inverse_real = &models().inverse;
  p.gpr = &gpr;
  return p;
}

TEST(PolicyC, SwitchesOnErrorThreshold) {
  PolicyConfig cfg;
  PolicyCState st;
  const Vec4 la = Vec4::Constant(0.2), lb = Vec4::Constant(0.21);
  EXPECT_EQ(policy_c_branch(cfg, 0.5 * cfg.e_c, la, lb, st), 'A');
  EXPECT_EQ(policy_c_branch(cfg, 2.0 * cfg.e_c, la, lb, st), 'B');
  EXPECT_EQ(policy_c_branch(cfg, cfg.e_c, la, lb, st), 'A');
  EXPECT_FALSE(st.locked_to_a);
}

TEST(PolicyC, GuardLocksToAAfterRepeatedSwitchingWithAgreeingCommands) {
  PolicyConfig cfg;
  PolicyCState st;
  const Vec4 la = Vec4::Constant(0.2);
  const Vec4 lb = la + Vec4::Constant(0.5 * cfg.guard_tol);
  std::string seq;
  for (int k = 0; k < 8; ++k) seq += policy_c_branch(cfg, (k % 2 == 0 ? 2.0 : 0.5) * cfg.e_c, la, lb, st);
  // The third consecutive switch trips the guard.
  EXPECT_EQ(seq, "BAAAAAAA");
  EXPECT_TRUE(st.locked_to_a);
}

TEST(PolicyC, GuardStaysOpenWhenCommandsDisagree) {
  PolicyConfig cfg;
  PolicyCState st;
  const Vec4 la = Vec4::Constant(0.2), lb = Vec4::Constant(0.21);
  std::string seq;
  for (int k = 0; k < 6; ++k) seq += policy_c_branch(cfg, (k % 2 == 0 ? 2.0 : 0.5) * cfg.e_c, la, lb, st);
  EXPECT_EQ(seq, "BABABA");
  EXPECT_FALSE(st.locked_to_a);
}

TEST(PolicyC, BranchIsPureFunctionOfHistory) {
  PolicyConfig cfg;
  PolicyCState s1, s2;
  Rng rng(3);
  for (int k = 0; k < 200; ++k) {
    const double e = uniform(rng, 0.0, 0.03);
    const Vec4 la = Vec4::Constant(uniform(rng, 0.19, 0.2));
    const Vec4 lb = la + Vec4::Constant(uniform(rng, 0.0, 2e-4));
    EXPECT_EQ(policy_c_branch(cfg, e, la, lb, s1), policy_c_branch(cfg, e, la, lb, s2));
  }
}

TEST(LimitCommand, EnforcesStepAndWindow) {
  PolicyConfig cfg;
  const double rest = 0.22;
  const Vec4 prev = Vec4::Constant(0.2);
  const Vec4 out = limit_command(cfg, Vec4(0.1, 0.2005, 0.3, std::nan("")), prev, rest);
  EXPECT_DOUBLE_EQ(out[0], 0.2 - cfg.max_step);
  EXPECT_DOUBLE_EQ(out[1], 0.2005);
  EXPECT_DOUBLE_EQ(out[2], 0.2 + cfg.max_step);
  EXPECT_DOUBLE_EQ(out[3], 0.2);
  const Vec4 low = limit_command(cfg, Vec4::Zero(), Vec4::Constant((1.0 - cfg.range_fraction) * rest + 1e-4), rest);
  EXPECT_DOUBLE_EQ(low.minCoeff(), (1.0 - cfg.range_fraction) * rest);
}

TEST(Polyline, DistanceToSegments) {
  const std::vector<Vec3> line{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 1, 0)};
  EXPECT_NEAR(distance_to_polyline(Vec3(0.5, 0.3, 0), line), 0.3, 1e-15);
  EXPECT_NEAR(distance_to_polyline(Vec3(1.2, 0.5, 0), line), 0.2, 1e-15);
  EXPECT_NEAR(distance_to_polyline(Vec3(-1, 0, 0), line), 1.0, 1e-15);
  EXPECT_NEAR(distance_to_polyline(Vec3(2, 2, 0), {Vec3(2, 2, 1)}), 1.0, 1e-15);
}

TEST(PolicyA, ZeroGapConvergesImmediately) {
  const Models& m = models();
  PolicyConfig cfg;
  const Vec3 x(0.0, 0.0, 0.215), target(0.02, 0.01, 0.21);
  const FixedPointResult r = policy_a_command(cfg, m.inverse, m.zero_gpr, x, target, Vec3::Zero(), m.inverse.zero_hidden());
  EXPECT_TRUE(r.converged);
  EXPECT_LE(r.iterations, 2);
  EXPECT_LT(r.e_gp.norm(), 1e-9);
  EXPECT_LT((r.x_s_target - target).norm(), 1e-9);
  EXPECT_EQ(r.lengths, m.inverse.predict((Eigen::VectorXd(6) << x, target).finished(), m.inverse.zero_hidden()).first);
}

TEST(PolicyA, FixedPointSatisfiesItsEquation) {
  const Models& m = models();
  PolicyConfig cfg;
  const Vec3 x(0.0, 0.0, 0.215), target(0.03, -0.02, 0.205);
  const FixedPointResult r = policy_a_command(cfg, m.inverse, m.gap_gpr, x, target, Vec3::Zero(), m.inverse.zero_hidden());
  ASSERT_TRUE(r.converged);
  ASSERT_EQ(static_cast<int>(r.deltas.size()), r.iterations);
  EXPECT_LE(r.deltas.back(), cfg.fixed_point_tol);
  // x_s = target + e_gp(L(x + e_gp, x_s), x_s) up to the tolerance.
  const Vec3 e_check = m.gap_gpr.predict_mean(gpr_input(r.lengths, r.x_s_target));
  EXPECT_LT((target + e_check - r.x_s_target).norm(), cfg.fixed_point_tol);
}

TEST(RunGoal, ClosedLoopRespectsLimitsAndLogs) {
  const Models& m = models();
  PolicyConfig cfg;
  cfg.max_control_steps = 30;
  TwinPlant plant(m.nominal, TwinConfig{});
  const Policy pol = policy_of(PolicyKind::kC, m.gap_gpr);
  const Vec3 target(0.03, 0.02, 0.205);
  const TrialLog log = run_goal(cfg, pol, target, plant, LoopMode::kClosedLoop, 5);
  ASSERT_FALSE(log.failed) << log.failure;
  ASSERT_EQ(static_cast<int>(log.records.size()), log.steps);
  const double rest = rest_tendon_length(m.nominal);
  Vec4 prev = Vec4::Constant(rest);
  for (const auto& r : log.records) {
    EXPECT_LE((r.lengths - prev).cwiseAbs().maxCoeff(), cfg.max_step + 1e-15);
    EXPECT_GE(r.lengths.minCoeff(), (1.0 - cfg.range_fraction) * rest - 1e-15);
    EXPECT_LE(r.lengths.maxCoeff(), (1.0 + cfg.range_fraction) * rest + 1e-15);
    EXPECT_EQ(r.target, target);
    EXPECT_TRUE(r.branch == 'A' || r.branch == 'B');
    prev = r.lengths;
  }
  EXPECT_NEAR(log.final_error, (log.records.back().tip - target).norm(), 1e-15);
  EXPECT_NEAR(log.records[1].t - log.records[0].t, 1.0 / cfg.control_rate, 1e-12);

  const TrialLog again = run_goal(cfg, pol, target, plant, LoopMode::kClosedLoop, 5);
  EXPECT_EQ(again.final_error, log.final_error);
  std::ostringstream a, b;
  write_trial_log_csv(a, log);
  write_trial_log_csv(b, again);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().substr(0, a.str().find('\n')), "t,L1,L2,L3,L4,tip_x,tip_y,tip_z,tgt_x,tgt_y,tgt_z,stx,sty,stz,egx,egy,egz,branch");
}

TEST(RunGoal, ClosedLoopImprovesOnOpenLoop) {
  const Models& m = models();
  PolicyConfig cfg;
  const std::vector<Vec3> targets{Vec3(0.03, 0.0, 0.205), Vec3(0.0, 0.04, 0.2), Vec3(-0.04, -0.02, 0.2)};
  TwinConfig twin;
  const Policy pol = policy_of(PolicyKind::kA, m.gap_gpr);
  const GoalStats closed = goal_reaching_eval(cfg, pol, targets, m.nominal, twin, LoopMode::kClosedLoop, 1);
  const GoalStats open = goal_reaching_eval(cfg, pol, targets, m.nominal, twin, LoopMode::kOpenLoop, 1);
  EXPECT_EQ(closed.n_fail, 0);
  EXPECT_LT(closed.mean, open.mean);
}

TEST(GoalEval, StatisticsAndDeterminism) {
  const Models& m = models();
  PolicyConfig cfg;
  cfg.max_control_steps = 15;
  const std::vector<Vec3> targets{Vec3(0.02, 0.0, 0.21), Vec3(0.0, -0.03, 0.205), Vec3(-0.03, 0.01, 0.2)};
  const Policy pol = policy_of(PolicyKind::kB, m.gap_gpr);
  const GoalStats s = goal_reaching_eval(cfg, pol, targets, m.nominal, TwinConfig{}, LoopMode::kClosedLoop, 3, true);
  ASSERT_EQ(s.errors.size(), 3u);
  ASSERT_EQ(s.logs.size(), 3u);
  const double mean = (s.errors[0] + s.errors[1] + s.errors[2]) / 3.0;
  double var = 0.0;
  for (double e : s.errors) var += (e - mean) * (e - mean);
  EXPECT_NEAR(s.mean, mean, 1e-15);
  EXPECT_NEAR(s.std, std::sqrt(var / 2.0), 1e-15);
  // Zero extra load reproduces the unloaded evaluation exactly.
  const GoalStats z = tip_load_eval(cfg, pol, targets, m.nominal, TwinConfig{}, 0.0, 3);
  EXPECT_EQ(z.errors, s.errors);
  const GoalStats loaded = tip_load_eval(cfg, pol, targets, m.nominal, TwinConfig{}, 0.02, 3);
  EXPECT_GT(loaded.mean, s.mean);
}

TEST(PathTrack, SingleWaypointAtRestCompletesQuickly) {
  const Models& m = models();
  PolicyConfig cfg;
  TwinConfig twin;
  twin.sensor_noise_sigma = 0.0;
  TwinPlant plant(m.nominal, twin);
  const Vec3 rest_tip = plant.reset(0);
  const PathResult r = path_track(cfg, policy_of(PolicyKind::kA, m.gap_gpr), {rest_tip}, plant, 0);
  EXPECT_TRUE(r.completed);
  EXPECT_LE(r.steps, 3);
  EXPECT_EQ(r.waypoints_reached, 1);
}

TEST(PathTrack, LateralRmsStartsAtFirstWaypoint) {
  const Models& m = models();
  PolicyConfig cfg;
  TwinConfig twin;
  twin.sensor_noise_sigma = 0.0;
  const RodParams real = twin_params(m.nominal, twin);
  std::vector<Vec3> path;
  for (double t : {0.8, 1.0}) path.push_back(shoot_static_tensions(real, Vec4(t, 0.3, 0.0, 0.0)).state.tip());
  TwinPlant plant(m.nominal, twin);
  const PathResult r = path_track(cfg, policy_of(PolicyKind::kA, m.gap_gpr), path, plant, 0);
  ASSERT_TRUE(r.completed);
  std::size_t first = 0;
  while ((r.records[first].tip - path[0]).norm() > cfg.waypoint_tol) ++first;
  ASSERT_GT(first, 0u);
  double sq = 0.0;
  for (std::size_t i = first; i < r.lateral_error.size(); ++i) sq += r.lateral_error[i] * r.lateral_error[i];
  EXPECT_NEAR(r.rms_lateral, std::sqrt(sq / (r.lateral_error.size() - first)), 1e-15);
  EXPECT_LT(r.rms_lateral, r.lateral_error.front());
}

TEST(PathTrack, UnreachableWaypointStalls) {
  const Models& m = models();
  PolicyConfig cfg;
  cfg.stall_steps = 5;
  TwinPlant plant(m.nominal, TwinConfig{});
  const PathResult r = path_track(cfg, policy_of(PolicyKind::kB, m.gap_gpr), {Vec3(0.5, 0.5, 0.5)}, plant, 0);
  EXPECT_TRUE(r.stalled);
  EXPECT_FALSE(r.completed);
  EXPECT_EQ(r.waypoints_reached, 0);
}

TEST(Policy, ValidationAndNames) {
  Policy p;
  p.kind = PolicyKind::kA;
  EXPECT_THROW(p.validate(), InvalidInputError);
  for (PolicyKind k : {PolicyKind::kA, PolicyKind::kB, PolicyKind::kC, PolicyKind::kReal})
    EXPECT_EQ(policy_kind_from_string(to_string(k)), k);
  EXPECT_THROW(policy_kind_from_string("Z"), InvalidInputError);
  PolicyConfig cfg;
  cfg.range_fraction = 1.5;
  EXPECT_THROW(cfg.validate(), InvalidInputError);
}

TEST(Sweep, CsvFormat) {
  std::ostringstream os;
  write_sweep_csv(os, {SweepRow{"policy_a", 100, 0.002, 0.001, 0}});
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "curve,size,mean,std,n_fail");
  EXPECT_NE(os.str().find("policy_a,100,"), std::string::npos);
}

}  // namespace
}  // namespace tdcr
