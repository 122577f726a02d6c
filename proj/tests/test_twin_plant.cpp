#include <gtest/gtest.h>

#include <cmath>

#include "tdcr/data_gen.hpp"
#include "tdcr/twin_plant.hpp"

namespace tdcr {
namespace {

TEST(TwinParams, AppliesPerturbations) {
  const RodParams nominal;
  TwinConfig cfg;
  cfg.e_scale = 0.8;
  cfg.c_spine_scale = 1.5;
  cfg.gravity_tilt = 0.1;
  cfg.tip_mass = 0.02;
  const RodParams p = twin_params(nominal, cfg);
  EXPECT_DOUBLE_EQ(p.youngs_modulus, 0.8 * nominal.youngs_modulus);
  EXPECT_DOUBLE_EQ(p.c_spine, 1.5 * nominal.c_spine);
  EXPECT_DOUBLE_EQ(p.tip_mass, 0.02);
  EXPECT_NEAR(p.gravity.norm(), nominal.gravity.norm(), 1e-12);
  EXPECT_NEAR(std::acos(p.gravity.dot(nominal.gravity) / nominal.gravity.squaredNorm()), 0.1, 1e-12);
  EXPECT_NEAR(p.gravity.y(), 0.0, 1e-15);
}

TEST(TwinParams, IdentityLeavesNominalUnchanged) {
  const RodParams nominal;
  const RodParams p = twin_params(nominal, TwinConfig::identity());
  EXPECT_EQ(p.youngs_modulus, nominal.youngs_modulus);
  EXPECT_EQ(p.c_spine, nominal.c_spine);
  EXPECT_EQ(p.gravity, nominal.gravity);
  TwinConfig bad;
  bad.e_scale = -1.0;
  EXPECT_THROW(twin_params(nominal, bad), InvalidInputError);
}

TEST(TwinPlant, IdentityTwinMatchesNominalPlant) {
  const RodParams nominal;
  RodPlant sim(nominal);
  TwinPlant twin(nominal, TwinConfig::identity());
  twin.reset(1);
  const double rest = rest_tendon_length(nominal);
  const TendonCommand cmd = TendonCommand::with_pair(Vec4(rest - 0.004, rest - 0.002, rest, rest), 0, 1);
  for (int k = 0; k < 5; ++k) EXPECT_LT((sim.step(cmd) - twin.step(cmd)).norm(), 1e-15);
}

TEST(TwinPlant, NoiseIsSeededAndHasTheConfiguredSpread) {
  const RodParams nominal;
  TwinConfig cfg = TwinConfig::identity();
  cfg.sensor_noise_sigma = 1e-3;
  TwinPlant twin(nominal, cfg);
  const Vec3 a = twin.reset(5);
  const Vec3 b = twin.reset(5);
  EXPECT_EQ(a, b);
  EXPECT_NE(twin.reset(6), a);
  double sq = 0.0;
  const int n = 2000;
  const TendonCommand rest = TendonCommand::rest(nominal);
  twin.reset(7);
  for (int i = 0; i < n; ++i) {
    const Vec3 obs = twin.settle(rest);
    sq += (obs - twin.true_tip()).squaredNorm();
  }
  EXPECT_NEAR(std::sqrt(sq / (3.0 * n)), 1e-3, 5e-5);
}

TEST(TwinPlant, TipMassIncreasesSag) {
  const RodParams nominal;
  TwinConfig cfg = TwinConfig::identity();
  TwinPlant light(nominal, cfg);
  cfg.tip_mass = 0.02;
  TwinPlant heavy(nominal, cfg);
  light.reset(0);
  heavy.reset(0);
  EXPECT_LT(heavy.true_tip().x(), light.true_tip().x() - 1e-3);
}

TEST(TwinPlant, ResetRestoresRestState) {
  const RodParams nominal;
  TwinPlant twin(nominal, TwinConfig::identity());
  const Vec3 rest_tip = twin.reset(0);
  const double rest = rest_tendon_length(nominal);
  twin.step(TendonCommand::with_pair(Vec4(rest - 0.01, rest, rest, rest - 0.002), 3, 0));
  EXPECT_GT((twin.true_tip() - rest_tip).norm(), 1e-3);
  EXPECT_EQ(twin.reset(0), rest_tip);
  EXPECT_EQ(twin.plant().state().t, 0.0);
}

TEST(TwinObserve, MatchesTwinPlantStep) {
  const RodParams nominal;
  TwinConfig cfg;
  cfg.sensor_noise_sigma = 0.0;
  TwinPlant twin(nominal, cfg);
  twin.reset(0);
  const RodState start = twin.plant().state();
  const double rest = rest_tendon_length(nominal);
  const TendonCommand cmd = TendonCommand::with_pair(Vec4(rest, rest - 0.003, rest - 0.003, rest), 1, 2);
  Rng rng(1);
  const TwinObservation obs = twin_observe(nominal, cfg, cmd, start, rng);
  EXPECT_LT((obs.tip - twin.step(cmd)).norm(), 1e-12);
}

TEST(GapReport, IdentityTwinHasNoGapAndPerturbedTwinDoes) {
  const RodParams nominal;
  std::vector<TendonCommand> cmds;
  for (const Vec4& tau : tension_lattice(10, 10, 1.5, false)) {
    const RodState s = shoot_static_tensions(nominal, tau).state;
    TendonCommand c;
    c.lengths = tendon_path_lengths(s, nominal);
    for (int i = 0; i < kNumTendons; ++i) c.actuated[i] = tau[i] > 0.0;
    cmds.push_back(c);
  }
  const GapReport none = workspace_gap_report(nominal, TwinConfig::identity(), cmds);
  EXPECT_EQ(none.n_commands + none.n_failed, 100);
  EXPECT_LT(none.max_abs.maxCoeff(), 1e-9);
  TwinConfig cfg;
  cfg.sensor_noise_sigma = 0.0;
  const GapReport gap = workspace_gap_report(nominal, cfg, cmds);
  EXPECT_GT(gap.mean_abs.norm(), 1e-3);
  EXPECT_TRUE((gap.max_abs.array() >= gap.mean_abs.array()).all());
  EXPECT_THROW(workspace_gap_report(nominal, cfg, std::vector<TendonCommand>(99, TendonCommand::rest(nominal))),
               InvalidInputError);
}

}  // namespace
}  // namespace tdcr
