#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "tdcr/config.hpp"
#include "tdcr/random.hpp"
#include "tdcr/settings.hpp"

namespace tdcr {
namespace {

TEST(Config, SectionsAndQualifiedKeysAreEquivalent) {
  const Config a = Config::from_string("[rod]\nyoungs_modulus = 2e9\n[policy]\ne_c = 0.02\n");
  const Config b = Config::from_string("rod.youngs_modulus = 2e9\npolicy.e_c = 0.02\n");
  EXPECT_EQ(a.values(), b.values());
  EXPECT_DOUBLE_EQ(a.get_double("rod.youngs_modulus", 0.0), 2e9);
}

TEST(Config, TypedGettersAndFallbacks) {
  const Config c = Config::from_string("[train]\nhidden_dim = 12\nreset_per_pair = yes\nseed = 18446744073709551615\n"
                                       "[rod]\ngravity = -9.81, 0, 0\n");
  EXPECT_EQ(c.get_int("train.hidden_dim", 0), 12);
  EXPECT_TRUE(c.get_bool("train.reset_per_pair", false));
  EXPECT_EQ(c.get_u64("train.seed", 0), 18446744073709551615ull);
  EXPECT_EQ(c.get_vec3("rod.gravity", Eigen::Vector3d::Zero()), Eigen::Vector3d(-9.81, 0, 0));
  EXPECT_EQ(c.get_int("train.missing", 7), 7);
  EXPECT_EQ(c.get_string("x.y", "z"), "z");
}

TEST(Config, MalformedValuesThrow) {
  const Config c = Config::from_string("[a]\nn = 12abc\nb = maybe\nv = 1, 2\n");
  EXPECT_THROW(c.get_int("a.n", 0), InvalidInputError);
  EXPECT_THROW(c.get_bool("a.b", false), InvalidInputError);
  EXPECT_THROW(c.get_vec3("a.v", Eigen::Vector3d::Zero()), InvalidInputError);
  Config d;
  EXPECT_THROW(d.set_assignment("no_equals_sign"), InvalidInputError);
  EXPECT_THROW(Config::from_file("/nonexistent/dir/file.ini"), IoError);
}

TEST(Config, MergeLetsOverridesWin) {
  Config base = Config::from_string("[gpr]\nn_starts = 3\njitter = 1e-10\n");
  Config over;
  over.set_assignment(" gpr.n_starts = 5 ");
  base.merge(over);
  EXPECT_EQ(base.get_int("gpr.n_starts", 0), 5);
  EXPECT_EQ(base.get_string("gpr.jitter", ""), "1e-10");
}

TEST(Config, IniRenderingRoundTrips) {
  Config c;
  c.set("rod.dt", "0.2");
  c.set("twin.seed", "9");
  c.set("top", "1");
  const Config back = Config::from_string(c.to_ini());
  EXPECT_EQ(back.values(), c.values());
  EXPECT_EQ(back.to_ini(), c.to_ini());
}

TEST(Config, FormatDoubleIsExact) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> d(-1e6, 1e6);
  for (int i = 0; i < 200; ++i) {
    const double x = d(rng) * std::pow(10.0, i % 20 - 10);
    EXPECT_EQ(std::stod(format_double(x)), x);
  }
}

TEST(Settings, EffectiveConfigCarriesDefaultsAndOverrides) {
  Config over;
  over.set("policy.e_c", "0.02");
  over.set("custom.key", "kept");
  const Config eff = effective_config(over);
  EXPECT_DOUBLE_EQ(eff.get_double("policy.e_c", 0.0), 0.02);
  EXPECT_EQ(eff.get_string("custom.key", ""), "kept");
  EXPECT_TRUE(eff.has("rod.youngs_modulus"));
  EXPECT_TRUE(eff.has("twin.e_scale"));
  EXPECT_TRUE(eff.has("train.hidden_dim"));
  EXPECT_TRUE(eff.has("gpr.n_starts"));
  // Reading the effective config back gives the same settings.
  EXPECT_DOUBLE_EQ(policy_config_from_config(eff).e_c, 0.02);
  EXPECT_EQ(train_config_from_config(eff).hidden_dim, TrainConfig().hidden_dim);
  EXPECT_EQ(effective_config(eff).to_ini(), eff.to_ini());
}

TEST(Settings, ReadersRoundTrip) {
  TwinConfig twin;
  twin.e_scale = 0.9;
  twin.seed = 42;
  TrainConfig train;
  train.reset_per_pair = true;
  train.learning_rate = 3e-3;
  GprOptions gpr;
  gpr.max_opt_points = 123;
  PolicyConfig pol;
  pol.guard_window = 5;
  DataSettings data;
  data.pool_magnitudes = 7;
  Config c;
  twin_config_to_config(twin, c);
  train_config_to_config(train, c);
  gpr_options_to_config(gpr, c);
  policy_config_to_config(pol, c);
  data_settings_to_config(data, c);
  EXPECT_EQ(twin_config_from_config(c).e_scale, 0.9);
  EXPECT_EQ(twin_config_from_config(c).seed, 42u);
  EXPECT_TRUE(train_config_from_config(c).reset_per_pair);
  EXPECT_EQ(train_config_from_config(c).learning_rate, 3e-3);
  EXPECT_EQ(gpr_options_from_config(c).max_opt_points, 123);
  EXPECT_EQ(policy_config_from_config(c).guard_window, 5);
  EXPECT_EQ(data_settings_from_config(c).pool_magnitudes, 7);
}

TEST(Settings, InvalidValuesAreRejected) {
  EXPECT_THROW(policy_config_from_config(Config::from_string("[policy]\ne_c = -1\n")), InvalidInputError);
  EXPECT_THROW(train_config_from_config(Config::from_string("[train]\nsplit_ratio = 1.5\n")), InvalidInputError);
  EXPECT_THROW(twin_config_from_config(Config::from_string("[twin]\ne_scale = 0\n")), InvalidInputError);
}

TEST(Random, DerivedSeedsDifferPerComponentAndAreStable) {
  EXPECT_EQ(derive_seed(7, "a"), derive_seed(7, "a"));
  EXPECT_NE(derive_seed(7, "a"), derive_seed(7, "b"));
  EXPECT_NE(derive_seed(7, "a"), derive_seed(8, "a"));
  Rng r1 = make_rng(3, "x"), r2 = make_rng(3, "x");
  for (int i = 0; i < 10; ++i) EXPECT_EQ(r1(), r2());
}

TEST(Random, UniformAndNormalMoments) {
  Rng rng(5);
  double sum = 0.0, sq = 0.0, umin = 1.0, umax = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = uniform01(rng);
    umin = std::min(umin, u);
    umax = std::max(umax, u);
    const double z = standard_normal(rng);
    sum += z;
    sq += z * z;
  }
  EXPECT_GE(umin, 0.0);
  EXPECT_LT(umax, 1.0);
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.01);
  for (int i = 0; i < 1000; ++i) EXPECT_LT(uniform_index(rng, 7), 7u);
}

}  // namespace
}  // namespace tdcr
