#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "tdcr/calibration.hpp"
#include "tdcr/twin_plant.hpp"

namespace tdcr {
namespace {

CalibrationProblem self_problem(const RodParams& truth, int n, double noise, std::uint64_t seed) {
  CalibrationProblem prob;
  prob.observations = synthesize_observations(truth, calibration_commands(truth, n), {0.0, 0.005}, noise, seed);
  return prob;
}

TEST(Calibration, ObservationsAreStaticTipsUnderLoad) {
  const RodParams p;
  const auto cmds = calibration_commands(p, 4);
  ASSERT_EQ(cmds.size(), 4u);
  const auto obs = synthesize_observations(p, cmds, {0.0, 0.01}, 0.0, 1);
  ASSERT_EQ(obs.size(), 4u);
  EXPECT_EQ(obs[0].load_kg, 0.0);
  EXPECT_EQ(obs[1].load_kg, 0.01);
  RodParams loaded = p;
  loaded.tip_mass = 0.01;
  EXPECT_LT((obs[1].tip - shoot_static(loaded, cmds[1]).state.tip()).norm(), 1e-6);
  EXPECT_LT((obs[0].tip - shoot_static(p, cmds[0]).state.tip()).norm(), 1e-6);
}

TEST(Calibration, RmsIsZeroAtTruthAndGrowsAway) {
  RodParams truth;
  truth.youngs_modulus = 1.7e9;
  const CalibrationProblem prob = self_problem(truth, 4, 0.0, 2);
  EXPECT_LT(calibration_rms(prob, truth, 1.7e9), 1e-6);
  EXPECT_GT(calibration_rms(prob, truth, 1.5e9), calibration_rms(prob, truth, 1.65e9));
  EXPECT_GT(calibration_rms(prob, truth, 2.0e9), calibration_rms(prob, truth, 1.75e9));
}

TEST(Calibration, RecoversPlantedModulus) {
  for (double e : {0.9e9, 2.33e9, 6.0e9}) {
    RodParams truth;
    truth.youngs_modulus = e;
    const CalibrationResult r = calibrate_youngs_modulus(self_problem(truth, 4, 0.0, 3), truth);
    EXPECT_NEAR(r.youngs_modulus, e, 1e-3 * e);
    EXPECT_LT(r.rms_error, 1e-5);
    EXPECT_GE(r.curve.size(), 16u);
    for (const auto& [ep, rms] : r.curve) EXPECT_GE(rms, r.rms_error);
  }
}

TEST(Calibration, NoisyObservationsStillRecoverModulus) {
  RodParams truth;
  truth.youngs_modulus = 3.1e9;
  const CalibrationResult r = calibrate_youngs_modulus(self_problem(truth, 8, 2.5e-4, 4), truth);
  EXPECT_NEAR(r.youngs_modulus, 3.1e9, 0.01 * 3.1e9);
}

TEST(Calibration, MinimumOnSearchBoundaryFails) {
  RodParams truth;
  truth.youngs_modulus = 2.33e9;
  CalibrationProblem prob = self_problem(truth, 4, 0.0, 5);
  prob.e_min = 5e9;
  prob.e_max = 5e10;
  try {
    calibrate_youngs_modulus(prob, truth);
    FAIL() << "expected CalibrationFailedError";
  } catch (const CalibrationFailedError& e) {
    EXPECT_EQ(e.curve().size(), 16u);
  }
}

TEST(Calibration, ProblemValidation) {
  CalibrationProblem prob;
  EXPECT_THROW(prob.validate(), InvalidInputError);
  prob = self_problem(RodParams{}, 4, 0.0, 6);
  prob.e_max = prob.e_min;
  EXPECT_THROW(prob.validate(), InvalidInputError);
  prob = self_problem(RodParams{}, 4, 0.0, 6);
  prob.observations[1].load_kg = -1.0;
  EXPECT_THROW(prob.validate(), InvalidInputError);
}

TEST(Calibration, CsvRoundTrip) {
  const RodParams p;
  const auto obs = synthesize_observations(p, calibration_commands(p, 4), {0.0, 0.02}, 1e-4, 7);
  std::ostringstream os;
  write_observations_csv(os, obs);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "L1,L2,L3,L4,tip_x,tip_y,tip_z,load_kg");
  const std::string path = (std::filesystem::temp_directory_path() / "tdcr_calib_rt.csv").string();
  write_observations_csv(path, obs);
  const auto back = read_observations_csv(path, p);
  ASSERT_EQ(back.size(), obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) {
    EXPECT_EQ(back[i].command.lengths, obs[i].command.lengths);
    EXPECT_EQ(back[i].command.actuated, TendonCommand::from_lengths(obs[i].command.lengths, p).actuated);
    EXPECT_EQ(back[i].tip, obs[i].tip);
    EXPECT_EQ(back[i].load_kg, obs[i].load_kg);
  }
  std::filesystem::remove(path);
  EXPECT_THROW(read_observations_csv(path, p), IoError);
}

}  // namespace
}  // namespace tdcr
