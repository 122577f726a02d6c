#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "tdcr/data_gen.hpp"
#include "tdcr/rnn.hpp"

namespace tdcr {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

RnnModel random_model(Direction dir, int hidden, std::uint64_t seed) {
  RnnModel m = init_rnn(dir, hidden, seed);
  Rng rng(seed);
  for (int i = 0; i < m.input_dim(); ++i) {
    m.in_mean[i] = uniform(rng, -1.0, 1.0);
    m.in_std[i] = uniform(rng, 0.5, 2.0);
  }
  for (int i = 0; i < m.output_dim(); ++i) {
    m.out_mean[i] = uniform(rng, -1.0, 1.0);
    m.out_std[i] = uniform(rng, 0.5, 2.0);
  }
  return m;
}

const Dataset& sim_data() {
  static const Dataset d = [] {
    const RodParams p;
    return rollout(PlantSpec{p, std::nullopt, 0}, random_exploration(600, 11, p)).data;
  }();
  return d;
}

TEST(Rnn, PredictMatchesElmanCell) {
  const RnnModel m = random_model(Direction::kForward, 6, 2);
  Rng rng(4);
  VectorXd x(7), h(6);
  for (int i = 0; i < 7; ++i) x[i] = uniform(rng, -2.0, 2.0);
  for (int i = 0; i < 6; ++i) h[i] = uniform(rng, -1.0, 1.0);
  const auto [y, h_next] = m.predict(x, h);
  for (int j = 0; j < 6; ++j) {
    double a = m.b_h[j];
    for (int i = 0; i < 7; ++i) a += m.w_ih(j, i) * (x[i] - m.in_mean[i]) / m.in_std[i];
    for (int i = 0; i < 6; ++i) a += m.w_hh(j, i) * h[i];
    EXPECT_NEAR(h_next[j], std::tanh(a), 1e-14);
  }
  for (int k = 0; k < 3; ++k) {
    double o = m.b_o[k];
    for (int j = 0; j < 6; ++j) o += m.w_ho(k, j) * h_next[j];
    EXPECT_NEAR(y[k], o * m.out_std[k] + m.out_mean[k], 1e-13);
  }
}

TEST(Rnn, ResetPerPairIgnoresHiddenState) {
  RnnModel m = random_model(Direction::kInverse, 5, 3);
  m.reset_per_pair = true;
  const VectorXd x = VectorXd::Constant(6, 0.3);
  EXPECT_EQ(m.predict(x, VectorXd::Constant(5, 0.9)).first, m.predict(x, m.zero_hidden()).first);
  m.reset_per_pair = false;
  EXPECT_NE(m.predict(x, VectorXd::Constant(5, 0.9)).first, m.predict(x, m.zero_hidden()).first);
}

TEST(Rnn, PredictRejectsBadInput) {
  const RnnModel m = random_model(Direction::kInverse, 4, 1);
  EXPECT_THROW(m.predict(VectorXd::Zero(7), m.zero_hidden()), InvalidInputError);
  VectorXd bad = VectorXd::Zero(6);
  bad[2] = std::nan("");
  EXPECT_THROW(m.predict(bad, m.zero_hidden()), InvalidInputError);
}

TEST(Rnn, AnalyticGradientMatchesFiniteDifferences) {
  for (Direction dir : {Direction::kForward, Direction::kInverse}) {
    for (bool reset : {false, true}) {
      RnnModel m = random_model(dir, 8, 5);
      m.reset_per_pair = reset;
      const MatrixXd X = MatrixXd::Random(24, m.input_dim());
      const MatrixXd Y = MatrixXd::Random(24, m.output_dim());
      double max_abs = 0.0;
      EXPECT_LE(gradient_check(m, X, Y, 1e-5, &max_abs), 1e-4);
      EXPECT_LT(max_abs, 1e-7);
    }
  }
}

TEST(Rnn, SequencesHaveDirectionLayout) {
  const Dataset& d = sim_data();
  const auto [Xf, Yf] = make_sequences(d, Direction::kForward);
  const auto [Xi, Yi] = make_sequences(d, Direction::kInverse);
  ASSERT_EQ(Xf.cols(), 7);
  ASSERT_EQ(Yf.cols(), 3);
  ASSERT_EQ(Xi.cols(), 6);
  ASSERT_EQ(Yi.cols(), 4);
  const Sample& s = d.samples[5];
  EXPECT_EQ(Xf.row(5).head<4>().transpose(), s.lengths);
  EXPECT_EQ(Xf.row(5).tail<3>().transpose(), s.x);
  EXPECT_EQ(Yf.row(5).transpose(), s.x_next);
  EXPECT_EQ(Xi.row(5).head<3>().transpose(), s.x);
  EXPECT_EQ(Xi.row(5).tail<3>().transpose(), s.x_next);
  EXPECT_EQ(Yi.row(5).transpose(), s.lengths);
}

TEST(Rnn, TrainingReducesErrorAndIsDeterministic) {
  TrainConfig cfg;
  cfg.max_epochs = 40;
  cfg.hidden_dim = 12;
  cfg.seed = 3;
  const TrainResult a = train_rnn(sim_data(), Direction::kInverse, cfg);
  const TrainResult b = train_rnn(sim_data(), Direction::kInverse, cfg);
  ASSERT_FALSE(a.val_mae.empty());
  EXPECT_LT(a.train_loss.back(), 0.5 * a.train_loss.front());
  EXPECT_LT(a.best_val_mae, a.val_mae.front());
  EXPECT_EQ(a.best_val_mae, a.val_mae[a.best_epoch]);
  EXPECT_EQ(a.train_loss, b.train_loss);
  EXPECT_EQ(a.model.to_json(), b.model.to_json());
  Dataset val = sim_data();
  val.split_ratio = cfg.split_ratio;
  EXPECT_DOUBLE_EQ(evaluate_mae(a.model, val.split().second), a.best_val_mae);
}

TEST(Rnn, EarlyStoppingHonorsPatience) {
  TrainConfig cfg;
  cfg.max_epochs = 1000;
  cfg.patience = 2;
  cfg.learning_rate = 0.5;
  cfg.hidden_dim = 4;
  const TrainResult r = train_rnn(sim_data(), Direction::kForward, cfg);
  EXPECT_LE(static_cast<int>(r.val_mae.size()), r.best_epoch + 1 + cfg.patience);
}

TEST(Rnn, TrainingRejectsBadConfig) {
  TrainConfig cfg;
  cfg.split_ratio = 0.0;
  EXPECT_THROW(train_rnn(sim_data(), Direction::kForward, cfg), InvalidInputError);
  EXPECT_THROW(train_rnn(sim_data().head(50), Direction::kForward, TrainConfig{}), InvalidInputError);
}

TEST(Rnn, JsonRoundTripIsExact) {
  RnnModel m = random_model(Direction::kInverse, 7, 9);
  m.reset_per_pair = true;
  const std::string path = (std::filesystem::temp_directory_path() / "tdcr_rnn_rt.json").string();
  m.save(path);
  const RnnModel r = RnnModel::load(path);
  EXPECT_EQ(r.direction, m.direction);
  EXPECT_EQ(r.w_ih, m.w_ih);
  EXPECT_EQ(r.w_hh, m.w_hh);
  EXPECT_EQ(r.w_ho, m.w_ho);
  EXPECT_EQ(r.b_h, m.b_h);
  EXPECT_EQ(r.out_std, m.out_std);
  EXPECT_TRUE(r.reset_per_pair);
  EXPECT_EQ(r.to_json(), m.to_json());
  std::filesystem::remove(path);
  EXPECT_THROW(RnnModel::from_json("{\"direction\": \"sideways\"}"), IoError);
  EXPECT_THROW(RnnModel::from_json("[1, 2]"), IoError);
  EXPECT_THROW(RnnModel::load(path), IoError);
}

TEST(Direction, NamesRoundTrip) {
  EXPECT_EQ(direction_from_string(to_string(Direction::kForward)), Direction::kForward);
  EXPECT_EQ(direction_from_string(to_string(Direction::kInverse)), Direction::kInverse);
  EXPECT_THROW(direction_from_string("up"), InvalidInputError);
}

}  // namespace
}  // namespace tdcr
