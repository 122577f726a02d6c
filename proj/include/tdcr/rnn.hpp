#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tdcr/dataset.hpp"

namespace tdcr {

// forward: (L1..L4, x_i) -> x_{i+1};  inverse: (x_i, x_{i+1}) -> L_i
enum class Direction { kForward, kInverse };

std::string to_string(Direction d);
Direction direction_from_string(const std::string& text);

struct TrainConfig {
  double split_ratio = 0.7;
  int max_epochs = 1000;
  int patience = 25;
  double learning_rate = 1e-3;
  int sequence_length = 32;
  int hidden_dim = 30;
  double grad_clip = 5.0;     // global gradient-norm clip per update
  bool reset_per_pair = false;  // true: every transition starts from a zero hidden state
  std::uint64_t seed = 0;

  void validate() const;
};

// Elman network: h = tanh(W_ih x + W_hh h_prev + b_h), y = W_ho h + b_o, on z-scored data.
struct RnnModel {
  Direction direction = Direction::kForward;
  Eigen::MatrixXd w_ih, w_hh, w_ho;
  Eigen::VectorXd b_h, b_o;
  Eigen::VectorXd in_mean, in_std, out_mean, out_std;
  bool reset_per_pair = false;
  std::uint64_t seed = 0;

  int input_dim() const { return static_cast<int>(w_ih.cols()); }
  int hidden_dim() const { return static_cast<int>(w_hh.rows()); }
  int output_dim() const { return static_cast<int>(w_ho.rows()); }

  Eigen::VectorXd zero_hidden() const { return Eigen::VectorXd::Zero(hidden_dim()); }
  // One cell evaluation on raw (denormalized) input; returns the raw output and the next hidden state.
  std::pair<Eigen::VectorXd, Eigen::VectorXd> predict(const Eigen::VectorXd& input,
                                                      const Eigen::VectorXd& hidden) const;

  Eigen::VectorXd normalize_input(const Eigen::VectorXd& x) const;
  Eigen::VectorXd denormalize_output(const Eigen::VectorXd& y) const;
  Eigen::VectorXd normalize_output(const Eigen::VectorXd& y) const;

  void validate() const;
  std::string to_json() const;
  static RnnModel from_json(const std::string& text);
  void save(const std::string& path) const;
  static RnnModel load(const std::string& path);
};

// Randomly initialized model with identity normalization.
RnnModel init_rnn(Direction direction, int hidden_dim, std::uint64_t seed);

// Raw input and target rows of a dataset for one direction.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> make_sequences(const Dataset& data, Direction direction);

struct TrainResult {
  RnnModel model;
  std::vector<double> train_loss;  // per epoch, normalized MSE
  std::vector<double> val_mae;     // per epoch, meters
  int best_epoch = 0;
  double best_val_mae = 0.0;
};

TrainResult train_rnn(const Dataset& data, Direction direction, const TrainConfig& config);

// Mean absolute error over all outputs when the dataset is fed as one sequence.
double evaluate_mae(const RnnModel& model, const Dataset& data);

// Max relative deviation between analytic and central-difference gradients of the normalized
// MSE over the given raw rows (fed as one sequence from a zero hidden state). The denominator
// is max(|analytic|, |numeric|, 1e-6).
double gradient_check(const RnnModel& model, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                      double step = 1e-5, double* max_abs_deviation = nullptr);

}  // namespace tdcr
