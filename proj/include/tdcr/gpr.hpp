#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tdcr/rod_model.hpp"

namespace tdcr {

struct GprHyper {
  double signal_variance = 1.0;
  Eigen::VectorXd length_scales;  // one per input dimension, in standardized input units
  double noise_variance = 1e-6;

  void validate(int input_dim) const;
};

// sigma_s^2 * exp(-0.5 * sum_d (a_d - b_d)^2 / l_d^2)
double se_kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const GprHyper& hyper);

struct GprOptions {
  int n_starts = 3;           // optimizer restarts per axis
  int max_opt_points = 250;   // hyperparameters are fitted on a seeded subset of this size
  int max_iterations = 100;
  double jitter = 1e-10;
  bool standardize = true;
  std::uint64_t seed = 0;
};

// Maximizes the log marginal likelihood of one output column. X is used as given.
GprHyper optimize_hyper(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GprOptions& options);

double log_marginal_likelihood(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GprHyper& hyper);

// Independent zero-mean exact GP per output column of Y (three columns: the x, y, z error).
class GprModel {
 public:
  // Hyperparameters are optimized when `hyper` is empty; otherwise one entry per output column.
  static GprModel fit(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const std::vector<GprHyper>& hyper = {},
                      const GprOptions& options = {});

  Vec3 predict_mean(const Eigen::VectorXd& x) const;
  Vec3 predict_variance(const Eigen::VectorXd& x) const;
  // Closed-form leave-one-out mean absolute error per axis.
  Vec3 loo_mae() const;

  int size() const { return static_cast<int>(X_.rows()); }
  int input_dim() const { return static_cast<int>(X_.cols()); }
  const Eigen::MatrixXd& X() const { return X_; }
  const Eigen::MatrixXd& Y() const { return Y_; }
  const GprHyper& hyper(int axis) const { return axes_[axis].hyper; }
  const GprOptions& options() const { return options_; }
  // Smallest eigenvalue of K + sigma_n^2 I for one axis.
  double min_eigenvalue(int axis) const;

  std::string to_json() const;
  static GprModel from_json(const std::string& text);
  void save(const std::string& path) const;
  static GprModel load(const std::string& path);

 private:
  struct Axis {
    GprHyper hyper;
    Eigen::MatrixXd chol;  // lower Cholesky factor of K + sigma_n^2 I
    Eigen::VectorXd beta;
    double jitter = 0.0;
  };

  Eigen::VectorXd standardize(const Eigen::VectorXd& x) const;
  void factorize();

  Eigen::MatrixXd X_, Y_, Xs_;
  Eigen::VectorXd mean_, scale_;
  std::array<Axis, 3> axes_;
  GprOptions options_;
};

struct CvResult {
  Vec3 mae_axis = Vec3::Zero();
  double mae = 0.0;  // mean over the three axes
};

// k-fold cross-validation with a seeded shuffle; hyperparameters are refitted in every fold.
CvResult cross_validate(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, int folds, const GprOptions& options);

}  // namespace tdcr
