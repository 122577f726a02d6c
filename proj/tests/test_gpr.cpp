#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "tdcr/gpr.hpp"
#include "tdcr/random.hpp"

namespace tdcr {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kPi = 3.141592653589793;

// Smooth three-output test function of seven inputs.
Vec3 truth(const VectorXd& x) {
  return Vec3(0.01 * std::sin(x[0] + 0.5 * x[4]), 0.005 * std::cos(x[1] - x[5]) * x[2], 0.002 * x[3] * x[6]);
}

void make_data(int n, std::uint64_t seed, MatrixXd& X, MatrixXd& Y, double noise = 0.0) {
  Rng rng(seed);
  X.resize(n, 7);
  Y.resize(n, 3);
  for (int i = 0; i < n; ++i) {
    for (int d = 0; d < 7; ++d) X(i, d) = uniform(rng, -1.5, 1.5);
    Y.row(i) = truth(X.row(i).transpose()).transpose();
    for (int a = 0; a < 3; ++a) Y(i, a) += noise * standard_normal(rng);
  }
}

GprHyper fixed_hyper(double sv, double l, double nv) {
  GprHyper h;
  h.signal_variance = sv;
  h.length_scales = VectorXd::Constant(7, l);
  h.noise_variance = nv;
  return h;
}

// Dense reference: explicit standardization and full-pivot LU solves.
struct Oracle {
  MatrixXd Xs;
  VectorXd mean, scale;
  GprHyper h;
  MatrixXd K;
  VectorXd standardize(const VectorXd& x) const { return (x - mean).cwiseQuotient(scale); }
  Oracle(const MatrixXd& X, const GprHyper& hyper, bool standardize_inputs) : h(hyper) {
    const int n = static_cast<int>(X.rows());
    mean = VectorXd::Zero(X.cols());
    scale = VectorXd::Ones(X.cols());
    if (standardize_inputs) {
      for (int d = 0; d < X.cols(); ++d) {
        mean[d] = X.col(d).sum() / n;
        scale[d] = std::sqrt((X.col(d).array() - mean[d]).square().sum() / n);
      }
    }
    Xs.resize(n, X.cols());
    for (int i = 0; i < n; ++i) Xs.row(i) = standardize(X.row(i).transpose()).transpose();
    K.resize(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double d2 = 0.0;
        for (int d = 0; d < X.cols(); ++d) d2 += std::pow((Xs(i, d) - Xs(j, d)) / h.length_scales[d], 2);
        K(i, j) = h.signal_variance * std::exp(-0.5 * d2) + (i == j ? h.noise_variance : 0.0);
      }
  }
  VectorXd kstar(const VectorXd& x) const {
    const VectorXd xs = standardize(x);
    VectorXd k(Xs.rows());
    for (int i = 0; i < Xs.rows(); ++i) {
      double d2 = 0.0;
      for (int d = 0; d < Xs.cols(); ++d) d2 += std::pow((Xs(i, d) - xs[d]) / h.length_scales[d], 2);
      k[i] = h.signal_variance * std::exp(-0.5 * d2);
    }
    return k;
  }
  double mean_at(const VectorXd& x, const VectorXd& y) const { return kstar(x).dot(K.fullPivLu().solve(y)); }
  double var_at(const VectorXd& x) const {
    const VectorXd k = kstar(x);
    return h.signal_variance - k.dot(K.fullPivLu().solve(k));
  }
};

TEST(SeKernel, HandComputed) {
  GprHyper h;
  h.signal_variance = 2.0;
  h.length_scales = Eigen::Vector2d(1.0, 2.0);
  EXPECT_NEAR(se_kernel(Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 2), h), 2.0 * std::exp(-1.0), 1e-15);
  EXPECT_DOUBLE_EQ(se_kernel(Eigen::Vector2d(3, 4), Eigen::Vector2d(3, 4), h), 2.0);
  EXPECT_THROW(se_kernel(Eigen::Vector3d::Zero(), Eigen::Vector2d::Zero(), h), InvalidInputError);
}

TEST(LogMarginalLikelihood, MatchesDenseFormula) {
  MatrixXd X, Y;
  make_data(40, 1, X, Y, 1e-4);
  const GprHyper h = fixed_hyper(1e-4, 0.8, 1e-7);
  Oracle o(X, h, false);
  const VectorXd y = Y.col(0);
  const auto ldlt = o.K.ldlt();
  const double logdet = ldlt.vectorD().array().log().sum();
  const double expected = -0.5 * y.dot(ldlt.solve(y)) - 0.5 * logdet - 0.5 * 40 * std::log(2.0 * kPi);
  EXPECT_NEAR(log_marginal_likelihood(X, y, h), expected, 1e-8 * std::abs(expected));
}

TEST(OptimizeHyper, ImprovesLikelihoodOverStartingPoint) {
  MatrixXd X, Y;
  make_data(80, 2, X, Y, 1e-4);
  const VectorXd y = Y.col(1);
  const double power = y.squaredNorm() / y.size();
  GprOptions opt;
  opt.seed = 5;
  const GprHyper h = optimize_hyper(X, y, opt);
  h.validate(7);
  EXPECT_GT(log_marginal_likelihood(X, y, h), log_marginal_likelihood(X, y, fixed_hyper(power, 1.0, 0.01 * power)));
  EXPECT_LE(h.signal_variance, 10.0 * power * (1.0 + 1e-12));
}

TEST(GprModel, PredictionsMatchDenseOracle) {
  MatrixXd X, Y;
  make_data(60, 3, X, Y, 5e-5);
  const std::vector<GprHyper> hyper{fixed_hyper(1e-4, 1.2, 1e-8), fixed_hyper(4e-5, 0.9, 1e-8),
                                    fixed_hyper(1e-5, 1.5, 1e-9)};
  const GprModel m = GprModel::fit(X, Y, hyper);
  MatrixXd Xq, Yq;
  make_data(20, 4, Xq, Yq);
  for (int a = 0; a < 3; ++a) {
    Oracle o(X, hyper[a], true);
    for (int i = 0; i < Xq.rows(); ++i) {
      const VectorXd x = Xq.row(i).transpose();
      EXPECT_NEAR(m.predict_mean(x)[a], o.mean_at(x, Y.col(a)), 1e-10);
      EXPECT_NEAR(m.predict_variance(x)[a], std::max(0.0, o.var_at(x)), 1e-10 * hyper[a].signal_variance);
    }
  }
}

TEST(GprModel, NoiselessLimitInterpolatesTrainingPoints) {
  MatrixXd X, Y;
  make_data(50, 5, X, Y);
  const GprModel m = GprModel::fit(X, Y, std::vector<GprHyper>(3, fixed_hyper(1e-4, 1.0, 1e-14)));
  for (int i = 0; i < X.rows(); ++i)
    EXPECT_LT((m.predict_mean(X.row(i).transpose()) - Y.row(i).transpose()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(GprModel, VarianceBounds) {
  MatrixXd X, Y;
  make_data(100, 6, X, Y, 1e-4);
  GprOptions opt;
  opt.seed = 1;
  const GprModel m = GprModel::fit(X, Y, {}, opt);
  MatrixXd Xq, Yq;
  make_data(50, 7, Xq, Yq);
  for (int i = 0; i < 50; ++i) {
    const Vec3 v = m.predict_variance(Xq.row(i).transpose());
    for (int a = 0; a < 3; ++a) {
      EXPECT_GE(v[a], 0.0);
      EXPECT_LE(v[a], m.hyper(a).signal_variance);
    }
  }
  // At a training input the variance cannot exceed the noise level; far away it returns to the prior.
  const Vec3 at_train = m.predict_variance(X.row(0).transpose());
  const Vec3 far = m.predict_variance(VectorXd::Constant(7, 1e3));
  for (int a = 0; a < 3; ++a) {
    EXPECT_LE(at_train[a], m.hyper(a).noise_variance * (1.0 + 1e-6));
    EXPECT_NEAR(far[a], m.hyper(a).signal_variance, 1e-12 * m.hyper(a).signal_variance);
    EXPECT_GT(m.min_eigenvalue(a), 0.0);
  }
}

TEST(GprModel, LeaveOneOutMatchesBruteForceRefit) {
  MatrixXd X, Y;
  make_data(30, 8, X, Y, 1e-4);
  GprOptions opt;
  opt.standardize = false;
  const std::vector<GprHyper> hyper(3, fixed_hyper(1e-4, 1.0, 1e-8));
  const GprModel m = GprModel::fit(X, Y, hyper, opt);
  Vec3 brute = Vec3::Zero();
  for (int i = 0; i < 30; ++i) {
    MatrixXd Xr(29, 7), Yr(29, 3);
    for (int j = 0, r = 0; j < 30; ++j)
      if (j != i) {
        Xr.row(r) = X.row(j);
        Yr.row(r++) = Y.row(j);
      }
    const GprModel mi = GprModel::fit(Xr, Yr, hyper, opt);
    brute += (mi.predict_mean(X.row(i).transpose()) - Y.row(i).transpose()).cwiseAbs();
  }
  brute /= 30.0;
  EXPECT_LT((m.loo_mae() - brute).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(GprModel, LearnsSmoothFunction) {
  MatrixXd X, Y, Xq, Yq;
  make_data(300, 9, X, Y, 1e-5);
  make_data(100, 10, Xq, Yq);
  GprOptions opt;
  opt.seed = 2;
  const GprModel m = GprModel::fit(X, Y, {}, opt);
  Vec3 err = Vec3::Zero(), scale = Vec3::Zero();
  for (int i = 0; i < 100; ++i) {
    err += (m.predict_mean(Xq.row(i).transpose()) - Yq.row(i).transpose()).cwiseAbs();
    scale += Yq.row(i).transpose().cwiseAbs();
  }
  for (int a = 0; a < 3; ++a) EXPECT_LT(err[a], 0.1 * scale[a]);
}

TEST(GprModel, JsonRoundTripReproducesPredictions) {
  MatrixXd X, Y;
  make_data(40, 11, X, Y, 1e-4);
  GprOptions opt;
  opt.n_starts = 1;
  const GprModel m = GprModel::fit(X, Y, {}, opt);
  const std::string path = (std::filesystem::temp_directory_path() / "tdcr_gpr_rt.json").string();
  m.save(path);
  const GprModel r = GprModel::load(path);
  for (int i = 0; i < 10; ++i) {
    const VectorXd x = X.row(i).transpose() * 0.9;
    EXPECT_EQ(r.predict_mean(x), m.predict_mean(x));
    EXPECT_EQ(r.predict_variance(x), m.predict_variance(x));
  }
  EXPECT_EQ(r.to_json(), m.to_json());
  std::filesystem::remove(path);
  EXPECT_THROW(GprModel::from_json("[1,2,3]"), IoError);
}

TEST(GprModel, RejectsBadInput) {
  MatrixXd X, Y;
  make_data(10, 12, X, Y);
  EXPECT_THROW(GprModel::fit(X, Y.leftCols(2)), InvalidInputError);
  EXPECT_THROW(GprModel::fit(X, Y, std::vector<GprHyper>(2, fixed_hyper(1.0, 1.0, 1e-6))), InvalidInputError);
  GprHyper bad = fixed_hyper(1.0, 1.0, 1e-6);
  bad.length_scales[3] = -1.0;
  EXPECT_THROW(GprModel::fit(X, Y, std::vector<GprHyper>(3, bad)), InvalidInputError);
  const GprModel m = GprModel::fit(X, Y, std::vector<GprHyper>(3, fixed_hyper(1e-4, 1.0, 1e-8)));
  EXPECT_THROW(m.predict_mean(VectorXd::Zero(6)), InvalidInputError);
}

TEST(CrossValidate, SeededAndAccurateOnSmoothFunction) {
  MatrixXd X, Y;
  make_data(200, 13, X, Y, 1e-5);
  GprOptions opt;
  opt.n_starts = 1;
  opt.seed = 4;
  const CvResult a = cross_validate(X, Y, 5, opt);
  const CvResult b = cross_validate(X, Y, 5, opt);
  EXPECT_EQ(a.mae, b.mae);
  EXPECT_NEAR(a.mae, a.mae_axis.mean(), 1e-15);
  EXPECT_LT(a.mae, 0.1 * Y.cwiseAbs().mean());
  EXPECT_THROW(cross_validate(X, Y, 1, opt), InvalidInputError);
}

}  // namespace
}  // namespace tdcr
