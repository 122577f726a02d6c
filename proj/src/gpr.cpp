#include "tdcr/gpr.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <ceres/ceres.h>
#include <nlohmann/json.hpp>

#include "tdcr/random.hpp"

namespace tdcr {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd kernel_matrix(const MatrixXd& X, const GprHyper& h) {
  const int n = static_cast<int>(X.rows());
  const VectorXd inv_l2 = h.length_scales.array().square().inverse();
  MatrixXd K(n, n);
  for (int i = 0; i < n; ++i) {
    K(i, i) = h.signal_variance;
    for (int j = 0; j < i; ++j) {
      const double d2 = ((X.row(i) - X.row(j)).array().square() * inv_l2.transpose().array()).sum();
      K(i, j) = K(j, i) = h.signal_variance * std::exp(-0.5 * d2);
    }
  }
  return K;
}

// Cholesky of K + (sigma_n^2 + jitter) I, adding jitter on failure.
bool factor(const MatrixXd& K, double noise, double jitter, MatrixXd& L, double& used_jitter) {
  const int n = static_cast<int>(K.rows());
  for (double extra : {0.0, jitter, jitter * 1e2, jitter * 1e4}) {
    MatrixXd A = K;
    A.diagonal().array() += noise + extra;
    Eigen::LLT<MatrixXd> llt(A);
    if (llt.info() == Eigen::Success) {
      L = llt.matrixL();
      used_jitter = extra;
      return true;
    }
    if (n == 0) break;
  }
  return false;
}

// Hyperparameters live inside a box; the optimizer sees an unconstrained logit per parameter.
struct HyperBox {
  VectorXd lo, hi;  // bounds on log parameters: [log s2, log l_1..l_D, log n2]

  static HyperBox make(int dim, double y_power) {
    HyperBox b;
    b.lo.resize(dim + 2);
    b.hi.resize(dim + 2);
    b.lo[0] = std::log(1e-4 * y_power);
    b.hi[0] = std::log(10.0 * y_power);
    for (int d = 0; d < dim; ++d) {
      b.lo[1 + d] = std::log(0.03);
      b.hi[1 + d] = std::log(100.0);
    }
    b.lo[dim + 1] = std::log(1e-7 * y_power);
    b.hi[dim + 1] = std::log(2.0 * y_power);
    return b;
  }

  VectorXd to_log(const VectorXd& z) const {
    VectorXd s = (1.0 / (1.0 + (-z.array()).exp())).matrix();
    return lo + (hi - lo).cwiseProduct(s);
  }
  VectorXd dlog_dz(const VectorXd& z) const {
    VectorXd s = (1.0 / (1.0 + (-z.array()).exp())).matrix();
    return (hi - lo).cwiseProduct(s.cwiseProduct((VectorXd::Ones(s.size()) - s)));
  }
  VectorXd to_z(const VectorXd& logp) const {
    VectorXd f = (logp - lo).cwiseQuotient(hi - lo);
    f = f.cwiseMax(1e-6).cwiseMin(1.0 - 1e-6);
    return (f.array() / (1.0 - f.array())).log().matrix();
  }
};

GprHyper hyper_from_log(const VectorXd& logp) {
  const int dim = static_cast<int>(logp.size()) - 2;
  GprHyper h;
  h.signal_variance = std::exp(logp[0]);
  h.length_scales = logp.segment(1, dim).array().exp();
  h.noise_variance = std::exp(logp[dim + 1]);
  return h;
}

// Negative log marginal likelihood and its gradient with respect to the log parameters.
bool nlml(const MatrixXd& X, const VectorXd& y, const VectorXd& logp, double& value, VectorXd* grad) {
  const int n = static_cast<int>(X.rows());
  const int dim = static_cast<int>(X.cols());
  const GprHyper h = hyper_from_log(logp);
  const MatrixXd K = kernel_matrix(X, h);
  MatrixXd L;
  double jit = 0.0;
  if (!factor(K, h.noise_variance, 1e-10, L, jit)) return false;
  const auto tri = L.triangularView<Eigen::Lower>();
  VectorXd alpha = tri.solve(y);
  L.transpose().triangularView<Eigen::Upper>().solveInPlace(alpha);
  value = 0.5 * y.dot(alpha) + L.diagonal().array().log().sum() + 0.5 * n * std::log(2.0 * M_PI);
  if (!std::isfinite(value)) return false;
  if (grad) {
    MatrixXd Kinv = MatrixXd::Identity(n, n);
    tri.solveInPlace(Kinv);
    L.transpose().triangularView<Eigen::Upper>().solveInPlace(Kinv);
    const MatrixXd W = Kinv - alpha * alpha.transpose();  // d nlml = 0.5 tr(W dK)
    grad->resize(dim + 2);
    (*grad)[0] = 0.5 * (W.cwiseProduct(K)).sum();
    for (int d = 0; d < dim; ++d) {
      const double inv_l2 = 1.0 / (h.length_scales[d] * h.length_scales[d]);
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < i; ++j) {
          const double diff = X(i, d) - X(j, d);
          acc += 2.0 * W(i, j) * K(i, j) * diff * diff * inv_l2;
        }
      }
      (*grad)[1 + d] = 0.5 * acc;
    }
    (*grad)[dim + 1] = 0.5 * h.noise_variance * W.trace();
  }
  return true;
}

class NlmlFunction : public ceres::FirstOrderFunction {
 public:
  NlmlFunction(const MatrixXd& X, const VectorXd& y, const HyperBox& box) : X_(X), y_(y), box_(box) {}

  bool Evaluate(const double* parameters, double* cost, double* gradient) const override {
    const VectorXd z = Eigen::Map<const VectorXd>(parameters, NumParameters());
    const VectorXd logp = box_.to_log(z);
    double value = 0.0;
    VectorXd g;
    if (!nlml(X_, y_, logp, value, gradient ? &g : nullptr)) return false;
    cost[0] = value;
    if (gradient) {
      const VectorXd gz = g.cwiseProduct(box_.dlog_dz(z));
      for (int i = 0; i < NumParameters(); ++i) gradient[i] = gz[i];
    }
    return true;
  }
  int NumParameters() const override { return static_cast<int>(X_.cols()) + 2; }

 private:
  const MatrixXd& X_;
  const VectorXd& y_;
  HyperBox box_;
};

GprHyper median_heuristic(const MatrixXd& X, const VectorXd& y) {
  std::vector<double> d;
  for (int i = 0; i < X.rows(); ++i)
    for (int j = 0; j < i; ++j) d.push_back((X.row(i) - X.row(j)).norm());
  double med = 1.0;
  if (!d.empty()) {
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2), d.end());
    med = std::max(d[d.size() / 2], 1e-3);
  }
  const double power = std::max(y.squaredNorm() / std::max<double>(1.0, static_cast<double>(y.size())), 1e-12);
  GprHyper h;
  h.signal_variance = power;
  h.length_scales = VectorXd::Constant(X.cols(), med);
  h.noise_variance = 0.01 * power;
  return h;
}

std::vector<int> seeded_subset(int n, int k, Rng& rng) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (k >= n) return idx;
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(n - i)));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

void GprHyper::validate(int input_dim) const {
  if (!(signal_variance > 0.0) || !(noise_variance > 0.0) || length_scales.size() != input_dim ||
      !(length_scales.minCoeff() > 0.0) || !length_scales.allFinite()) {
    throw InvalidInputError("GPR hyperparameters must be positive and match the input dimension");
  }
}

double se_kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const GprHyper& hyper) {
  if (a.size() != b.size() || a.size() != hyper.length_scales.size())
    throw InvalidInputError("se_kernel: dimension mismatch");
  const double d2 = ((a - b).array() / hyper.length_scales.array()).square().sum();
  return hyper.signal_variance * std::exp(-0.5 * d2);
}

double log_marginal_likelihood(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GprHyper& hyper) {
  VectorXd logp(X.cols() + 2);
  logp[0] = std::log(hyper.signal_variance);
  logp.segment(1, X.cols()) = hyper.length_scales.array().log();
  logp[X.cols() + 1] = std::log(hyper.noise_variance);
  double v = 0.0;
  if (!nlml(X, y, logp, v, nullptr)) throw NumericalError("log_marginal_likelihood: factorization failed");
  return -v;
}

GprHyper optimize_hyper(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GprOptions& options) {
  if (X.rows() != y.size() || X.rows() < 2) throw InvalidInputError("optimize_hyper: need matching X, y with N >= 2");
  const int dim = static_cast<int>(X.cols());
  const double power = std::max(y.squaredNorm() / static_cast<double>(y.size()), 1e-14);
  const HyperBox box = HyperBox::make(dim, power);
  Rng rng(derive_seed(options.seed, "gpr.hyper"));

  // Errors only from glog.
  FLAGS_minloglevel = std::max(FLAGS_minloglevel, 2);
  ceres::GradientProblemSolver::Options solver;
  solver.line_search_direction_type = ceres::LBFGS;
  solver.max_num_iterations = options.max_iterations;
  solver.logging_type = ceres::SILENT;
  solver.function_tolerance = 1e-10;
  solver.gradient_tolerance = 1e-8;

  double best_cost = std::numeric_limits<double>::infinity();
  VectorXd best_logp;
  for (int start = 0; start < std::max(1, options.n_starts); ++start) {
    VectorXd logp(dim + 2);
    if (start == 0) {
      logp[0] = std::log(power);
      logp.segment(1, dim).setConstant(0.0);
      logp[dim + 1] = std::log(0.01 * power);
    } else {
      for (int i = 0; i < dim + 2; ++i) logp[i] = uniform(rng, box.lo[i], box.hi[i]);
    }
    VectorXd z = box.to_z(logp);
    ceres::GradientProblem problem(new NlmlFunction(X, y, box));
    ceres::GradientProblemSolver::Summary summary;
    ceres::Solve(solver, problem, z.data(), &summary);
    const VectorXd final_logp = box.to_log(z);
    double cost = 0.0;
    if (nlml(X, y, final_logp, cost, nullptr) && cost < best_cost) {
      best_cost = cost;
      best_logp = final_logp;
    }
  }
  if (best_logp.size() == 0) return median_heuristic(X, y);
  return hyper_from_log(best_logp);
}

Eigen::VectorXd GprModel::standardize(const Eigen::VectorXd& x) const {
  if (x.size() != X_.cols()) throw InvalidInputError("GPR input has wrong dimension");
  return (x - mean_).cwiseQuotient(scale_);
}

void GprModel::factorize() {
  for (int a = 0; a < 3; ++a) {
    Axis& ax = axes_[a];
    ax.hyper.validate(input_dim());
    const MatrixXd K = kernel_matrix(Xs_, ax.hyper);
    if (!factor(K, ax.hyper.noise_variance, options_.jitter, ax.chol, ax.jitter)) {
      throw NumericalError("GPR factorization failed even with jitter; remove duplicate inputs or raise noise");
    }
    const auto tri = ax.chol.triangularView<Eigen::Lower>();
    ax.beta = tri.solve(Y_.col(a));
    ax.chol.transpose().triangularView<Eigen::Upper>().solveInPlace(ax.beta);
  }
}

GprModel GprModel::fit(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const std::vector<GprHyper>& hyper,
                       const GprOptions& options) {
  if (X.rows() < 1 || X.rows() != Y.rows() || Y.cols() != 3)
    throw InvalidInputError("GPR fit needs N >= 1 rows and three output columns");
  if (!X.allFinite() || !Y.allFinite()) throw InvalidInputError("GPR training data must be finite");
  if (!hyper.empty() && hyper.size() != 3) throw InvalidInputError("GPR fit needs one hyperparameter set per axis");
  GprModel m;
  m.options_ = options;
  m.X_ = X;
  m.Y_ = Y;
  const int dim = static_cast<int>(X.cols());
  m.mean_ = VectorXd::Zero(dim);
  m.scale_ = VectorXd::Ones(dim);
  if (options.standardize && X.rows() > 1) {
    m.mean_ = X.colwise().mean().transpose();
    for (int d = 0; d < dim; ++d) {
      const double sd = std::sqrt((X.col(d).array() - m.mean_[d]).square().sum() / static_cast<double>(X.rows()));
      m.scale_[d] = sd > 1e-12 ? sd : 1.0;
    }
  }
  m.Xs_ = (X.rowwise() - m.mean_.transpose()).array().rowwise() / m.scale_.transpose().array();

  if (hyper.empty()) {
    if (X.rows() < 20) throw InvalidInputError("hyperparameter optimization needs at least 20 points");
    Rng rng(derive_seed(options.seed, "gpr.subset"));
    const std::vector<int> idx = seeded_subset(static_cast<int>(X.rows()), options.max_opt_points, rng);
    MatrixXd Xsub(idx.size(), dim);
    for (std::size_t i = 0; i < idx.size(); ++i) Xsub.row(static_cast<int>(i)) = m.Xs_.row(idx[i]);
    for (int a = 0; a < 3; ++a) {
      VectorXd ysub(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) ysub[static_cast<int>(i)] = Y(idx[i], a);
      GprOptions axis_opt = options;
      axis_opt.seed = derive_seed(options.seed, "axis" + std::to_string(a));
      m.axes_[a].hyper = optimize_hyper(Xsub, ysub, axis_opt);
    }
  } else {
    for (int a = 0; a < 3; ++a) m.axes_[a].hyper = hyper[a];
  }
  m.factorize();
  return m;
}

Vec3 GprModel::predict_mean(const Eigen::VectorXd& x) const {
  const VectorXd xs = standardize(x);
  Vec3 out;
  for (int a = 0; a < 3; ++a) {
    const GprHyper& h = axes_[a].hyper;
    const VectorXd inv_l2 = h.length_scales.array().square().inverse();
    double acc = 0.0;
    for (int i = 0; i < Xs_.rows(); ++i) {
      const double d2 = ((Xs_.row(i).transpose() - xs).array().square() * inv_l2.array()).sum();
      acc += h.signal_variance * std::exp(-0.5 * d2) * axes_[a].beta[i];
    }
    out[a] = acc;
  }
  return out;
}

Vec3 GprModel::predict_variance(const Eigen::VectorXd& x) const {
  const VectorXd xs = standardize(x);
  Vec3 out;
  for (int a = 0; a < 3; ++a) {
    const GprHyper& h = axes_[a].hyper;
    VectorXd k(Xs_.rows());
    for (int i = 0; i < Xs_.rows(); ++i) k[i] = se_kernel(Xs_.row(i).transpose(), xs, h);
    const VectorXd v = axes_[a].chol.triangularView<Eigen::Lower>().solve(k);
    out[a] = std::max(0.0, h.signal_variance - v.squaredNorm());
  }
  return out;
}

Vec3 GprModel::loo_mae() const {
  Vec3 out;
  const int n = size();
  for (int a = 0; a < 3; ++a) {
    MatrixXd Kinv = MatrixXd::Identity(n, n);
    const auto tri = axes_[a].chol.triangularView<Eigen::Lower>();
    tri.solveInPlace(Kinv);
    axes_[a].chol.transpose().triangularView<Eigen::Upper>().solveInPlace(Kinv);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += std::abs(axes_[a].beta[i] / Kinv(i, i));
    out[a] = acc / n;
  }
  return out;
}

double GprModel::min_eigenvalue(int axis) const {
  MatrixXd K = kernel_matrix(Xs_, axes_[axis].hyper);
  K.diagonal().array() += axes_[axis].hyper.noise_variance + axes_[axis].jitter;
  return Eigen::SelfAdjointEigenSolver<MatrixXd>(K, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

std::string GprModel::to_json() const {
  nlohmann::json j;
  j["kind"] = "gpr";
  j["input_dim"] = input_dim();
  j["size"] = size();
  j["seed"] = options_.seed;
  j["standardize"] = options_.standardize;
  j["jitter"] = options_.jitter;
  // Stored row-major.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> xr = X_, yr = Y_;
  j["X"] = std::vector<double>(xr.data(), xr.data() + xr.size());
  j["Y"] = std::vector<double>(yr.data(), yr.data() + yr.size());
  for (int a = 0; a < 3; ++a) {
    const GprHyper& h = axes_[a].hyper;
    j["hyper"].push_back({{"signal_variance", h.signal_variance},
                          {"length_scales", std::vector<double>(h.length_scales.data(),
                                                                h.length_scales.data() + h.length_scales.size())},
                          {"noise_variance", h.noise_variance}});
  }
  return j.dump(1);
}

GprModel GprModel::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("GPR JSON parse error: ") + e.what());
  }
  if (!j.is_object() || j.value("kind", "") != "gpr") throw IoError("JSON document is not a GPR model");
  MatrixXd X, Y;
  std::vector<GprHyper> hyper;
  try {
    const int dim = j.at("input_dim");
    const int n = j.at("size");
    const auto xv = j.at("X").get<std::vector<double>>();
    const auto yv = j.at("Y").get<std::vector<double>>();
    if (static_cast<int>(xv.size()) != n * dim || static_cast<int>(yv.size()) != n * 3)
      throw IoError("GPR JSON arrays do not match the declared size");
    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    X = Eigen::Map<const RowMat>(xv.data(), n, dim);
    Y = Eigen::Map<const RowMat>(yv.data(), n, 3);
    for (const auto& h : j.at("hyper")) {
      GprHyper g;
      g.signal_variance = h.at("signal_variance");
      const auto ls = h.at("length_scales").get<std::vector<double>>();
      g.length_scales = Eigen::Map<const VectorXd>(ls.data(), static_cast<int>(ls.size()));
      g.noise_variance = h.at("noise_variance");
      hyper.push_back(g);
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("GPR JSON is missing fields: ") + e.what());
  }
  GprOptions opt;
  opt.seed = j.value("seed", std::uint64_t{0});
  opt.standardize = j.value("standardize", true);
  opt.jitter = j.value("jitter", 1e-10);
  return fit(X, Y, hyper, opt);
}

void GprModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write GPR model: " + path);
  out << to_json() << "\n";
}

GprModel GprModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open GPR model: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

CvResult cross_validate(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, int folds, const GprOptions& options) {
  const int n = static_cast<int>(X.rows());
  if (folds < 2 || folds > n) throw InvalidInputError("cross_validate: need 2 <= folds <= N");
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(derive_seed(options.seed, "gpr.cv"));
  for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[uniform_index(rng, static_cast<std::uint64_t>(i + 1))]);

  Vec3 abs_sum = Vec3::Zero();
  for (int f = 0; f < folds; ++f) {
    std::vector<int> train, test;
    for (int i = 0; i < n; ++i) (i % folds == f ? test : train).push_back(perm[i]);
    MatrixXd Xt(train.size(), X.cols()), Yt(train.size(), 3);
    for (std::size_t i = 0; i < train.size(); ++i) {
      Xt.row(static_cast<int>(i)) = X.row(train[i]);
      Yt.row(static_cast<int>(i)) = Y.row(train[i]);
    }
    const bool zero = Yt.cwiseAbs().maxCoeff() == 0.0;
    GprOptions fold_opt = options;
    fold_opt.seed = derive_seed(options.seed, "fold" + std::to_string(f));
    std::vector<GprHyper> fixed;
    if (zero || static_cast<int>(train.size()) < 20) {
      // Nothing to learn from (or too little for optimization): use a neutral kernel.
      GprHyper h;
      h.signal_variance = std::max(Yt.squaredNorm() / static_cast<double>(Yt.size()), 1e-12);
      h.length_scales = VectorXd::Ones(X.cols());
      h.noise_variance = 1e-2 * h.signal_variance;
      fixed.assign(3, h);
    }
    const GprModel m = GprModel::fit(Xt, Yt, fixed, fold_opt);
    for (int i : test) {
      const Vec3 pred = m.predict_mean(X.row(i).transpose());
      abs_sum += (pred - Y.row(i).transpose()).cwiseAbs();
    }
  }
  CvResult r;
  r.mae_axis = abs_sum / n;
  r.mae = r.mae_axis.mean();
  return r;
}

}  // namespace tdcr
