#include "tdcr/rnn.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tdcr/random.hpp"

namespace tdcr {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Parameter-shaped container used for gradients and Adam moments.
struct Params {
  MatrixXd w_ih, w_hh, w_ho;
  VectorXd b_h, b_o;

  static Params zeros_like(const RnnModel& m) {
    return {MatrixXd::Zero(m.w_ih.rows(), m.w_ih.cols()), MatrixXd::Zero(m.w_hh.rows(), m.w_hh.cols()),
            MatrixXd::Zero(m.w_ho.rows(), m.w_ho.cols()), VectorXd::Zero(m.b_h.size()),
            VectorXd::Zero(m.b_o.size())};
  }
  double squared_norm() const {
    return w_ih.squaredNorm() + w_hh.squaredNorm() + w_ho.squaredNorm() + b_h.squaredNorm() + b_o.squaredNorm();
  }
  void scale(double s) {
    w_ih *= s;
    w_hh *= s;
    w_ho *= s;
    b_h *= s;
    b_o *= s;
  }
};

// Flat views over model weights in a fixed order (used by the gradient check).
std::vector<double*> weight_pointers(RnnModel& m) {
  std::vector<double*> out;
  for (MatrixXd* w : {&m.w_ih, &m.w_hh, &m.w_ho})
    for (int i = 0; i < w->size(); ++i) out.push_back(w->data() + i);
  for (VectorXd* b : {&m.b_h, &m.b_o})
    for (int i = 0; i < b->size(); ++i) out.push_back(b->data() + i);
  return out;
}

std::vector<double> flatten(const Params& g) {
  std::vector<double> out;
  for (const MatrixXd* w : {&g.w_ih, &g.w_hh, &g.w_ho}) out.insert(out.end(), w->data(), w->data() + w->size());
  for (const VectorXd* b : {&g.b_h, &g.b_o}) out.insert(out.end(), b->data(), b->data() + b->size());
  return out;
}

// Forward pass over normalized rows [begin, end) from hidden h0, accumulating gradients of
// loss = sum of squared errors * loss_scale. Returns the unscaled squared-error sum.
double segment_pass(const RnnModel& m, const MatrixXd& X, const MatrixXd& Y, int begin, int end, VectorXd& h,
                    bool reset_each, Params* grad, double loss_scale) {
  const int T = end - begin;
  const int H = m.hidden_dim();
  MatrixXd hs(H, T + 1);  // hs.col(t) is the hidden state before step t
  MatrixXd err(m.output_dim(), T);
  double sse = 0.0;
  hs.col(0) = h;
  for (int t = 0; t < T; ++t) {
    const VectorXd prev = reset_each ? VectorXd::Zero(H) : VectorXd(hs.col(t));
    const VectorXd a = m.w_ih * X.row(begin + t).transpose() + m.w_hh * prev + m.b_h;
    hs.col(t + 1) = a.array().tanh();
    err.col(t) = m.w_ho * hs.col(t + 1) + m.b_o - Y.row(begin + t).transpose();
    sse += err.col(t).squaredNorm();
  }
  h = hs.col(T);
  if (!grad) return sse;

  VectorXd dh_next = VectorXd::Zero(H);
  for (int t = T - 1; t >= 0; --t) {
    const VectorXd dy = 2.0 * loss_scale * err.col(t);
    grad->w_ho += dy * hs.col(t + 1).transpose();
    grad->b_o += dy;
    VectorXd dh = m.w_ho.transpose() * dy;
    if (!reset_each) dh += dh_next;
    const VectorXd da = dh.cwiseProduct((1.0 - hs.col(t + 1).array().square()).matrix());
    const VectorXd prev = reset_each ? VectorXd::Zero(H) : VectorXd(hs.col(t));
    grad->w_ih += da * X.row(begin + t);
    grad->w_hh += da * prev.transpose();
    grad->b_h += da;
    dh_next = m.w_hh.transpose() * da;
  }
  return sse;
}

struct Adam {
  Params m, v;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long t = 0;

  template <class M>
  static void update(M& w, const M& g, M& mm, M& vv, double lr, double b1, double b2, double eps, double c1,
                     double c2) {
    mm = b1 * mm + (1.0 - b1) * g;
    vv = b2 * vv + (1.0 - b2) * g.cwiseProduct(g);
    w.array() -= lr * (mm.array() / c1) / ((vv.array() / c2).sqrt() + eps);
  }

  void step(RnnModel& model, const Params& g, double lr) {
    ++t;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    update(model.w_ih, g.w_ih, m.w_ih, v.w_ih, lr, beta1, beta2, eps, c1, c2);
    update(model.w_hh, g.w_hh, m.w_hh, v.w_hh, lr, beta1, beta2, eps, c1, c2);
    update(model.w_ho, g.w_ho, m.w_ho, v.w_ho, lr, beta1, beta2, eps, c1, c2);
    update(model.b_h, g.b_h, m.b_h, v.b_h, lr, beta1, beta2, eps, c1, c2);
    update(model.b_o, g.b_o, m.b_o, v.b_o, lr, beta1, beta2, eps, c1, c2);
  }
};

void fit_normalization(const MatrixXd& rows, VectorXd& mean, VectorXd& sd) {
  mean = rows.colwise().mean().transpose();
  sd.resize(rows.cols());
  for (int d = 0; d < rows.cols(); ++d) {
    const double s = std::sqrt((rows.col(d).array() - mean[d]).square().sum() / static_cast<double>(rows.rows()));
    sd[d] = s > 1e-12 ? s : 1.0;
  }
}

MatrixXd normalize_rows(const MatrixXd& rows, const VectorXd& mean, const VectorXd& sd) {
  return (rows.rowwise() - mean.transpose()).array().rowwise() / sd.transpose().array();
}

std::vector<double> to_vec(const MatrixXd& m) {
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> r = m;
  return std::vector<double>(r.data(), r.data() + r.size());
}

MatrixXd from_vec(const std::vector<double>& v, int rows, int cols) {
  if (static_cast<int>(v.size()) != rows * cols) throw IoError("RNN JSON array has the wrong size");
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  return Eigen::Map<const RowMat>(v.data(), rows, cols);
}

}  // namespace

std::string to_string(Direction d) { return d == Direction::kForward ? "forward" : "inverse"; }

Direction direction_from_string(const std::string& text) {
  if (text == "forward") return Direction::kForward;
  if (text == "inverse") return Direction::kInverse;
  throw InvalidInputError("direction must be 'forward' or 'inverse'");
}

void TrainConfig::validate() const {
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw InvalidInputError("train.split_ratio must lie in (0, 1)");
  if (patience >= max_epochs || patience < 1) throw InvalidInputError("train.patience must be in [1, max_epochs)");
  if (!(learning_rate > 0.0)) throw InvalidInputError("train.learning_rate must be positive");
  if (sequence_length < 1 || hidden_dim < 1) throw InvalidInputError("train sequence length and width must be >= 1");
}

Eigen::VectorXd RnnModel::normalize_input(const Eigen::VectorXd& x) const {
  return (x - in_mean).cwiseQuotient(in_std);
}

Eigen::VectorXd RnnModel::denormalize_output(const Eigen::VectorXd& y) const {
  return y.cwiseProduct(out_std) + out_mean;
}

Eigen::VectorXd RnnModel::normalize_output(const Eigen::VectorXd& y) const {
  return (y - out_mean).cwiseQuotient(out_std);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> RnnModel::predict(const Eigen::VectorXd& input,
                                                              const Eigen::VectorXd& hidden) const {
  if (input.size() != input_dim() || hidden.size() != hidden_dim())
    throw InvalidInputError("RNN predict: dimension mismatch");
  if (!input.allFinite()) throw InvalidInputError("RNN predict: non-finite input");
  const VectorXd prev = reset_per_pair ? VectorXd::Zero(hidden_dim()) : hidden;
  const VectorXd h = (w_ih * normalize_input(input) + w_hh * prev + b_h).array().tanh();
  return {denormalize_output(w_ho * h + b_o), h};
}

void RnnModel::validate() const {
  const int H = hidden_dim();
  if (w_hh.cols() != H || w_ho.cols() != H || b_h.size() != H || b_o.size() != output_dim() ||
      in_mean.size() != input_dim() || in_std.size() != input_dim() || out_mean.size() != output_dim() ||
      out_std.size() != output_dim()) {
    throw InvalidInputError("RNN dimensions are inconsistent");
  }
  if (!(in_std.minCoeff() > 0.0) || !(out_std.minCoeff() > 0.0)) throw InvalidInputError("RNN stds must be positive");
  if (!w_ih.allFinite() || !w_hh.allFinite() || !w_ho.allFinite() || !b_h.allFinite() || !b_o.allFinite())
    throw InvalidInputError("RNN weights must be finite");
}

RnnModel init_rnn(Direction direction, int hidden_dim, std::uint64_t seed) {
  const int in = direction == Direction::kForward ? 7 : 6;
  const int out = direction == Direction::kForward ? 3 : 4;
  Rng rng(derive_seed(seed, "rnn.init"));
  const double a = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  auto fill = [&](MatrixXd& m) {
    for (int j = 0; j < m.cols(); ++j)
      for (int i = 0; i < m.rows(); ++i) m(i, j) = uniform(rng, -a, a);
  };
  RnnModel m;
  m.direction = direction;
  m.seed = seed;
  m.w_ih.resize(hidden_dim, in);
  m.w_hh.resize(hidden_dim, hidden_dim);
  m.w_ho.resize(out, hidden_dim);
  MatrixXd bh(hidden_dim, 1), bo(out, 1);
  fill(m.w_ih);
  fill(m.w_hh);
  fill(m.w_ho);
  fill(bh);
  fill(bo);
  m.b_h = bh.col(0);
  m.b_o = bo.col(0);
  m.in_mean = VectorXd::Zero(in);
  m.in_std = VectorXd::Ones(in);
  m.out_mean = VectorXd::Zero(out);
  m.out_std = VectorXd::Ones(out);
  return m;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> make_sequences(const Dataset& data, Direction direction) {
  const int n = static_cast<int>(data.size());
  const bool fwd = direction == Direction::kForward;
  MatrixXd X(n, fwd ? 7 : 6), Y(n, fwd ? 3 : 4);
  for (int i = 0; i < n; ++i) {
    const Sample& s = data.samples[i];
    if (fwd) {
      X.row(i) << s.lengths.transpose(), s.x.transpose();
      Y.row(i) = s.x_next.transpose();
    } else {
      X.row(i) << s.x.transpose(), s.x_next.transpose();
      Y.row(i) = s.lengths.transpose();
    }
  }
  return {X, Y};
}

TrainResult train_rnn(const Dataset& data, Direction direction, const TrainConfig& config) {
  config.validate();
  if (data.size() < 100) throw InvalidInputError("RNN training needs at least 100 samples");
  data.validate();
  Dataset split_src = data;
  split_src.split_ratio = config.split_ratio;
  const auto [train, val] = split_src.split();
  auto [Xtr_raw, Ytr_raw] = make_sequences(train, direction);

  TrainResult res;
  RnnModel model = init_rnn(direction, config.hidden_dim, config.seed);
  model.reset_per_pair = config.reset_per_pair;
  fit_normalization(Xtr_raw, model.in_mean, model.in_std);
  fit_normalization(Ytr_raw, model.out_mean, model.out_std);
  const MatrixXd Xtr = normalize_rows(Xtr_raw, model.in_mean, model.in_std);
  const MatrixXd Ytr = normalize_rows(Ytr_raw, model.out_mean, model.out_std);
  const int n = static_cast<int>(Xtr.rows());
  const int T = config.sequence_length;

  Adam adam{Params::zeros_like(model), Params::zeros_like(model)};
  res.model = model;
  res.best_val_mae = std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    VectorXd h = model.zero_hidden();
    double sse = 0.0;
    for (int begin = 0; begin < n; begin += T) {
      const int end = std::min(n, begin + T);
      Params g = Params::zeros_like(model);
      const double scale = 1.0 / (static_cast<double>(end - begin) * model.output_dim());
      sse += segment_pass(model, Xtr, Ytr, begin, end, h, config.reset_per_pair, &g, scale);
      const double gn = std::sqrt(g.squared_norm());
      if (!std::isfinite(gn)) {
        res.train_loss.push_back(std::numeric_limits<double>::quiet_NaN());
        throw TrainingFailedError("RNN training diverged (non-finite gradient)", res.train_loss);
      }
      if (gn > config.grad_clip) g.scale(config.grad_clip / gn);
      adam.step(model, g, config.learning_rate);
    }
    const double loss = sse / (static_cast<double>(n) * model.output_dim());
    res.train_loss.push_back(loss);
    if (!std::isfinite(loss)) throw TrainingFailedError("RNN training diverged (loss is not finite)", res.train_loss);
    const double mae = evaluate_mae(model, val);
    res.val_mae.push_back(mae);
    if (mae < res.best_val_mae) {
      res.best_val_mae = mae;
      res.best_epoch = epoch;
      res.model = model;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  return res;
}

double evaluate_mae(const RnnModel& model, const Dataset& data) {
  if (data.empty()) return 0.0;
  const auto [X, Y] = make_sequences(data, model.direction);
  VectorXd h = model.zero_hidden();
  double acc = 0.0;
  for (int i = 0; i < X.rows(); ++i) {
    auto [y, h_next] = model.predict(X.row(i).transpose(), h);
    acc += (y - Y.row(i).transpose()).cwiseAbs().sum();
    h = std::move(h_next);
  }
  return acc / (static_cast<double>(X.rows()) * model.output_dim());
}

double gradient_check(const RnnModel& model, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                      double step, double* max_abs_deviation) {
  if (inputs.rows() < 10 || inputs.rows() != targets.rows()) throw InvalidInputError("gradient_check needs >= 10 rows");
  model.validate();
  const MatrixXd X = normalize_rows(inputs, model.in_mean, model.in_std);
  const MatrixXd Y = normalize_rows(targets, model.out_mean, model.out_std);
  const int n = static_cast<int>(X.rows());
  const double scale = 1.0 / (static_cast<double>(n) * model.output_dim());

  Params g = Params::zeros_like(model);
  VectorXd h = model.zero_hidden();
  segment_pass(model, X, Y, 0, n, h, model.reset_per_pair, &g, scale);
  const std::vector<double> analytic = flatten(g);

  RnnModel probe = model;
  std::vector<double*> w = weight_pointers(probe);
  auto loss = [&]() {
    VectorXd h0 = probe.zero_hidden();
    return scale * segment_pass(probe, X, Y, 0, n, h0, probe.reset_per_pair, nullptr, 0.0);
  };
  double worst_rel = 0.0, worst_abs = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double orig = *w[i];
    *w[i] = orig + step;
    const double lp = loss();
    *w[i] = orig - step;
    const double lm = loss();
    *w[i] = orig;
    const double numeric = (lp - lm) / (2.0 * step);
    const double diff = std::abs(numeric - analytic[i]);
    worst_abs = std::max(worst_abs, diff);
    worst_rel = std::max(worst_rel, diff / std::max({std::abs(numeric), std::abs(analytic[i]), 1e-6}));
  }
  if (max_abs_deviation) *max_abs_deviation = worst_abs;
  return worst_rel;
}

std::string RnnModel::to_json() const {
  nlohmann::json j;
  j["kind"] = "rnn";
  j["direction"] = to_string(direction);
  j["input_dim"] = input_dim();
  j["hidden_dim"] = hidden_dim();
  j["output_dim"] = output_dim();
  j["w_ih"] = to_vec(w_ih);
  j["w_hh"] = to_vec(w_hh);
  j["b_h"] = std::vector<double>(b_h.data(), b_h.data() + b_h.size());
  j["w_ho"] = to_vec(w_ho);
  j["b_o"] = std::vector<double>(b_o.data(), b_o.data() + b_o.size());
  j["in_mean"] = std::vector<double>(in_mean.data(), in_mean.data() + in_mean.size());
  j["in_std"] = std::vector<double>(in_std.data(), in_std.data() + in_std.size());
  j["out_mean"] = std::vector<double>(out_mean.data(), out_mean.data() + out_mean.size());
  j["out_std"] = std::vector<double>(out_std.data(), out_std.data() + out_std.size());
  j["reset_per_pair"] = reset_per_pair;
  j["seed"] = seed;
  return j.dump(1);
}

RnnModel RnnModel::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("RNN JSON parse error: ") + e.what());
  }
  if (!j.is_object() || j.value("kind", "") != "rnn") throw IoError("JSON document is not an RNN model");
  RnnModel m;
  try {
    m.direction = direction_from_string(j.at("direction"));
    const int in = j.at("input_dim"), hid = j.at("hidden_dim"), out = j.at("output_dim");
    m.w_ih = from_vec(j.at("w_ih"), hid, in);
    m.w_hh = from_vec(j.at("w_hh"), hid, hid);
    m.w_ho = from_vec(j.at("w_ho"), out, hid);
    m.b_h = from_vec(j.at("b_h"), hid, 1).col(0);
    m.b_o = from_vec(j.at("b_o"), out, 1).col(0);
    m.in_mean = from_vec(j.at("in_mean"), in, 1).col(0);
    m.in_std = from_vec(j.at("in_std"), in, 1).col(0);
    m.out_mean = from_vec(j.at("out_mean"), out, 1).col(0);
    m.out_std = from_vec(j.at("out_std"), out, 1).col(0);
    m.reset_per_pair = j.value("reset_per_pair", false);
    m.seed = j.value("seed", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("RNN JSON is missing fields: ") + e.what());
  }
  m.validate();
  return m;
}

void RnnModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write RNN model: " + path);
  out << to_json() << "\n";
}

RnnModel RnnModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open RNN model: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace tdcr
