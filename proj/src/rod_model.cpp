#include "tdcr/rod_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace tdcr {

namespace {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

Mat3 hat(const Vec3& x) {
  Mat3 m;
  m << 0.0, -x.z(), x.y(), x.z(), 0.0, -x.x(), -x.y(), x.x(), 0.0;
  return m;
}

// Rodrigues exponential and the integral of exp(hat(phi) * sigma) over sigma in [0, 1].
void so3_exp(const Vec3& phi, Mat3& rot, Mat3& left_jacobian) {
  const double theta2 = phi.squaredNorm();
  const Mat3 k = hat(phi);
  const Mat3 k2 = k * k;
  double a, b, c;
  if (theta2 < 1e-12) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
    c = 1.0 / 6.0 - theta2 / 120.0;
  } else {
    const double theta = std::sqrt(theta2);
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
    c = (theta - std::sin(theta)) / (theta2 * theta);
  }
  rot = Mat3::Identity() + a * k + b * k2;
  left_jacobian = Mat3::Identity() + b * k + c * k2;
}

Mat3 orthonormalize(const Mat3& r) {
  return Eigen::Quaterniond(r).normalized().toRotationMatrix();
}

bool all_finite(const Eigen::VectorXd& x) { return x.allFinite(); }

// BDF history combination x_h so that x_t = c0 * x + x_h.
struct HistoryTerms {
  std::vector<Vec3> v, u, q, w, v_s, u_s;
};

struct Model {
  const RodParams* params = nullptr;
  Mat3 kse, kbt, bse, bbt, rho_j;
  double rho_a = 0.0;
  std::array<Vec3, kNumTendons> r{};
  std::array<bool, kNumTendons> active{};
  Vec4 tension = Vec4::Zero();
  double c0 = 0.0;
  const HistoryTerms* hist = nullptr;

  Model(const RodParams& p, const std::array<bool, kNumTendons>& mask, const Vec4& tau, double c0_in,
        const HistoryTerms* h)
      : params(&p), active(mask), tension(tau), c0(c0_in), hist(h) {
    kse = p.stiffness_se();
    kbt = p.stiffness_bt();
    bse = p.damping_se_matrix();
    bbt = p.damping_bt_matrix();
    rho_j = p.rotational_inertia();
    rho_a = p.density * p.area;
    r = p.tendon_offsets;
  }
};

struct NodeRates {
  Vec3 v_s, u_s, q_s, w_s;
};

NodeRates node_rates(const Model& m, int k, const Mat3& R, const Vec3& v, const Vec3& u, const Vec3& q,
                     const Vec3& w) {
  Vec3 vh = Vec3::Zero(), uh = Vec3::Zero(), qh = Vec3::Zero(), wh = Vec3::Zero();
  Vec3 vsh = Vec3::Zero(), ush = Vec3::Zero();
  if (m.hist) {
    vh = m.hist->v[k];
    uh = m.hist->u[k];
    qh = m.hist->q[k];
    wh = m.hist->w[k];
    vsh = m.hist->v_s[k];
    ush = m.hist->u_s[k];
  }
  const Vec3 v_t = m.c0 * v + vh;
  const Vec3 u_t = m.c0 * u + uh;
  const Vec3 q_t = m.c0 * q + qh;
  const Vec3 w_t = m.c0 * w + wh;

  const Vec3 nb = m.kse * (v - Vec3::UnitZ()) + m.bse * v_t;
  const Vec3 mb = m.kbt * u + m.bbt * u_t;

  Mat3 a_sum = Mat3::Zero(), g_sum = Mat3::Zero(), h_sum = Mat3::Zero();
  Vec3 a = Vec3::Zero(), b = Vec3::Zero();
  for (int i = 0; i < kNumTendons; ++i) {
    if (!m.active[i]) continue;
    const Vec3& ri = m.r[i];
    const Vec3 pb_s = u.cross(ri) + v;
    const double nrm = pb_s.norm();
    const Mat3 hp = hat(pb_s);
    const Mat3 ai_mat = -m.tension[i] * hp * hp / (nrm * nrm * nrm);
    const Mat3 gi = -ai_mat * hat(ri);
    const Vec3 ai = ai_mat * u.cross(pb_s);
    a += ai;
    b += ri.cross(ai);
    a_sum += ai_mat;
    g_sum += gi;
    h_sum += hat(ri) * gi;
  }

  Mat6 lhs;
  lhs.block<3, 3>(0, 0) = m.kse + m.c0 * m.bse + a_sum;
  lhs.block<3, 3>(0, 3) = g_sum;
  lhs.block<3, 3>(3, 0) = g_sum.transpose();
  lhs.block<3, 3>(3, 3) = m.kbt + m.c0 * m.bbt + h_sum;

  const Vec3 gravity_body = R.transpose() * (m.rho_a * m.params->gravity);
  Vec6 rhs;
  rhs.head<3>() = m.rho_a * (q_t + w.cross(q)) - u.cross(nb) - gravity_body - a - m.bse * vsh;
  rhs.tail<3>() = m.rho_j * w_t + w.cross(m.rho_j * w) - u.cross(mb) - v.cross(nb) - b - m.bbt * ush;

  const Vec6 sol = lhs.partialPivLu().solve(rhs);
  NodeRates out;
  out.v_s = sol.head<3>();
  out.u_s = sol.tail<3>();
  out.q_s = v_t - u.cross(q) + w.cross(v);
  out.w_s = u_t - u.cross(w);
  return out;
}

double elastic_force_magnitude(const Model& m, const Vec3& v) {
  const double n = (m.kse * (v - Vec3::UnitZ())).norm();
  if (!std::isfinite(n)) throw NumericalError("non-finite internal force during integration");
  return n;
}

void resize_state(RodState& s, int n_nodes) {
  s.p.assign(n_nodes, Vec3::Zero());
  s.R.assign(n_nodes, Mat3::Identity());
  s.v.assign(n_nodes, Vec3::Zero());
  s.u.assign(n_nodes, Vec3::Zero());
  s.q.assign(n_nodes, Vec3::Zero());
  s.w.assign(n_nodes, Vec3::Zero());
  s.v_s.assign(n_nodes, Vec3::Zero());
  s.u_s.assign(n_nodes, Vec3::Zero());
  s.ds.assign(n_nodes - 1, 0.0);
}

// Advances one node with the Lie-group form of explicit Euler (exact rotation increment).
void euler_step(RodState& s, int k, const NodeRates& rates, double ds) {
  Mat3 rot, jac;
  so3_exp(s.u[k] * ds, rot, jac);
  s.p[k + 1] = s.p[k] + s.R[k] * (jac * s.v[k]) * ds;
  s.R[k + 1] = orthonormalize(s.R[k] * rot);
  s.v[k + 1] = s.v[k] + rates.v_s * ds;
  s.u[k + 1] = s.u[k] + rates.u_s * ds;
  s.q[k + 1] = s.q[k] + rates.q_s * ds;
  s.w[k + 1] = s.w[k] + rates.w_s * ds;
}

void integrate(const Model& m, const Vec3& v0, const Vec3& u0, const ShootingOptions& opt, RodState& s) {
  const RodParams& prm = *m.params;
  const int nps = prm.nodes_per_section;
  const double ds0 = prm.node_spacing();
  resize_state(s, prm.n_nodes());
  s.v[0] = v0;
  s.u[0] = u0;

  auto check_ds = [&](double ds, int k) {
    if (!(ds > 0.0)) {
      std::ostringstream os;
      os << "spine compression drove ds[" << k << "] to " << ds;
      throw OverCompressionError(os.str(), k);
    }
  };

  for (int sec = 0; sec < prm.n_sections; ++sec) {
    const int k0 = sec * nps;
    if (prm.compression_mode == CompressionMode::kPoint) {
      for (int j = 0; j < nps; ++j) {
        const int k = k0 + j;
        const NodeRates rates = node_rates(m, k, s.R[k], s.v[k], s.u[k], s.q[k], s.w[k]);
        s.v_s[k] = rates.v_s;
        s.u_s[k] = rates.u_s;
        const double lc = spine_compression(elastic_force_magnitude(m, s.v[k]), prm.c_spine,
                                            prm.compression_saturation_force);
        const double ds = ds0 - lc / nps;
        check_ds(ds, k);
        s.ds[k] = ds;
        euler_step(s, k, rates, ds);
      }
      continue;
    }

    // Section mode: the force at the section entry does not depend on this section's ds, so it
    // seeds the fixed point; each pass re-integrates only this section.
    double lc = spine_compression(elastic_force_magnitude(m, s.v[k0]), prm.c_spine,
                                  prm.compression_saturation_force);
    for (int sweep = 0; sweep < opt.max_compression_sweeps; ++sweep) {
      const double ds = ds0 - lc / nps;
      check_ds(ds, k0);
      double force_sum = 0.0;
      for (int j = 0; j < nps; ++j) {
        const int k = k0 + j;
        force_sum += elastic_force_magnitude(m, s.v[k]);
        const NodeRates rates = node_rates(m, k, s.R[k], s.v[k], s.u[k], s.q[k], s.w[k]);
        s.v_s[k] = rates.v_s;
        s.u_s[k] = rates.u_s;
        s.ds[k] = ds;
        euler_step(s, k, rates, ds);
      }
      const double lc_new =
          spine_compression(force_sum / nps, prm.c_spine, prm.compression_saturation_force);
      const bool done = std::abs(lc_new - lc) <= opt.compression_tolerance;
      lc = lc_new;
      if (done) break;
    }
  }
  const int last = prm.n_nodes() - 1;
  const NodeRates tip_rates = node_rates(m, last, s.R[last], s.v[last], s.u[last], s.q[last], s.w[last]);
  s.v_s[last] = tip_rates.v_s;
  s.u_s[last] = tip_rates.u_s;
}

// Force and moment balance at the tip disk, expressed in the tip frame.
Vec6 tip_wrench_error(const Model& m, const RodState& s) {
  const RodParams& prm = *m.params;
  const int k = s.n_nodes() - 1;
  const Vec3& v = s.v[k];
  const Vec3& u = s.u[k];
  Vec3 vh = Vec3::Zero(), uh = Vec3::Zero(), qh = Vec3::Zero();
  if (m.hist) {
    vh = m.hist->v[k];
    uh = m.hist->u[k];
    qh = m.hist->q[k];
  }
  const Vec3 v_t = m.c0 * v + vh;
  const Vec3 u_t = m.c0 * u + uh;
  const Vec3 q_t = m.c0 * s.q[k] + qh;
  const Vec3 nb = m.kse * (v - Vec3::UnitZ()) + m.bse * v_t;
  const Vec3 mb = m.kbt * u + m.bbt * u_t;

  Vec3 force = Vec3::Zero(), moment = Vec3::Zero();
  for (int i = 0; i < kNumTendons; ++i) {
    if (!m.active[i]) continue;
    const Vec3 pb_s = u.cross(m.r[i]) + v;
    const Vec3 fi = -m.tension[i] * pb_s / pb_s.norm();
    force += fi;
    moment += m.r[i].cross(fi);
  }
  if (prm.tip_mass > 0.0) {
    force += prm.tip_mass * (s.R[k].transpose() * prm.gravity - (q_t + s.w[k].cross(s.q[k])));
  }
  Vec6 err;
  err.head<3>() = (nb - force) / prm.force_scale();
  err.tail<3>() = (mb - moment) / prm.moment_scale();
  return err;
}

struct Problem {
  const RodParams* params;
  std::array<bool, kNumTendons> mask;
  std::vector<int> active;      // indices of tendons whose tension is unknown
  bool length_constrained;      // false: tensions are prescribed
  Vec4 target_lengths = Vec4::Zero();
  Vec4 fixed_tensions = Vec4::Zero();
  double c0 = 0.0;
  const HistoryTerms* hist = nullptr;
  ShootingOptions options;

  int n_unknowns() const { return 6 + (length_constrained ? static_cast<int>(active.size()) : 0); }

  Vec4 tensions_from(const Eigen::VectorXd& x) const {
    if (!length_constrained) return fixed_tensions;
    Vec4 t = Vec4::Zero();
    for (size_t j = 0; j < active.size(); ++j) t[active[j]] = x[6 + static_cast<int>(j)];
    return t;
  }

  Eigen::VectorXd residual(const Eigen::VectorXd& x, RodState* out) const {
    const Vec4 tau = tensions_from(x);
    Model m(*params, mask, tau, c0, hist);
    RodState s;
    integrate(m, x.segment<3>(0), x.segment<3>(3), options, s);
    Eigen::VectorXd r(n_unknowns());
    r.head<6>() = tip_wrench_error(m, s);
    if (length_constrained) {
      for (size_t j = 0; j < active.size(); ++j) {
        const int i = active[j];
        r[6 + static_cast<int>(j)] =
            (tendon_path_length(s, i, *params) - target_lengths[i]) / params->total_length;
      }
    }
    if (out) {
      s.v0 = x.segment<3>(0);
      s.u0 = x.segment<3>(3);
      s.tensions = tau;
      *out = std::move(s);
    }
    return r;
  }
};

// Residual evaluation that reports failure instead of throwing for trial points.
bool try_residual(const Problem& pb, const Eigen::VectorXd& x, Eigen::VectorXd& r) {
  try {
    r = pb.residual(x, nullptr);
  } catch (const OverCompressionError&) {
    return false;
  } catch (const NumericalError&) {
    return false;
  }
  return all_finite(r);
}

Eigen::MatrixXd fd_jacobian(const Problem& pb, const Eigen::VectorXd& x, const Eigen::VectorXd& r0) {
  const int n = static_cast<int>(x.size());
  Eigen::MatrixXd jac(r0.size(), n);
  for (int j = 0; j < n; ++j) {
    const double h = pb.options.fd_step * std::max(1.0, std::abs(x[j]));
    Eigen::VectorXd xp = x;
    xp[j] += h;
    Eigen::VectorXd rp;
    if (!try_residual(pb, xp, rp)) {
      xp[j] = x[j] - h;
      if (!try_residual(pb, xp, rp)) throw NumericalError("finite-difference probe failed on both sides");
      jac.col(j) = (r0 - rp) / h;
    } else {
      jac.col(j) = (rp - r0) / h;
    }
  }
  return jac;
}

struct NewtonOutcome {
  Eigen::VectorXd x;
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Damped Newton with a finite-difference Jacobian. A cached Jacobian is tried first and
// refreshed as soon as it stops giving good contraction.
NewtonOutcome newton(const Problem& pb, Eigen::VectorXd x, ShootingCache* cache) {
  const ShootingOptions& opt = pb.options;
  Eigen::VectorXd r;
  if (!try_residual(pb, x, r)) {
    throw NonConvergenceError("initial guess is not integrable", std::numeric_limits<double>::infinity(), 0);
  }
  double rn = r.norm();
  Eigen::MatrixXd jac;
  bool have_jac = false;
  bool fresh = false;
  if (cache && cache->valid && cache->mask == pb.mask && cache->jacobian.rows() == r.size() &&
      cache->jacobian.cols() == x.size()) {
    jac = cache->jacobian;
    have_jac = true;
  }

  int it = 0;
  while (rn > opt.tolerance && it < opt.max_iterations) {
    ++it;
    if (!have_jac) {
      jac = fd_jacobian(pb, x, r);
      have_jac = true;
      fresh = true;
    }
    const Eigen::VectorXd dx = -jac.fullPivLu().solve(r);
    double lambda = 1.0;
    bool accepted = false;
    for (int h = 0; h <= opt.max_step_halvings; ++h) {
      Eigen::VectorXd xt = x + lambda * dx;
      Eigen::VectorXd rt;
      if (try_residual(pb, xt, rt)) {
        const double rtn = rt.norm();
        if (rtn < rn) {
          // A stale Jacobian that only gives weak contraction is refreshed next round.
          if (!fresh && (lambda < 1.0 || rtn > 0.5 * rn)) have_jac = false;
          x = std::move(xt);
          r = std::move(rt);
          rn = rtn;
          accepted = true;
          break;
        }
      }
      lambda *= 0.5;
    }
    if (!accepted) {
      if (!fresh) {
        have_jac = false;  // retry with an up-to-date Jacobian
        continue;
      }
      break;
    }
    fresh = false;
  }
  if (cache && have_jac) {
    cache->jacobian = jac;
    cache->mask = pb.mask;
    cache->valid = true;
  }
  return {x, rn, it, rn <= opt.tolerance};
}

HistoryTerms make_history(const RodState& s, double dt) {
  // BDF-2: x_t = (3 x_{n+1} - 4 x_n + x_{n-1}) / (2 dt). Without a second level the
  // rod is taken to have been at rest, i.e. x_{n-1} = x_n.
  HistoryTerms h;
  const bool has_prev = !s.previous.empty();
  auto combine = [&](const std::vector<Vec3>& cur, const std::vector<Vec3>& prev) {
    std::vector<Vec3> out(cur.size());
    for (size_t k = 0; k < cur.size(); ++k) {
      const Vec3& older = has_prev ? prev[k] : cur[k];
      out[k] = (-4.0 * cur[k] + older) / (2.0 * dt);
    }
    return out;
  };
  h.v = combine(s.v, s.previous.v);
  h.u = combine(s.u, s.previous.u);
  h.q = combine(s.q, s.previous.q);
  h.w = combine(s.w, s.previous.w);
  h.v_s = combine(s.v_s, s.previous.v_s);
  h.u_s = combine(s.u_s, s.previous.u_s);
  return h;
}

Problem make_length_problem(const RodParams& params, const TendonCommand& command,
                            const ShootingOptions& options) {
  Problem pb{&params, command.actuated, {}, true, command.lengths, Vec4::Zero(), 0.0, nullptr, options};
  for (int i = 0; i < kNumTendons; ++i)
    if (command.actuated[i]) pb.active.push_back(i);
  return pb;
}

Eigen::VectorXd initial_guess(const Problem& pb, const RodState* warm) {
  Eigen::VectorXd x(pb.n_unknowns());
  x.head<3>() = warm ? warm->v0 : Vec3::UnitZ();
  x.segment<3>(3) = warm ? warm->u0 : Vec3::Zero();
  // Cold guess: the pulling tension that accounts for each tendon's shortening.
  const RodParams& prm = *pb.params;
  const double r = prm.tendon_offsets[0].norm();
  const double compliance = prm.c_spine * prm.n_sections +
                            prm.total_length * r * r / (prm.youngs_modulus * std::min(prm.ixx, prm.iyy));
  for (size_t j = 0; j < pb.active.size() && pb.length_constrained; ++j) {
    const int i = pb.active[j];
    x[6 + static_cast<int>(j)] =
        warm ? std::max(0.0, warm->tensions[i])
             : std::max(0.0, rest_tendon_length(prm) - pb.target_lengths[i]) / compliance;
  }
  // Start the spine compressed by the guessed tensions, clear of the kink of |n| at zero force.
  const double pull = pb.length_constrained ? x.tail(pb.active.size()).sum() : pb.fixed_tensions.sum();
  if (!warm && pull > 0.0)
    x[2] = 1.0 - std::max(pull / (prm.youngs_modulus * prm.area), 10.0 * pb.options.fd_step);
  return x;
}

void check_slack(const Problem& pb, const Eigen::VectorXd& x) {
  if (!pb.length_constrained) return;
  int worst = -1;
  double worst_tau = -1e-8;
  for (size_t j = 0; j < pb.active.size(); ++j) {
    const double tau = x[6 + static_cast<int>(j)];
    if (tau < worst_tau) {
      worst_tau = tau;
      worst = pb.active[j];
    }
  }
  if (worst >= 0) {
    std::ostringstream os;
    os << "tendon " << worst << " would need negative tension " << worst_tau << " N";
    throw SlackTendonError(os.str(), worst, worst_tau);
  }
}

ShootingResult finish(const Problem& pb, const NewtonOutcome& out) {
  ShootingResult res;
  res.residual_norm = out.residual_norm;
  res.iterations = out.iterations;
  res.converged = out.converged;
  pb.residual(out.x, &res.state);
  res.tensions = res.state.tensions;
  return res;
}

}  // namespace

Mat3 RodParams::stiffness_se() const {
  const double g = shear_modulus();
  return Vec3(g * area, g * area, youngs_modulus * area).asDiagonal();
}

Mat3 RodParams::stiffness_bt() const {
  return Vec3(youngs_modulus * ixx, youngs_modulus * iyy, shear_modulus() * polar_moment).asDiagonal();
}

Mat3 RodParams::rotational_inertia() const {
  return Vec3(density * ixx, density * iyy, density * polar_moment).asDiagonal();
}

double RodParams::force_scale() const {
  return youngs_modulus * std::min(ixx, iyy) / (total_length * total_length);
}

double RodParams::moment_scale() const { return youngs_modulus * std::min(ixx, iyy) / total_length; }

void RodParams::validate() const {
  auto fail = [](const std::string& msg) { throw InvalidInputError("RodParams: " + msg); };
  if (!(total_length > 0.0)) fail("total_length must be positive");
  if (n_sections < 1 || nodes_per_section < 1) fail("n_sections and nodes_per_section must be >= 1");
  if (!(section_length > 0.0)) fail("section_length must be positive");
  if (n_sections * section_length > total_length + 1e-12)
    fail("compressible sections exceed the total length");
  if (!(youngs_modulus > 0.0)) fail("youngs_modulus must be positive");
  if (!(poissons_ratio > -1.0 && poissons_ratio < 0.5)) fail("poissons_ratio out of range");
  if (!(area > 0.0 && ixx > 0.0 && iyy > 0.0 && polar_moment > 0.0)) fail("section properties must be positive");
  if (!(density >= 0.0)) fail("density must be non-negative");
  if (!(c_spine >= 0.0)) fail("c_spine must be non-negative");
  if (!(compression_saturation_force > 0.0)) fail("compression_saturation_force must be positive");
  if (!(damping_se.minCoeff() >= 0.0 && damping_bt.minCoeff() >= 0.0)) fail("damping must be non-negative");
  if (!(tip_mass >= 0.0)) fail("tip_mass must be non-negative");
  if (!(dt > 0.0)) fail("dt must be positive");
  if (!gravity.allFinite()) fail("gravity must be finite");
  for (const auto& r : tendon_offsets) {
    if (!r.allFinite() || std::abs(r.z()) > 0.0) fail("tendon offsets must be finite and lie in the disk plane");
  }
}

int TendonCommand::actuated_count() const {
  return static_cast<int>(std::count(actuated.begin(), actuated.end(), true));
}

TendonCommand TendonCommand::rest(const RodParams& params) {
  TendonCommand c;
  c.lengths = Vec4::Constant(rest_tendon_length(params));
  return c;
}

TendonCommand TendonCommand::from_lengths(const Vec4& lengths, const RodParams& params) {
  const double rest = rest_tendon_length(params);
  int best = 0;
  double best_short = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < kNumTendons; ++i) {
    const int j = (i + 1) % kNumTendons;
    const double shortening = (rest - lengths[i]) + (rest - lengths[j]);
    if (shortening > best_short + 1e-15) {
      best_short = shortening;
      best = i;
    }
  }
  return with_pair(lengths, best, (best + 1) % kNumTendons);
}

TendonCommand TendonCommand::with_pair(const Vec4& lengths, int first, int second) {
  if (first < 0 || first >= kNumTendons || second < 0 || second >= kNumTendons || first == second)
    throw InvalidInputError("actuated pair indices out of range");
  TendonCommand c;
  c.lengths = lengths;
  c.actuated[first] = true;
  c.actuated[second] = true;
  return c;
}

double RodState::total_length() const {
  double sum = 0.0;
  for (double d : ds) sum += d;
  return sum;
}

Vec3 internal_force(const Mat3& R, const Vec3& v, const Mat3& k_se, const Vec3& v_star) {
  if (!R.allFinite() || !v.allFinite() || !k_se.allFinite() || !v_star.allFinite())
    throw InvalidInputError("internal_force: non-finite input");
  return R * (k_se * (v - v_star));
}

double spine_compression(double n_mag, double c_spine, double saturation) {
  if (!(n_mag >= 0.0) || !std::isfinite(n_mag))
    throw InvalidInputError("spine_compression: force magnitude must be finite and non-negative");
  return c_spine * std::min(n_mag, saturation);
}

RodState integrate_rod_spatial(const RodParams& params, const Vec3& v0, const Vec3& u0,
                               const TendonCommand& command, const Vec4& tensions,
                               const ShootingOptions& options) {
  for (int i = 0; i < kNumTendons; ++i) {
    if (command.actuated[i] && tensions[i] < 0.0)
      throw InvalidInputError("integrate_rod_spatial: tensions must be non-negative");
  }
  Model m(params, command.actuated, tensions, 0.0, nullptr);
  RodState s;
  integrate(m, v0, u0, options, s);
  s.v0 = v0;
  s.u0 = u0;
  s.tensions = tensions;
  for (int i = 0; i < kNumTendons; ++i)
    if (!command.actuated[i]) s.tensions[i] = 0.0;
  return s;
}

double tendon_path_length(const RodState& state, int tendon_index, const RodParams& params) {
  if (tendon_index < 0 || tendon_index >= kNumTendons)
    throw InvalidInputError("tendon_path_length: tendon index out of range");
  const Vec3& r = params.tendon_offsets[tendon_index];
  double len = 0.0;
  Vec3 prev = state.p[0] + state.R[0] * r;
  for (int k = 1; k < state.n_nodes(); ++k) {
    const Vec3 cur = state.p[k] + state.R[k] * r;
    len += (cur - prev).norm();
    prev = cur;
  }
  return len;
}

Vec4 tendon_path_lengths(const RodState& state, const RodParams& params) {
  Vec4 out;
  for (int i = 0; i < kNumTendons; ++i) out[i] = tendon_path_length(state, i, params);
  return out;
}

double rest_tendon_length(const RodParams& params) { return params.total_length; }

RodState straight_state(const RodParams& params) {
  RodState s;
  resize_state(s, params.n_nodes());
  const double ds = params.node_spacing();
  for (int k = 0; k < params.n_nodes(); ++k) {
    s.p[k] = Vec3(0.0, 0.0, ds * k);
    s.v[k] = Vec3::UnitZ();
  }
  std::fill(s.ds.begin(), s.ds.end(), ds);
  return s;
}

ShootingResult shoot_static(const RodParams& params, const TendonCommand& command,
                            const ShootingOptions& options, const RodState* warm_start,
                            ShootingCache* cache) {
  params.validate();
  if (!command.lengths.allFinite()) throw InvalidInputError("shoot_static: non-finite command");
  const Problem pb = make_length_problem(params, command, options);

  NewtonOutcome out = newton(pb, initial_guess(pb, warm_start), cache);
  if (!out.converged) {
    // Continuation from the warm start (or the rest configuration) toward the command.
    RodState anchor;
    TendonCommand start = command;
    if (warm_start) {
      anchor = *warm_start;
      start.lengths = tendon_path_lengths(*warm_start, params);
    } else {
      anchor = straight_state(params);
      start.lengths = Vec4::Constant(rest_tendon_length(params));
    }
    for (int pieces : {4, 16}) {
      RodState cur = anchor;
      bool ok = true;
      for (int j = 1; j <= pieces && ok; ++j) {
        Problem sub = pb;
        const double f = static_cast<double>(j) / pieces;
        sub.target_lengths = (1.0 - f) * start.lengths + f * command.lengths;
        NewtonOutcome o = newton(sub, initial_guess(sub, &cur), nullptr);
        if (!o.converged) {
          ok = false;
          break;
        }
        sub.residual(o.x, &cur);
        if (j == pieces) out = o;
      }
      if (ok) break;
    }
    if (cache) cache->valid = false;
  }
  if (!out.converged) {
    check_slack(pb, out.x);  // an infeasible set usually stalls with a tendon pushing
    throw NonConvergenceError("shoot_static: Newton iteration did not converge", out.residual_norm,
                              out.iterations);
  }
  check_slack(pb, out.x);
  return finish(pb, out);
}

ShootingResult shoot_static_tensions(const RodParams& params, const Vec4& tensions,
                                     const ShootingOptions& options, const RodState* warm_start) {
  params.validate();
  if (!(tensions.minCoeff() >= 0.0)) throw InvalidInputError("shoot_static_tensions: negative tension");
  Problem pb{&params, {true, true, true, true}, {0, 1, 2, 3}, false, Vec4::Zero(), tensions, 0.0, nullptr,
             options};
  NewtonOutcome out = newton(pb, initial_guess(pb, warm_start), nullptr);
  if (!out.converged) {
    // Load continuation in tension.
    RodState cur = straight_state(params);
    for (int j = 1; j <= 8; ++j) {
      Problem sub = pb;
      sub.fixed_tensions = tensions * (static_cast<double>(j) / 8.0);
      out = newton(sub, initial_guess(sub, &cur), nullptr);
      if (!out.converged) break;
      sub.residual(out.x, &cur);
    }
  }
  if (!out.converged) {
    throw NonConvergenceError("shoot_static_tensions: Newton iteration did not converge", out.residual_norm,
                              out.iterations);
  }
  return finish(pb, out);
}

RodState step_dynamic(const RodParams& params, const RodState& state, const TendonCommand& command,
                      double dt, const ShootingOptions& options, ShootingCache* cache) {
  if (!(dt > 0.0)) throw InvalidInputError("step_dynamic: dt must be positive");
  if (state.n_nodes() != params.n_nodes()) throw InvalidInputError("step_dynamic: state does not match params");
  params.validate();
  const HistoryTerms hist = make_history(state, dt);
  Problem pb = make_length_problem(params, command, options);
  pb.c0 = 1.5 / dt;
  pb.hist = &hist;

  NewtonOutcome out = newton(pb, initial_guess(pb, &state), cache);
  if (!out.converged && cache) {
    cache->valid = false;
    out = newton(pb, initial_guess(pb, &state), cache);
  }
  if (!out.converged) {
    check_slack(pb, out.x);
    throw NonConvergenceError("step_dynamic: shooting did not converge", out.residual_norm, out.iterations);
  }
  check_slack(pb, out.x);
  RodState next;
  pb.residual(out.x, &next);
  next.t = state.t + dt;
  next.previous.v = state.v;
  next.previous.u = state.u;
  next.previous.q = state.q;
  next.previous.w = state.w;
  next.previous.v_s = state.v_s;
  next.previous.u_s = state.u_s;
  return next;
}

RodState solve_releasing_slack(const RodParams& params, const RodState& state, const TendonCommand& command,
                               double dt, bool dynamic, const ShootingOptions& options, ShootingCache* cache,
                               TendonCommand* realized) {
  TendonCommand cmd = command;
  for (int attempt = 0; attempt <= kNumTendons; ++attempt) {
    try {
      RodState next;
      if (dynamic) {
        next = step_dynamic(params, state, cmd, dt, options, cache);
      } else {
        next = shoot_static(params, cmd, options, &state, cache).state;
        next.t = state.t;
      }
      if (realized) *realized = cmd;
      return next;
    } catch (const SlackTendonError& e) {
      cmd.actuated[e.tendon()] = false;
      if (cache) cache->valid = false;
    }
  }
  throw NumericalError("solve_releasing_slack: could not find a tension-feasible actuated set");
}

}  // namespace tdcr
