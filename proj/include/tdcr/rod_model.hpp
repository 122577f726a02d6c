#pragma once

#include <array>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "tdcr/errors.hpp"

namespace tdcr {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec4 = Eigen::Vector4d;

inline constexpr int kNumTendons = 4;

enum class CompressionMode {
  kSection,  // one l_c per section from the section-mean force, split equally over its nodes
  kPoint,    // l_c evaluated at every node from the local force, divided by nodes_per_section
};

// Geometry, material, routing and compression constants of one continuum robot.
// The four physical spines are lumped into one central rod with the same total area.
struct RodParams {
  double total_length = 0.22;
  int n_sections = 11;
  double section_length = 0.01;  // compressible part of each section; the rest is disk allowance
  int nodes_per_section = 4;

  double youngs_modulus = 2.33e9;
  double poissons_ratio = 0.3897;

  // Four 0.72 mm spines merged into one equivalent circle.
  double area = 6.5144e-6;
  double ixx = 3.3771e-12;
  double iyy = 3.3771e-12;
  double polar_moment = 6.7542e-12;
  // Effective density of spine plus the massless-disk allowance folded in.
  double density = 6140.0;
  Vec3 gravity{-9.81, 0.0, 0.0};

  std::array<Vec3, kNumTendons> tendon_offsets{Vec3(0.02, 0.0, 0.0), Vec3(0.0, 0.02, 0.0),
                                               Vec3(-0.02, 0.0, 0.0), Vec3(0.0, -0.02, 0.0)};

  double c_spine = 2.0e-4;                      // m/N, per section
  double compression_saturation_force = 20.0;   // N
  CompressionMode compression_mode = CompressionMode::kSection;

  // Kelvin-Voigt damping, diagonal entries of B_se and B_bt.
  Vec3 damping_se{1.1e3, 1.1e3, 3.0e3};
  Vec3 damping_bt{1.6e-3, 1.6e-3, 1.2e-3};

  double tip_mass = 0.0;  // kg, point load at the tip disk
  double dt = 0.2;

  double shear_modulus() const { return youngs_modulus / (2.0 * (1.0 + poissons_ratio)); }
  Mat3 stiffness_se() const;
  Mat3 stiffness_bt() const;
  Mat3 damping_se_matrix() const { return damping_se.asDiagonal(); }
  Mat3 damping_bt_matrix() const { return damping_bt.asDiagonal(); }
  Mat3 rotational_inertia() const;  // rho * diag(Ixx, Iyy, J)

  int n_nodes() const { return n_sections * nodes_per_section + 1; }
  int n_steps() const { return n_sections * nodes_per_section; }
  double section_spacing() const { return total_length / n_sections; }
  double node_spacing() const { return section_spacing() / nodes_per_section; }

  // Scales that make the tip wrench and length residuals dimensionless.
  double force_scale() const;
  double moment_scale() const;

  // Throws InvalidInputError when an invariant is violated.
  void validate() const;
};

struct TendonCommand {
  Vec4 lengths = Vec4::Zero();
  std::array<bool, kNumTendons> actuated{false, false, false, false};

  int actuated_count() const;

  // Straight-rod lengths with no tendon held taut.
  static TendonCommand rest(const RodParams& params);
  // Picks the adjacent tendon pair with the largest combined shortening as the actuated set.
  static TendonCommand from_lengths(const Vec4& lengths, const RodParams& params);
  static TendonCommand with_pair(const Vec4& lengths, int first, int second);
};

// Values of v, u, q, w and their arclength derivatives at the previous time step.
struct TimeHistory {
  std::vector<Vec3> v, u, q, w, v_s, u_s;
  bool empty() const { return v.empty(); }
};

struct RodState {
  std::vector<Vec3> p;
  std::vector<Mat3> R;
  std::vector<Vec3> v;
  std::vector<Vec3> u;
  std::vector<Vec3> q;
  std::vector<Vec3> w;
  std::vector<Vec3> v_s;
  std::vector<Vec3> u_s;
  std::vector<double> ds;  // ds[k] is the step from node k to node k+1
  double t = 0.0;

  // Boundary unknowns and tendon tensions of the solution that produced this state.
  Vec3 v0 = Vec3::UnitZ();
  Vec3 u0 = Vec3::Zero();
  Vec4 tensions = Vec4::Zero();

  TimeHistory previous;  // BDF-2 needs two past levels; the current arrays are the other one

  int n_nodes() const { return static_cast<int>(p.size()); }
  const Vec3& tip() const { return p.back(); }
  Vec3 tip_velocity() const { return R.back() * q.back(); }
  double total_length() const;
};

struct ShootingResult {
  RodState state;
  double residual_norm = 0.0;
  int iterations = 0;
  Vec4 tensions = Vec4::Zero();  // zero for tendons outside the actuated set
  bool converged = false;
};

struct ShootingOptions {
  double tolerance = 1e-6;
  int max_iterations = 200;
  int max_step_halvings = 12;
  double fd_step = 1e-7;
  double compression_tolerance = 1e-12;  // m, per-section fixed point on l_c
  int max_compression_sweeps = 50;
};

// Reusable Newton data between consecutive solves of the same plant.
struct ShootingCache {
  Eigen::MatrixXd jacobian;
  std::array<bool, kNumTendons> mask{};
  bool valid = false;
};

// n = R K_se (v - v*) with v* = e3.
Vec3 internal_force(const Mat3& R, const Vec3& v, const Mat3& k_se, const Vec3& v_star = Vec3::UnitZ());

// l_c = c_spine * min(|n|, saturation).
double spine_compression(double n_mag, double c_spine, double saturation);

// Explicit Euler sweep of the tendon-driven Cosserat system from a clamped base.
// `tensions` holds one entry per tendon; entries outside `command.actuated` are ignored.
RodState integrate_rod_spatial(const RodParams& params, const Vec3& v0, const Vec3& u0,
                               const TendonCommand& command, const Vec4& tensions,
                               const ShootingOptions& options = {});

// Sum of chord lengths of tendon `tendon_index` between consecutive nodes.
double tendon_path_length(const RodState& state, int tendon_index, const RodParams& params);
Vec4 tendon_path_lengths(const RodState& state, const RodParams& params);

// Rest length of every tendon for the straight, unloaded rod.
double rest_tendon_length(const RodParams& params);

ShootingResult shoot_static(const RodParams& params, const TendonCommand& command,
                            const ShootingOptions& options = {},
                            const RodState* warm_start = nullptr, ShootingCache* cache = nullptr);

// Static equilibrium under prescribed tensions (no length constraints).
ShootingResult shoot_static_tensions(const RodParams& params, const Vec4& tensions,
                                     const ShootingOptions& options = {},
                                     const RodState* warm_start = nullptr);

// One implicit BDF-2 time step of length dt followed by spatial shooting.
RodState step_dynamic(const RodParams& params, const RodState& state, const TendonCommand& command,
                      double dt, const ShootingOptions& options = {}, ShootingCache* cache = nullptr);

// Straight, unloaded configuration used as the initial condition of every plant.
RodState straight_state(const RodParams& params);

// Solves the command, releasing actuated tendons that would need negative tension.
// Returns the command that was actually enforced through `realized`.
RodState solve_releasing_slack(const RodParams& params, const RodState& state,
                               const TendonCommand& command, double dt, bool dynamic,
                               const ShootingOptions& options, ShootingCache* cache,
                               TendonCommand* realized = nullptr);

}  // namespace tdcr
