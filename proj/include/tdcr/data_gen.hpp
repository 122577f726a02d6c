#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tdcr/dataset.hpp"
#include "tdcr/gpr.hpp"
#include "tdcr/twin_plant.hpp"

namespace tdcr {

struct ExplorationOptions {
  double max_step = 0.003;        // m per tendon per step
  double range_fraction = 0.15;   // lengths stay within [1 - f, 1] x rest length
};

// Continuous random walk on one adjacent tendon pair at a time. A pair tendon that would be
// pushed past its rest length is released and the next tendon around the disk takes over.
std::vector<TendonCommand> random_exploration(int n_steps, std::uint64_t seed, const RodParams& params,
                                              const ExplorationOptions& options = {});

// Nominal simulator, or the twin plant when `twin` is set.
struct PlantSpec {
  RodParams nominal;
  std::optional<TwinConfig> twin;
  std::uint64_t noise_seed = 0;
};

struct RolloutResult {
  Dataset data;
  int failure_index = -1;  // first command that could not be applied, -1 if none
  std::string failure;
};

// Steps the plant (from rest) through the commands at the control rate. Twin rollouts also
// record the nominal simulator's tip under the same commands in p_sim.
RolloutResult rollout(const PlantSpec& plant, const std::vector<TendonCommand>& commands);

// Tension-space lattice: n_directions bending directions x n_magnitudes tension levels, each
// tension vector loading the adjacent pair that spans its direction. `staggered` offsets both
// axes by half a cell, giving a lattice disjoint from the unstaggered one.
std::vector<Vec4> tension_lattice(int n_directions, int n_magnitudes, double max_tension, bool staggered);

// Static twin equilibria for each tension vector, recorded with the twin's realized lengths,
// the noisy twin tip (x = x_next) and the nominal simulator's tip under those lengths.
// Points where either plant fails are dropped.
Dataset static_lattice_dataset(const PlantSpec& twin_plant, const std::vector<Vec4>& tensions);

// k spatial clusters (seeded k-means on x, 50 iterations) and one random member from each.
Dataset sparse_subset(const Dataset& pool, int k, std::uint64_t seed);

// GPR training matrices: X = (L1..L4, p_sim), Y = p_sim - x_next.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> gpr_training_data(const Dataset& data);
Eigen::VectorXd gpr_input(const Vec4& lengths, const Vec3& p_sim);

// Replaces x and x_next by p_sim - e_gp(L, p_sim). `n_extrapolated` counts rows whose predictive
// variance exceeds half the prior variance on some axis.
Dataset generate_policy_b_dataset(const Dataset& sim_data, const GprModel& gpr, int* n_extrapolated = nullptr);

}  // namespace tdcr
