#pragma once

#include <iosfwd>
#include <string>

#include "tdcr/config.hpp"
#include "tdcr/rod_model.hpp"

namespace tdcr {

// Reads rod.* keys; anything missing keeps the RodParams default.
RodParams rod_params_from_config(const Config& config);
void rod_params_to_config(const RodParams& params, Config& config);

// One row per node: k, s, ds, px, py, pz, r00..r22, vx..vz, ux..uz, qx..qz, wx..wz.
// ds of the last node is 0 and s is the accumulated compressed arclength.
void write_rod_state_csv(std::ostream& out, const RodState& state);
void write_rod_state_csv(const std::string& path, const RodState& state);
RodState read_rod_state_csv(const std::string& path);

}  // namespace tdcr
