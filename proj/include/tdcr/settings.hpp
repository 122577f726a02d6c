#pragma once

#include "tdcr/config.hpp"
#include "tdcr/control.hpp"
#include "tdcr/data_gen.hpp"
#include "tdcr/gpr.hpp"
#include "tdcr/rnn.hpp"
#include "tdcr/twin_plant.hpp"

namespace tdcr {

// Data-generation sizes and lattice settings shared by the pipeline and the CLI.
struct DataSettings {
  int sim_steps = 10000;
  int real_steps = 10000;
  ExplorationOptions exploration;
  double lattice_max_tension = 2.0;  // N, largest tension on a lattice point
  int pool_directions = 40;
  int pool_magnitudes = 25;
  int eval_directions = 40;
  int eval_magnitudes = 24;
  int gpr_size = 1000;          // pool subset the GPR is cross-validated on
  int gpr_headline_size = 100;  // GPR of policies A, B and C
  int n_targets = 50;

  void validate() const;
};

// Each reader starts from the defaults and overrides the keys present in its namespace.
TwinConfig twin_config_from_config(const Config& config);
TrainConfig train_config_from_config(const Config& config);
GprOptions gpr_options_from_config(const Config& config);
PolicyConfig policy_config_from_config(const Config& config);
DataSettings data_settings_from_config(const Config& config);

void twin_config_to_config(const TwinConfig& twin, Config& config);
void train_config_to_config(const TrainConfig& train, Config& config);
void gpr_options_to_config(const GprOptions& gpr, Config& config);
void policy_config_to_config(const PolicyConfig& policy, Config& config);
void data_settings_to_config(const DataSettings& data, Config& config);

// Every key with its effective value, including defaults.
Config effective_config(const Config& overrides);

}  // namespace tdcr
