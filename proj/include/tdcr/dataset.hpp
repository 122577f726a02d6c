#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "tdcr/rod_model.hpp"

namespace tdcr {

enum class SampleSource { kSim, kTwin, kGprGenerated };

std::string to_string(SampleSource source);
SampleSource sample_source_from_string(const std::string& text);

// One transition: tendon lengths u applied at step i move the tip from x to x_next.
// p_sim is the nominal simulator's tip for the same lengths, paired with x_next.
struct Sample {
  int step = 0;
  Vec4 lengths = Vec4::Zero();
  Vec3 x = Vec3::Zero();
  Vec3 x_next = Vec3::Zero();
  Vec3 p_sim = Vec3::Zero();
  SampleSource source = SampleSource::kSim;
};

struct Dataset {
  std::vector<Sample> samples;
  double split_ratio = 0.7;
  std::uint64_t seed = 0;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  // Contiguous split so recurrent training keeps the time order: first part trains.
  std::pair<Dataset, Dataset> split() const;
  Dataset head(std::size_t n) const;
  void validate() const;
};

// Header: step,L1,L2,L3,L4,x,y,z,x_next,y_next,z_next,sim_x,sim_y,sim_z,source
void write_dataset_csv(std::ostream& out, const Dataset& data);
void write_dataset_csv(const std::string& path, const Dataset& data);
Dataset read_dataset_csv(const std::string& path);

}  // namespace tdcr
