#include "tdcr/dataset.hpp"

#include <cmath>
#include <fstream>

#include <boost/algorithm/string.hpp>

#include "tdcr/config.hpp"

namespace tdcr {

namespace {

const char* kDatasetHeader = "step,L1,L2,L3,L4,x,y,z,x_next,y_next,z_next,sim_x,sim_y,sim_z,source";

double parse_field(const std::string& text, const std::string& path, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw IoError(path + ":" + std::to_string(line) + ": bad number '" + text + "'");
  }
}

}  // namespace

std::string to_string(SampleSource source) {
  switch (source) {
    case SampleSource::kSim:
      return "sim";
    case SampleSource::kTwin:
      return "twin";
    case SampleSource::kGprGenerated:
      return "gpr-generated";
  }
  return "sim";
}

SampleSource sample_source_from_string(const std::string& text) {
  if (text == "sim") return SampleSource::kSim;
  if (text == "twin") return SampleSource::kTwin;
  if (text == "gpr-generated") return SampleSource::kGprGenerated;
  throw InvalidInputError("unknown sample source '" + text + "'");
}

std::pair<Dataset, Dataset> Dataset::split() const {
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw InvalidInputError("split ratio must lie in (0, 1)");
  const auto n_train = static_cast<std::size_t>(std::floor(split_ratio * static_cast<double>(size())));
  Dataset train = *this, val = *this;
  train.samples.assign(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(n_train));
  val.samples.assign(samples.begin() + static_cast<std::ptrdiff_t>(n_train), samples.end());
  return {train, val};
}

Dataset Dataset::head(std::size_t n) const {
  if (n > size()) throw InvalidInputError("requested more samples than the dataset holds");
  Dataset d = *this;
  d.samples.resize(n);
  return d;
}

void Dataset::validate() const {
  for (const auto& s : samples) {
    if (!s.lengths.allFinite() || !s.x.allFinite() || !s.x_next.allFinite() || !s.p_sim.allFinite()) {
      throw InvalidInputError("dataset sample " + std::to_string(s.step) + " is not finite");
    }
  }
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  out << kDatasetHeader << "\n";
  for (const auto& s : data.samples) {
    out << s.step;
    for (int i = 0; i < 4; ++i) out << "," << format_double(s.lengths[i]);
    for (const Vec3* v : {&s.x, &s.x_next, &s.p_sim})
      for (int i = 0; i < 3; ++i) out << "," << format_double((*v)[i]);
    out << "," << to_string(s.source) << "\n";
  }
}

void write_dataset_csv(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write dataset: " + path);
  write_dataset_csv(out, data);
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset: " + path);
  std::string line;
  if (!std::getline(in, line) || boost::algorithm::trim_copy(line) != kDatasetHeader) {
    throw IoError("dataset " + path + " is missing the expected header");
  }
  Dataset d;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    boost::algorithm::trim(line);
    if (line.empty()) continue;
    std::vector<std::string> f;
    boost::algorithm::split(f, line, boost::is_any_of(","));
    if (f.size() != 15) throw IoError(path + ":" + std::to_string(line_no) + ": expected 15 fields");
    Sample s;
    s.step = static_cast<int>(parse_field(f[0], path, line_no));
    for (int i = 0; i < 4; ++i) s.lengths[i] = parse_field(f[1 + i], path, line_no);
    for (int i = 0; i < 3; ++i) {
      s.x[i] = parse_field(f[5 + i], path, line_no);
      s.x_next[i] = parse_field(f[8 + i], path, line_no);
      s.p_sim[i] = parse_field(f[11 + i], path, line_no);
    }
    s.source = sample_source_from_string(f[14]);
    d.samples.push_back(s);
  }
  return d;
}

}  // namespace tdcr
