#include "tdcr/rod_io.hpp"

#include <fstream>
#include <sstream>

#include <boost/algorithm/string.hpp>

namespace tdcr {

namespace {

const char* kStateHeader =
    "k,s,ds,px,py,pz,r00,r01,r02,r10,r11,r12,r20,r21,r22,vx,vy,vz,ux,uy,uz,qx,qy,qz,wx,wy,wz";

}  // namespace

RodParams rod_params_from_config(const Config& c) {
  RodParams p;
  p.total_length = c.get_double("rod.total_length", p.total_length);
  p.n_sections = c.get_int("rod.n_sections", p.n_sections);
  p.section_length = c.get_double("rod.section_length", p.section_length);
  p.nodes_per_section = c.get_int("rod.nodes_per_section", p.nodes_per_section);
  p.youngs_modulus = c.get_double("rod.youngs_modulus", p.youngs_modulus);
  p.poissons_ratio = c.get_double("rod.poissons_ratio", p.poissons_ratio);
  p.area = c.get_double("rod.area", p.area);
  p.ixx = c.get_double("rod.ixx", p.ixx);
  p.iyy = c.get_double("rod.iyy", p.iyy);
  p.polar_moment = c.get_double("rod.polar_moment", p.polar_moment);
  p.density = c.get_double("rod.density", p.density);
  p.gravity = c.get_vec3("rod.gravity", p.gravity);
  for (int i = 0; i < kNumTendons; ++i) {
    p.tendon_offsets[i] = c.get_vec3("rod.tendon_offset_" + std::to_string(i), p.tendon_offsets[i]);
  }
  p.c_spine = c.get_double("rod.c_spine", p.c_spine);
  p.compression_saturation_force = c.get_double("rod.compression_saturation_force", p.compression_saturation_force);
  const std::string mode = c.get_string("rod.compression_mode", "section");
  if (mode == "section") {
    p.compression_mode = CompressionMode::kSection;
  } else if (mode == "point") {
    p.compression_mode = CompressionMode::kPoint;
  } else {
    throw InvalidInputError("rod.compression_mode must be 'section' or 'point'");
  }
  p.damping_se = c.get_vec3("rod.damping_se", p.damping_se);
  p.damping_bt = c.get_vec3("rod.damping_bt", p.damping_bt);
  p.tip_mass = c.get_double("rod.tip_mass", p.tip_mass);
  p.dt = c.get_double("rod.dt", p.dt);
  p.validate();
  return p;
}

void rod_params_to_config(const RodParams& p, Config& c) {
  c.set("rod.total_length", format_double(p.total_length));
  c.set("rod.n_sections", std::to_string(p.n_sections));
  c.set("rod.section_length", format_double(p.section_length));
  c.set("rod.nodes_per_section", std::to_string(p.nodes_per_section));
  c.set("rod.youngs_modulus", format_double(p.youngs_modulus));
  c.set("rod.poissons_ratio", format_double(p.poissons_ratio));
  c.set("rod.area", format_double(p.area));
  c.set("rod.ixx", format_double(p.ixx));
  c.set("rod.iyy", format_double(p.iyy));
  c.set("rod.polar_moment", format_double(p.polar_moment));
  c.set("rod.density", format_double(p.density));
  c.set("rod.gravity", format_vec3(p.gravity));
  for (int i = 0; i < kNumTendons; ++i) {
    c.set("rod.tendon_offset_" + std::to_string(i), format_vec3(p.tendon_offsets[i]));
  }
  c.set("rod.c_spine", format_double(p.c_spine));
  c.set("rod.compression_saturation_force", format_double(p.compression_saturation_force));
  c.set("rod.compression_mode", p.compression_mode == CompressionMode::kSection ? "section" : "point");
  c.set("rod.damping_se", format_vec3(p.damping_se));
  c.set("rod.damping_bt", format_vec3(p.damping_bt));
  c.set("rod.tip_mass", format_double(p.tip_mass));
  c.set("rod.dt", format_double(p.dt));
}

void write_rod_state_csv(std::ostream& out, const RodState& s) {
  out << kStateHeader << "\n";
  double arc = 0.0;
  for (int k = 0; k < s.n_nodes(); ++k) {
    const double ds = k < static_cast<int>(s.ds.size()) ? s.ds[k] : 0.0;
    out << k << "," << format_double(arc) << "," << format_double(ds);
    for (int i = 0; i < 3; ++i) out << "," << format_double(s.p[k][i]);
    for (int r = 0; r < 3; ++r)
      for (int col = 0; col < 3; ++col) out << "," << format_double(s.R[k](r, col));
    for (const auto* field : {&s.v, &s.u, &s.q, &s.w})
      for (int i = 0; i < 3; ++i) out << "," << format_double((*field)[k][i]);
    out << "\n";
    arc += ds;
  }
}

void write_rod_state_csv(const std::string& path, const RodState& state) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write rod state: " + path);
  write_rod_state_csv(out, state);
}

RodState read_rod_state_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open rod state: " + path);
  std::string line;
  std::getline(in, line);
  if (boost::algorithm::trim_copy(line) != kStateHeader) throw IoError("unexpected rod state header in " + path);
  RodState s;
  while (std::getline(in, line)) {
    if (boost::algorithm::trim_copy(line).empty()) continue;
    std::vector<std::string> f;
    boost::algorithm::split(f, line, boost::is_any_of(","));
    if (f.size() != 27) throw IoError("rod state row must have 27 fields in " + path);
    std::vector<double> x(f.size());
    for (size_t i = 0; i < f.size(); ++i) x[i] = std::stod(f[i]);
    s.ds.push_back(x[2]);
    s.p.emplace_back(x[3], x[4], x[5]);
    Mat3 R;
    R << x[6], x[7], x[8], x[9], x[10], x[11], x[12], x[13], x[14];
    s.R.push_back(R);
    s.v.emplace_back(x[15], x[16], x[17]);
    s.u.emplace_back(x[18], x[19], x[20]);
    s.q.emplace_back(x[21], x[22], x[23]);
    s.w.emplace_back(x[24], x[25], x[26]);
  }
  if (s.p.empty()) throw IoError("rod state has no rows: " + path);
  s.ds.pop_back();
  s.v_s.assign(s.p.size(), Vec3::Zero());
  s.u_s.assign(s.p.size(), Vec3::Zero());
  if (!s.v.empty()) s.v0 = s.v.front();
  if (!s.u.empty()) s.u0 = s.u.front();
  return s;
}

}  // namespace tdcr
