#include "tdcr/calibration.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <boost/algorithm/string.hpp>
#include <boost/math/tools/minima.hpp>

#include "tdcr/config.hpp"
#include "tdcr/data_gen.hpp"

namespace tdcr {

namespace {

const char* kObservationHeader = "L1,L2,L3,L4,tip_x,tip_y,tip_z,load_kg";

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

Vec3 static_tip(const RodParams& params, const TendonCommand& command) {
  const RodState start = straight_state(params);
  return solve_releasing_slack(params, start, command, params.dt, false, ShootingOptions{}, nullptr).tip();
}

}  // namespace

void CalibrationProblem::validate() const {
  if (observations.size() < 3) throw InvalidInputError("calibration needs at least 3 observations");
  if (!(e_min > 0.0) || !(e_max > e_min) || !std::isfinite(e_max))
    throw InvalidInputError("calibration search interval must be positive and bounded");
  if (grid_points < 5) throw InvalidInputError("calibration grid needs at least 5 points");
  for (const auto& o : observations) {
    if (!o.tip.allFinite() || !o.command.lengths.allFinite() || !(o.load_kg >= 0.0))
      throw InvalidInputError("calibration observation has non-finite or negative entries");
  }
}

double calibration_rms(const CalibrationProblem& problem, const RodParams& params, double youngs_modulus) {
  RodParams p = params;
  p.youngs_modulus = youngs_modulus;
  double sum = 0.0;
  for (const auto& o : problem.observations) {
    p.tip_mass = o.load_kg;
    try {
      sum += (static_tip(p, o.command) - o.tip).squaredNorm();
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  }
  return std::sqrt(sum / static_cast<double>(problem.observations.size()));
}

CalibrationResult calibrate_youngs_modulus(const CalibrationProblem& problem, const RodParams& params) {
  problem.validate();
  params.validate();
  CalibrationResult res;
  const double a = std::log(problem.e_min), b = std::log(problem.e_max);
  auto probe = [&](double log_e) {
    const double e = std::exp(log_e);
    const double rms = calibration_rms(problem, params, e);
    res.curve.emplace_back(e, rms);
    return rms;
  };

  const int n = problem.grid_points;
  std::vector<double> grid(n), value(n);
  int best = -1;
  for (int i = 0; i < n; ++i) {
    grid[i] = a + (b - a) * i / (n - 1);
    value[i] = probe(grid[i]);
    if (std::isfinite(value[i]) && (best < 0 || value[i] < value[best])) best = i;
  }
  if (best <= 0 || best >= n - 1) {
    throw CalibrationFailedError("calibration found no interior minimum of the tip error", res.curve);
  }

  boost::uintmax_t max_iter = 100;
  const auto [log_e, rms] =
      boost::math::tools::brent_find_minima(probe, grid[best - 1], grid[best + 1], 40, max_iter);
  res.youngs_modulus = std::exp(log_e);
  res.rms_error = rms;
  // Keep the certificate that no probed E did better.
  for (const auto& [e, r] : res.curve) {
    if (r < res.rms_error) {
      res.youngs_modulus = e;
      res.rms_error = r;
    }
  }
  if (!std::isfinite(res.rms_error))
    throw CalibrationFailedError("calibration objective is not finite at the minimum", res.curve);
  return res;
}

std::vector<CalibrationObservation> synthesize_observations(const RodParams& params,
                                                            const std::vector<TendonCommand>& commands,
                                                            const std::vector<double>& loads, double noise_sigma,
                                                            std::uint64_t seed) {
  if (loads.empty()) throw InvalidInputError("synthesize_observations needs at least one load");
  if (!(noise_sigma >= 0.0)) throw InvalidInputError("noise sigma must be non-negative");
  Rng rng(derive_seed(seed, "calibration.noise"));
  std::vector<CalibrationObservation> out;
  for (std::size_t i = 0; i < commands.size(); ++i) {
    RodParams p = params;
    p.tip_mass = loads[i % loads.size()];
    CalibrationObservation o;
    o.command = commands[i];
    o.load_kg = p.tip_mass;
    o.tip = static_tip(p, commands[i]);
    for (int k = 0; k < 3; ++k) o.tip[k] += noise_sigma * standard_normal(rng);
    out.push_back(o);
  }
  return out;
}

std::vector<TendonCommand> calibration_commands(const RodParams& params, int n) {
  if (n < 3) throw InvalidInputError("calibration needs at least 3 commands");
  const int dirs = 4;
  const int mags = (n + dirs - 1) / dirs;
  const std::vector<Vec4> lattice = tension_lattice(dirs, mags, 2.0, true);
  std::vector<TendonCommand> out;
  for (int m = 0; m < mags && static_cast<int>(out.size()) < n; ++m) {
    for (int d = 0; d < dirs && static_cast<int>(out.size()) < n; ++d) {
      const Vec4& tau = lattice[static_cast<std::size_t>(d * mags + m)];
      const ShootingResult r = shoot_static_tensions(params, tau);
      TendonCommand cmd;
      cmd.lengths = tendon_path_lengths(r.state, params);
      for (int t = 0; t < kNumTendons; ++t) cmd.actuated[t] = tau[t] > 0.0;
      out.push_back(cmd);
    }
  }
  return out;
}

void write_observations_csv(std::ostream& out, const std::vector<CalibrationObservation>& obs) {
  out << kObservationHeader << "\n";
  for (const auto& o : obs) {
    for (int i = 0; i < 4; ++i) out << format_double(o.command.lengths[i]) << ",";
    for (int i = 0; i < 3; ++i) out << format_double(o.tip[i]) << ",";
    out << format_double(o.load_kg) << "\n";
  }
}

void write_observations_csv(const std::string& path, const std::vector<CalibrationObservation>& obs) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write observations: " + path);
  write_observations_csv(out, obs);
}

std::vector<CalibrationObservation> read_observations_csv(const std::string& path, const RodParams& params) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open observations: " + path);
  std::string line;
  if (!std::getline(in, line) || boost::algorithm::trim_copy(line) != kObservationHeader) {
    throw IoError("observations " + path + " is missing the expected header");
  }
  std::vector<CalibrationObservation> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    boost::algorithm::trim(line);
    if (line.empty()) continue;
    std::vector<std::string> f;
    boost::algorithm::split(f, line, boost::is_any_of(","));
    if (f.size() != 8) throw IoError(path + ":" + std::to_string(line_no) + ": expected 8 fields");
    Vec4 lengths;
    for (int i = 0; i < 4; ++i) lengths[i] = parse_field(f[i], path, line_no);
    CalibrationObservation o;
    o.command = TendonCommand::from_lengths(lengths, params);
    for (int i = 0; i < 3; ++i) o.tip[i] = parse_field(f[4 + i], path, line_no);
    o.load_kg = parse_field(f[7], path, line_no);
    out.push_back(o);
  }
  return out;
}

}  // namespace tdcr
