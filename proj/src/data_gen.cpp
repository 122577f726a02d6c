#include "tdcr/data_gen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tdcr/random.hpp"

namespace tdcr {

std::vector<TendonCommand> random_exploration(int n_steps, std::uint64_t seed, const RodParams& params,
                                              const ExplorationOptions& options) {
  if (n_steps < 1) throw InvalidInputError("random_exploration needs n_steps >= 1");
  if (!(options.max_step > 0.0) || !(options.range_fraction > 0.0 && options.range_fraction < 1.0))
    throw InvalidInputError("exploration step and range must be positive");
  const double rest = rest_tendon_length(params);
  const double lo = (1.0 - options.range_fraction) * rest;
  const double ms = options.max_step;
  Rng rng(derive_seed(seed, "exploration"));

  Vec4 L = Vec4::Constant(rest);
  int first = static_cast<int>(uniform_index(rng, kNumTendons));
  std::vector<TendonCommand> out;
  out.reserve(static_cast<std::size_t>(n_steps));
  for (int step = 0; step < n_steps; ++step) {
    const int pair[2] = {first, (first + 1) % kNumTendons};
    Vec4 next = L;
    int crossed = -1;
    double worst = 0.0;
    for (int j = 0; j < 2; ++j) {
      const int i = pair[j];
      double v = L[i] + uniform(rng, -ms, ms);
      if (v > rest) {
        if (v - rest > worst) {
          worst = v - rest;
          crossed = j;
        }
        v = 2.0 * rest - v;
      }
      if (v < lo) v = 2.0 * lo - v;
      next[i] = v;
    }
    if (crossed >= 0) {
      const int released = pair[crossed];
      const int kept = pair[1 - crossed];
      next[released] = rest;
      const int entering = crossed == 1 ? (first + kNumTendons - 1) % kNumTendons : (first + 2) % kNumTendons;
      next[entering] = rest - uniform(rng, 0.0, ms);
      first = crossed == 1 ? entering : kept;
    }
    L = next;
    out.push_back(TendonCommand::with_pair(L, first, (first + 1) % kNumTendons));
  }
  return out;
}

RolloutResult rollout(const PlantSpec& plant, const std::vector<TendonCommand>& commands) {
  RolloutResult res;
  RodPlant sim(plant.nominal);
  std::optional<TwinPlant> twin;
  if (plant.twin) twin.emplace(plant.nominal, *plant.twin);
  Vec3 x = twin ? twin->reset(plant.noise_seed) : sim.tip();
  res.data.seed = plant.noise_seed;
  res.data.samples.reserve(commands.size());
  for (std::size_t i = 0; i < commands.size(); ++i) {
    try {
      const Vec3 ps = sim.step(commands[i]);
      Sample s;
      s.step = static_cast<int>(i);
      s.x = x;
      s.p_sim = ps;
      if (twin) {
        s.x_next = twin->step(commands[i]);
        s.lengths = twin->plant().realized_lengths();
        s.source = SampleSource::kTwin;
      } else {
        s.x_next = ps;
        s.lengths = sim.realized_lengths();
        s.source = SampleSource::kSim;
      }
      x = s.x_next;
      res.data.samples.push_back(s);
    } catch (const Error& e) {
      res.failure_index = static_cast<int>(i);
      res.failure = e.what();
      break;
    }
  }
  return res;
}

std::vector<Vec4> tension_lattice(int n_directions, int n_magnitudes, double max_tension, bool staggered) {
  if (n_directions < 1 || n_magnitudes < 1 || !(max_tension > 0.0))
    throw InvalidInputError("tension_lattice needs positive sizes and tension");
  const double half_pi = 0.5 * M_PI;
  const double offset = staggered ? 0.5 : 0.0;
  std::vector<Vec4> out;
  out.reserve(static_cast<std::size_t>(n_directions * n_magnitudes));
  for (int d = 0; d < n_directions; ++d) {
    const double phi = 2.0 * M_PI * (d + offset) / n_directions;
    const int k = std::min(kNumTendons - 1, static_cast<int>(std::floor(phi / half_pi)));
    const double alpha = phi - k * half_pi;
    for (int m = 0; m < n_magnitudes; ++m) {
      const double t = max_tension * (m + 1.0 - offset) / n_magnitudes;
      Vec4 tau = Vec4::Zero();
      tau[k] = t * std::cos(alpha);
      tau[(k + 1) % kNumTendons] = t * std::sin(alpha);
      out.push_back(tau.cwiseMax(0.0));
    }
  }
  return out;
}

Dataset static_lattice_dataset(const PlantSpec& plant, const std::vector<Vec4>& tensions) {
  const TwinConfig cfg = plant.twin.value_or(TwinConfig::identity());
  const RodParams real = twin_params(plant.nominal, cfg);
  const ShootingOptions opt;
  Rng noise(derive_seed(plant.noise_seed, "lattice.noise"));
  const RodPlant sim_plant(plant.nominal);
  const RodState sim_rest = sim_plant.state();

  Dataset out;
  out.seed = plant.noise_seed;
  std::optional<RodState> real_warm, sim_warm;
  Vec4 prev_dir = Vec4::Constant(-1.0);
  for (std::size_t i = 0; i < tensions.size(); ++i) {
    const Vec4& tau = tensions[i];
    // Continue along one direction of the lattice; restart from rest when it changes.
    const double tn = tau.norm();
    const Vec4 dir = tn > 0.0 ? Vec4(tau / tn) : Vec4::Zero();
    if ((dir - prev_dir).norm() > 1e-9) {
      real_warm.reset();
      sim_warm.reset();
    }
    prev_dir = dir;
    try {
      const ShootingResult r = shoot_static_tensions(real, tau, opt, real_warm ? &*real_warm : nullptr);
      real_warm = r.state;
      TendonCommand cmd;
      cmd.lengths = tendon_path_lengths(r.state, real);
      for (int t = 0; t < kNumTendons; ++t) cmd.actuated[t] = tau[t] > 0.0;
      const RodState s = solve_releasing_slack(plant.nominal, sim_warm ? *sim_warm : sim_rest, cmd, plant.nominal.dt,
                                               false, opt, nullptr, nullptr);
      sim_warm = s;
      Sample smp;
      smp.step = static_cast<int>(i);
      smp.lengths = cmd.lengths;
      Vec3 obs = r.state.tip();
      if (cfg.sensor_noise_sigma > 0.0)
        for (int a = 0; a < 3; ++a) obs[a] += cfg.sensor_noise_sigma * standard_normal(noise);
      smp.x = obs;
      smp.x_next = obs;
      smp.p_sim = s.tip();
      smp.source = plant.twin ? SampleSource::kTwin : SampleSource::kSim;
      out.samples.push_back(smp);
    } catch (const Error&) {
      real_warm.reset();
      sim_warm.reset();
    }
  }
  return out;
}

Dataset sparse_subset(const Dataset& pool, int k, std::uint64_t seed) {
  const int n = static_cast<int>(pool.size());
  if (k < 1 || k > n) throw InvalidInputError("sparse_subset: k must lie in [1, pool size]");
  if (k == n) return pool;
  Rng rng(derive_seed(seed, "sparse_subset"));
  std::vector<Vec3> pts(n);
  for (int i = 0; i < n; ++i) pts[i] = pool.samples[i].x;

  // k-means++ seeding.
  std::vector<Vec3> centers;
  centers.push_back(pts[uniform_index(rng, static_cast<std::uint64_t>(n))]);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (pts[i] - centers.back()).squaredNorm());
      total += d2[i];
    }
    double r = uniform01(rng) * total;
    int pick = n - 1;
    for (int i = 0; i < n; ++i) {
      r -= d2[i];
      if (r < 0.0) {
        pick = i;
        break;
      }
    }
    centers.push_back(pts[pick]);
  }

  std::vector<int> assign(n, 0);
  auto assign_all = [&]() {
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = (pts[i] - centers[c]).squaredNorm();
        if (d < best) {
          best = d;
          assign[i] = c;
        }
      }
    }
  };
  // Gives every empty cluster the point that is currently worst served.
  auto fill_empty = [&]() {
    std::vector<int> count(k, 0);
    for (int a : assign) ++count[a];
    for (int c = 0; c < k; ++c) {
      if (count[c] > 0) continue;
      int worst = -1;
      double worst_d = -1.0;
      for (int i = 0; i < n; ++i) {
        if (count[assign[i]] < 2) continue;
        const double d = (pts[i] - centers[assign[i]]).squaredNorm();
        if (d > worst_d) {
          worst_d = d;
          worst = i;
        }
      }
      --count[assign[worst]];
      assign[worst] = c;
      count[c] = 1;
      centers[c] = pts[worst];
    }
  };
  for (int iter = 0; iter < 50; ++iter) {
    assign_all();
    fill_empty();
    std::vector<Vec3> sum(k, Vec3::Zero());
    std::vector<int> count(k, 0);
    for (int i = 0; i < n; ++i) {
      sum[assign[i]] += pts[i];
      ++count[assign[i]];
    }
    for (int c = 0; c < k; ++c) centers[c] = sum[c] / count[c];
  }
  assign_all();
  fill_empty();

  std::vector<std::vector<int>> members(k);
  for (int i = 0; i < n; ++i) members[assign[i]].push_back(i);
  std::vector<int> chosen;
  for (int c = 0; c < k; ++c) {
    chosen.push_back(members[c][uniform_index(rng, members[c].size())]);
  }
  std::sort(chosen.begin(), chosen.end());
  Dataset out = pool;
  out.samples.clear();
  for (int i : chosen) out.samples.push_back(pool.samples[i]);
  return out;
}

Eigen::VectorXd gpr_input(const Vec4& lengths, const Vec3& p_sim) {
  Eigen::VectorXd x(7);
  x << lengths, p_sim;
  return x;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> gpr_training_data(const Dataset& data) {
  const int n = static_cast<int>(data.size());
  Eigen::MatrixXd X(n, 7), Y(n, 3);
  for (int i = 0; i < n; ++i) {
    const Sample& s = data.samples[i];
    X.row(i) = gpr_input(s.lengths, s.p_sim).transpose();
    Y.row(i) = (s.p_sim - s.x_next).transpose();
  }
  return {X, Y};
}

Dataset generate_policy_b_dataset(const Dataset& sim_data, const GprModel& gpr, int* n_extrapolated) {
  Dataset out = sim_data;
  int flagged = 0;
  Vec3 prev_corrected = Vec3::Zero();
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    Sample& s = out.samples[i];
    const Eigen::VectorXd in = gpr_input(s.lengths, s.p_sim);
    const Vec3 corrected = s.p_sim - gpr.predict_mean(in);
    if (n_extrapolated) {
      const Vec3 var = gpr.predict_variance(in);
      for (int a = 0; a < 3; ++a) {
        if (var[a] > 0.5 * gpr.hyper(a).signal_variance) {
          ++flagged;
          break;
        }
      }
    }
    const bool continues = i > 0 && s.step == sim_data.samples[i - 1].step + 1;
    s.x = continues ? prev_corrected : Vec3(s.x - gpr.predict_mean(gpr_input(s.lengths, s.x)));
    s.x_next = corrected;
    s.source = SampleSource::kGprGenerated;
    prev_corrected = corrected;
  }
  if (n_extrapolated) *n_extrapolated = flagged;
  return out;
}

}  // namespace tdcr
