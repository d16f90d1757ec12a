#pragma once

#include <cmath>
#include <vector>

#include "pmafl/resopt.hpp"
#include "pmafl/rng.hpp"
#include "pmafl/sysmodel.hpp"

namespace pmafl::testing {

// MNIST-profile constants used throughout the suites.
inline SystemConfig default_cfg() {
  SystemConfig cfg;
  cfg.bandwidth = 10e6;
  cfg.noise_psd = dbm_per_hz_to_w_per_hz(-174.0);
  cfg.t_max = 2.0;
  cfg.local_iters = 5;
  cfg.model_bits = 533504.0 * 16.0;
  cfg.rounds = 40;
  cfg.path_loss_const = db_to_linear(-30.0);
  cfg.path_loss_exp = 2.0;
  cfg.ref_distance = 1.0;
  return cfg;
}

inline DeviceProfile default_device(int id, double distance) {
  DeviceProfile p;
  p.id = id;
  p.data_size = 600.0;
  p.cycles_per_sample = 550346.0;
  p.f_max = 1e9;
  p.p_max = 1.0;
  p.energy_budget = 0.1;
  p.distance = distance;
  p.kappa = 5e-27;
  return p;
}

// Lighter synthetic population whose compute and upload energies are of the
// same order, so time-division optima tend to sit in the interior.
inline DeviceProfile random_device(int id, Rng& rng) {
  DeviceProfile p;
  p.id = id;
  p.data_size = std::floor(rng.uniform(100.0, 1000.0));
  p.cycles_per_sample = rng.uniform(2e4, 2e5);
  p.f_max = 1e9;
  p.p_max = 1.0;
  p.energy_budget = rng.uniform(0.02, 0.2);
  p.distance = rng.uniform(100.0, 900.0);
  p.kappa = 5e-27;
  return p;
}

inline SystemConfig random_cfg(Rng& rng) {
  SystemConfig cfg = default_cfg();
  cfg.t_max = rng.uniform(0.5, 2.0);
  cfg.model_bits = rng.uniform(2e6, 2e7);
  return cfg;
}

struct Instance {
  SystemConfig cfg;
  std::vector<DeviceProfile> profiles;
  std::vector<double> queues;
  ChannelRealization gains;
};

// Random instance in which every device can finish within the deadline even
// at an equal bandwidth split, so joint allocations stay feasible.
inline Instance random_instance(int devices, std::uint64_t seed,
                                bool positive_queues = true) {
  Rng rng(seed);
  Instance inst;
  inst.cfg = random_cfg(rng);
  inst.gains.round = 0;
  const double share = 1.0 / devices;
  for (int k = 0; k < devices; ++k) {
    for (;;) {
      DeviceProfile p = random_device(k, rng);
      const double gain = channel_gain(p, inst.cfg, rng.exponential());
      const double t_comp = min_comp_time(p, inst.cfg.local_iters);
      if (t_comp > 0.6 * inst.cfg.t_max) continue;
      const double t_comm = min_comm_time(share, gain, p, inst.cfg);
      if (t_comp + t_comm > 0.9 * inst.cfg.t_max) continue;
      inst.profiles.push_back(p);
      inst.gains.gains.push_back(gain);
      break;
    }
    inst.queues.push_back(positive_queues ? rng.uniform(0.01, 1.0) : 0.0);
  }
  return inst;
}

inline AllocationInput make_alloc_input(const Instance& inst,
                                        std::vector<int> scheduled,
                                        double v_weight = 0.0) {
  AllocationInput in;
  in.scheduled = std::move(scheduled);
  in.queues = inst.queues;
  in.gains = inst.gains;
  in.profiles = inst.profiles;
  in.cfg = inst.cfg;
  in.v_weight = v_weight;
  return in;
}

inline double rel_err(double actual, double expected) {
  return std::abs(actual - expected) /
         std::max(1e-300, std::abs(expected));
}

}  // namespace pmafl::testing
