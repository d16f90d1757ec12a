#include "pmafl/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pmafl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

AllocationInput make_input(const VirtualQueueState& state,
                           const ChannelRealization& gains, double v_weight,
                           const SystemConfig& cfg,
                           const std::vector<DeviceProfile>& profiles,
                           std::vector<int> scheduled) {
  AllocationInput in;
  in.scheduled = std::move(scheduled);
  in.queues = state.queues;
  in.gains = gains;
  in.profiles = profiles;
  in.cfg = cfg;
  in.v_weight = v_weight;
  return in;
}

// Most generous per-device bandwidth floor (communication window maximal).
double bandwidth_floor(const DeviceProfile& p, double gain,
                       const SystemConfig& cfg, const SolverOptions& opts) {
  const double slack = cfg.t_max - min_comp_time(p, cfg.local_iters);
  auto tmin = min_bandwidth_fraction(p, gain, slack, cfg, opts);
  return tmin ? *tmin : kInf;
}

// Drops the devices with the largest bandwidth floors until the set fits.
std::vector<int> trim_to_bandwidth(std::vector<int> ids,
                                   const ChannelRealization& gains,
                                   const SystemConfig& cfg,
                                   const std::vector<DeviceProfile>& profiles,
                                   const SolverOptions& opts, bool* reduced) {
  std::vector<double> floors(ids.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    floors[i] = bandwidth_floor(profiles[ids[i]], gains.gains[ids[i]], cfg, opts);
    sum += floors[i];
  }
  while (sum > 1.0 + 1e-12 && !ids.empty()) {
    std::size_t worst = 0;
    for (std::size_t i = 1; i < ids.size(); ++i) {
      if (floors[i] > floors[worst]) worst = i;
    }
    sum -= floors[worst];
    ids.erase(ids.begin() + worst);
    floors.erase(floors.begin() + worst);
    if (reduced) *reduced = true;
  }
  return ids;
}

}  // namespace

VirtualQueueState VirtualQueueState::init(
    const std::vector<DeviceProfile>& profiles, int total_rounds) {
  if (total_rounds < 1) {
    throw std::invalid_argument("VirtualQueueState: total_rounds must be >= 1");
  }
  VirtualQueueState s;
  s.queues.assign(profiles.size(), 0.0);
  s.cumulative_energy.assign(profiles.size(), 0.0);
  s.per_round_budget.resize(profiles.size());
  for (std::size_t k = 0; k < profiles.size(); ++k) {
    s.per_round_budget[k] = profiles[k].energy_budget / total_rounds;
  }
  return s;
}

void update_queue(VirtualQueueState& state, int k, bool scheduled,
                  double energy_spent) {
  if (k < 0 || k >= static_cast<int>(state.queues.size())) {
    throw std::invalid_argument("update_queue: device index out of range");
  }
  if (energy_spent < 0.0) {
    throw std::invalid_argument("update_queue: energy_spent must be >= 0");
  }
  if (!scheduled && energy_spent != 0.0) {
    throw std::invalid_argument(
        "update_queue: unscheduled devices cannot spend energy");
  }
  const double charged = scheduled ? energy_spent : 0.0;
  state.queues[k] = std::max(
      state.queues[k] + charged - state.per_round_budget[k], 0.0);
  state.cumulative_energy[k] += charged;
}

std::vector<int> feasibility_filter(const std::vector<DeviceProfile>& profiles,
                                    const ChannelRealization& gains,
                                    const SystemConfig& cfg) {
  std::vector<int> out;
  for (std::size_t k = 0; k < profiles.size(); ++k) {
    const double t_comp = min_comp_time(profiles[k], cfg.local_iters);
    if (t_comp > cfg.t_max) continue;
    const double t_comm =
        min_comm_time(1.0, gains.gains[k], profiles[k], cfg);
    if (t_comp + t_comm <= cfg.t_max) out.push_back(static_cast<int>(k));
  }
  return out;
}

double estimate_equal_bandwidth_energy(const DeviceProfile& profile,
                                       double gain, int device_count,
                                       const SystemConfig& cfg,
                                       const SolverOptions& opts) {
  if (device_count < 1) {
    throw std::invalid_argument("estimate_equal_bandwidth_energy: bad count");
  }
  const double theta = 1.0 / device_count;
  const double t_comp_min = min_comp_time(profile, cfg.local_iters);
  if (t_comp_min > cfg.t_max) return kInf;
  if (t_comp_min + min_comm_time(theta, gain, profile, cfg) > cfg.t_max) {
    return kInf;
  }
  const double t_comp = optimal_comp_time(profile, theta, gain, cfg, opts);
  return local_energy(profile, cfg.local_iters, t_comp) +
         uplink_energy(theta, cfg.t_max - t_comp, gain, cfg);
}

ScheduleOutcome schedule_round(const VirtualQueueState& state,
                               const ChannelRealization& gains, double v_weight,
                               const SystemConfig& cfg,
                               const std::vector<DeviceProfile>& profiles,
                               const SolverOptions& opts) {
  if (v_weight < 0.0) {
    throw std::invalid_argument("schedule_round: v_weight must be >= 0");
  }
  const std::vector<int> feasible = feasibility_filter(profiles, gains, cfg);

  std::vector<int> zero_queue;
  struct Candidate {
    int id;
    double cost;  // q_k * E_hat_k
  };
  std::vector<Candidate> candidates;
  for (int k : feasible) {
    if (state.queues[k] <= 0.0) {
      zero_queue.push_back(k);
    } else {
      const double est = estimate_equal_bandwidth_energy(
          profiles[k], gains.gains[k], static_cast<int>(profiles.size()), cfg,
          opts);
      if (std::isfinite(est)) {
        candidates.push_back({k, state.queues[k] * est});
      }
    }
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& a, const Candidate& b) {
              if (a.cost != b.cost) return a.cost < b.cost;
              return a.id < b.id;
            });

  ScheduleOutcome out;
  std::vector<int> current = trim_to_bandwidth(zero_queue, gains, cfg, profiles,
                                               opts, &out.s0_reduced);
  std::sort(current.begin(), current.end());

  Allocation best_alloc =
      alternating_allocate(make_input(state, gains, v_weight, cfg, profiles,
                                      current),
                           opts);
  out.candidates_evaluated = 1;
  std::vector<int> best_set = current;
  double best_objective = best_alloc.objective;

  for (const Candidate& c : candidates) {
    std::vector<int> next = current;
    next.insert(std::upper_bound(next.begin(), next.end(), c.id), c.id);
    Allocation alloc;
    try {
      alloc = alternating_allocate(
          make_input(state, gains, v_weight, cfg, profiles, next), opts);
    } catch (const InfeasibleSetError&) {
      out.stop = ExpansionStop::kInfeasible;
      break;
    }
    ++out.candidates_evaluated;
    const std::size_t pos =
        std::lower_bound(next.begin(), next.end(), c.id) - next.begin();
    const double marginal = -v_weight * profiles[c.id].data_size +
                            state.queues[c.id] * alloc.energy[pos];
    if (marginal > 0.0) {
      out.stop = ExpansionStop::kStopRule;
      break;
    }
    current = next;
    if (alloc.objective < best_objective) {
      best_objective = alloc.objective;
      best_alloc = alloc;
      best_set = current;
    }
  }

  out.decision.scheduled = best_set;
  out.decision.alloc = best_alloc;
  out.objective = best_objective;
  return out;
}

ScheduleOutcome schedule_all_feasible(const VirtualQueueState& state,
                                      const ChannelRealization& gains,
                                      double v_weight, const SystemConfig& cfg,
                                      const std::vector<DeviceProfile>& profiles,
                                      const SolverOptions& opts) {
  ScheduleOutcome out;
  std::vector<int> set =
      trim_to_bandwidth(feasibility_filter(profiles, gains, cfg), gains, cfg,
                        profiles, opts, &out.s0_reduced);
  std::sort(set.begin(), set.end());
  out.decision.alloc = alternating_allocate(
      make_input(state, gains, v_weight, cfg, profiles, set), opts);
  out.decision.scheduled = set;
  out.objective = out.decision.alloc.objective;
  out.candidates_evaluated = 1;
  return out;
}

ScheduleOutcome schedule_random_expansion(
    const VirtualQueueState& state, const ChannelRealization& gains,
    double v_weight, const SystemConfig& cfg,
    const std::vector<DeviceProfile>& profiles, Rng& rng,
    const SolverOptions& opts) {
  std::vector<int> order = feasibility_filter(profiles, gains, cfg);
  rng.shuffle(order);

  std::vector<int> set;
  double floor_sum = 0.0;
  int evaluated = 0;
  bool hit_band_limit = false;
  for (int k : order) {
    const double f = bandwidth_floor(profiles[k], gains.gains[k], cfg, opts);
    ++evaluated;
    if (floor_sum + f > 1.0 + 1e-12) {
      hit_band_limit = true;
      break;
    }
    floor_sum += f;
    set.push_back(k);
  }
  std::sort(set.begin(), set.end());

  ScheduleOutcome out;
  out.decision.alloc = alternating_allocate(
      make_input(state, gains, v_weight, cfg, profiles, set), opts);
  out.decision.scheduled = set;
  out.objective = out.decision.alloc.objective;
  out.candidates_evaluated = evaluated;
  out.stop = hit_band_limit ? ExpansionStop::kInfeasible
                            : ExpansionStop::kExhaustedCandidates;
  return out;
}

}  // namespace pmafl
