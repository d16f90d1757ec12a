#pragma once

#include <vector>

#include "pmafl/resopt.hpp"
#include "pmafl/rng.hpp"
#include "pmafl/sysmodel.hpp"

namespace pmafl {

// Per-device energy-deficit queues plus the cumulative energy ledger.
struct VirtualQueueState {
  std::vector<double> queues;             // q_k(t), always >= 0
  std::vector<double> cumulative_energy;  // sum of charged energies
  std::vector<double> per_round_budget;   // E_k / T
  int round = 0;

  static VirtualQueueState init(const std::vector<DeviceProfile>& profiles,
                                int total_rounds);
};

// One queue step: q <- max{q + alpha*E - E_k/T, 0}; the ledger accumulates
// alpha*E. energy_spent must be 0 for unscheduled devices.
void update_queue(VirtualQueueState& state, int k, bool scheduled,
                  double energy_spent);

struct RoundDecision {
  std::vector<int> scheduled;  // ascending ids
  Allocation alloc;
};

enum class ExpansionStop {
  kExhaustedCandidates,  // every candidate was added
  kStopRule,             // marginal term -V*D_k + q_k*E_k went positive
  kInfeasible,           // next candidate made the set bandwidth-infeasible
};

struct ScheduleOutcome {
  RoundDecision decision;
  double objective = 0.0;  // -V * sum D_k + sum q_k E_k of the chosen set
  int candidates_evaluated = 0;
  ExpansionStop stop = ExpansionStop::kExhaustedCandidates;
  bool s0_reduced = false;  // zero-queue set had to be trimmed to fit
};

// Devices able to finish compute + upload within the deadline when given the
// whole band (closed constraint: the boundary case is feasible).
std::vector<int> feasibility_filter(const std::vector<DeviceProfile>& profiles,
                                    const ChannelRealization& gains,
                                    const SystemConfig& cfg);

// Ranking estimate: allocate 1/K of the band, solve the time split, and
// price the round. +inf when the device cannot fit at that fraction.
double estimate_equal_bandwidth_energy(const DeviceProfile& profile,
                                       double gain, int device_count,
                                       const SystemConfig& cfg,
                                       const SolverOptions& opts = {});

// Set-expansion scheduling: seed with the zero-queue devices, add the rest in
// ascending order of q_k * E_hat_k re-optimizing resources per candidate set,
// and return the best candidate by the drift-plus-penalty objective.
ScheduleOutcome schedule_round(const VirtualQueueState& state,
                               const ChannelRealization& gains, double v_weight,
                               const SystemConfig& cfg,
                               const std::vector<DeviceProfile>& profiles,
                               const SolverOptions& opts = {});

// Baseline: every feasible device, trimmed greedily if the band cannot fit
// them all. Ignores queues when selecting.
ScheduleOutcome schedule_all_feasible(const VirtualQueueState& state,
                                      const ChannelRealization& gains,
                                      double v_weight, const SystemConfig& cfg,
                                      const std::vector<DeviceProfile>& profiles,
                                      const SolverOptions& opts = {});

// Baseline: random-order expansion under bandwidth/latency constraints only.
ScheduleOutcome schedule_random_expansion(
    const VirtualQueueState& state, const ChannelRealization& gains,
    double v_weight, const SystemConfig& cfg,
    const std::vector<DeviceProfile>& profiles, Rng& rng,
    const SolverOptions& opts = {});

}  // namespace pmafl
