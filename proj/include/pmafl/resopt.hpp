#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "pmafl/sysmodel.hpp"

namespace pmafl {

// A single device cannot fit its compute + upload inside the round deadline.
struct InfeasibleDeviceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A scheduled set cannot fit inside the total bandwidth.
struct InfeasibleSetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A numerical routine failed to converge within its iteration budget.
struct SolverFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SolverOptions {
  double lambda_sum_tol = 1e-9;   // |sum(theta) - budget| stop for the multiplier search
  int lambda_max_iters = 200;
  int comp_time_bisect_iters = 60;
  int theta_bisect_iters = 100;
  double alternating_tol = 1e-8;  // objective-decrease stop for the outer loop
  int alternating_max_iters = 100;
};

// Inputs for one round's joint allocation. profiles/queues/gains are indexed
// by device id; scheduled lists the ids taking part, ascending.
struct AllocationInput {
  std::vector<int> scheduled;
  std::vector<double> queues;
  ChannelRealization gains;
  std::vector<DeviceProfile> profiles;
  SystemConfig cfg;
  double v_weight = 0.0;  // data-size weight V of the per-round objective

  void validate() const;
};

// Per-round resource decision for the scheduled devices (aligned with
// `scheduled`).
struct Allocation {
  std::vector<int> scheduled;
  std::vector<double> theta;
  std::vector<double> t_comp;
  std::vector<double> t_comm;
  std::vector<double> energy;
  double energy_objective = 0.0;  // sum_k q_k * E_k
  double objective = 0.0;         // -V * sum_k D_k + sum_k q_k * E_k
};

// Principal branch W0 of w*e^w = x. Domain error for x < -1/e.
double lambert_w0(double x);

// Closed-form bandwidth fraction for one device at a given KKT multiplier:
// theta(lambda) = Q ln2 / (B t_up (W(lambda h/(q N0 B t_up e) - 1/e) + 1)).
// Strictly decreasing in lambda; requires queue > 0.
double bandwidth_fraction_of_multiplier(double lambda, double queue,
                                        double gain, double t_up,
                                        const SystemConfig& cfg);

// Derivative of the uplink energy with respect to the communication time at
// fixed bandwidth fraction (always <= 0).
double uplink_energy_dt(double theta, double t_comm, double gain,
                        const SystemConfig& cfg);

// Smallest bandwidth fraction able to push model_bits through the channel in
// t_comm_budget seconds at maximum power. nullopt when even theta = 1 fails.
std::optional<double> min_bandwidth_fraction(const DeviceProfile& profile,
                                             double gain, double t_comm_budget,
                                             const SystemConfig& cfg,
                                             const SolverOptions& opts = {});

// Energy-minimizing computation time for one device at a fixed bandwidth
// fraction: the interior stationary point of E_comp(t) + E_up(t_max - t),
// clamped to [min_comp_time, t_max - min_comm_time(theta)]. Independent of
// the queue weight, which only scales the objective.
double optimal_comp_time(const DeviceProfile& profile, double theta,
                         double gain, const SystemConfig& cfg,
                         const SolverOptions& opts = {});

// Queue-weighted uplink-energy objective of the bandwidth subproblem,
// evaluated at a candidate allocation (used by solver and test oracles).
double bandwidth_objective(const AllocationInput& in,
                           const std::vector<double>& t_comp,
                           const std::vector<double>& theta);

// Optimal bandwidth fractions for fixed computation times. Devices with zero
// queue weight are pinned to their minimum feasible fraction; the rest follow
// the Lambert-W closed form with the multiplier found by bisection.
std::vector<double> bandwidth_allocation(const AllocationInput& in,
                                         const std::vector<double>& t_comp,
                                         const SolverOptions& opts = {});

// Alternates the bandwidth and time-division solvers until the queue-weighted
// energy objective stops decreasing. objective_trace, when given, receives
// the objective value after each outer iteration.
Allocation alternating_allocate(const AllocationInput& in,
                                const SolverOptions& opts = {},
                                std::vector<double>* objective_trace = nullptr);

}  // namespace pmafl
